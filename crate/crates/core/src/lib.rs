//! Particle simulation and Bayesian calibration of a non-local
//! proliferation model for radially symmetric tumour spheroids.
//!
//! The colony is a radial density of cells on `[0, R0]`. It is discretised
//! into Dirac masses on a fixed grid whose masses follow a logistic-type ODE
//! system driven by a compactly supported interaction kernel. The observable
//! is the radius enclosing 95% of the mass. Parameters are calibrated against
//! radius time series with a random-walk Metropolis-Hastings sampler.

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod convergence;
pub mod data;
pub mod inference;
pub mod io;
pub mod measures;
pub mod model;
pub mod solver;

pub use data::{CellLine, DataError, Dataset, Observation, TimeWindow, ValueUnit};
pub use inference::{Chain, Diagnostics, InferenceError, PriorSpec, SamplerSettings};
pub use measures::{DiscreteMeasure, MeasureError, SignedAtomList, WeightExponent};
pub use model::{DiscretizationConfig, ModelError, ModelParams};
pub use solver::{QuantileConfig, SolverError, Trajectory};
