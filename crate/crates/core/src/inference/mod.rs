//! Bayesian calibration: priors, likelihood, random-walk Metropolis-Hastings,
//! chain diagnostics and posterior predictive bands.

use thiserror::Error;

use crate::solver::SolverError;

pub mod diagnostics;
pub mod likelihood;
pub mod mcmc;
pub mod predictive;
pub mod prior;

pub use diagnostics::{autocorrelation, diagnostics, effective_sample_size, Diagnostics};
pub use likelihood::{log_likelihood, log_likelihood_from_radii, Posterior};
pub use mcmc::{
    accept_probability, map_estimate, propose, run_chain, sample_chain, Chain, LogTarget, Sample,
    SamplerSettings,
};
pub use predictive::{posterior_predictive, PredictiveBand};
pub use prior::{log_prior, PriorSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("observed radius {0} must be positive")]
    NonPositiveObservation(f64),
    #[error("invalid sampler settings: {0}")]
    InvalidSettings(String),
    #[error("no initial state with finite log-posterior after {0} prior draws")]
    NoFeasibleStart(usize),
    #[error("chain is empty")]
    EmptyChain,
    #[error("need at least {needed} retained samples, have {have}")]
    InsufficientSamples { needed: usize, have: usize },
    #[error("all {0} predictive draws failed in the forward model")]
    AllDrawsFailed(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
