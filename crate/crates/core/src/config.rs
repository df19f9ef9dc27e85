//! Run configuration: a flat TOML document with every key optional.
//!
//! Values are resolved as command-line flags over file values over built-in
//! defaults. A run manifest (JSON, written by every command) can be passed
//! wherever a config file is accepted, which reproduces the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, CellLine, TimeWindow, ValueUnit};
use crate::inference::{PriorSpec, SamplerSettings};
use crate::model::{DiscretizationConfig, ModelParams};
use crate::solver::QuantileConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for '{field}': {message}")]
    Field { field: &'static str, message: String },
}

/// Forward-run domain radius (mm) when none is configured.
pub const DEFAULT_R_MAX: f64 = 3.0;
/// Domain radius as a multiple of the largest observed radius.
pub const R_MAX_MARGIN: f64 = 3.0;

fn field_err(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cell_line: CellLine,
    /// Custom prior: log-locations of (alpha, sigma_k, sigma_o, sigma_i).
    pub prior_location: Option<[f64; 4]>,
    pub prior_scale: Option<[f64; 4]>,

    /// Natural-scale parameters for forward runs.
    pub alpha: Option<f64>,
    pub sigma_k: Option<f64>,
    pub sigma_o: Option<f64>,
    pub sigma_i: Option<f64>,

    pub n_particles: usize,
    /// Domain radius in mm. `infer` defaults it to three times the largest
    /// observed radius; forward runs use 3 mm.
    pub r_max: Option<f64>,
    pub time_step: f64,
    pub q_exponent: u32,
    /// Defaults per cell line when absent.
    pub sigma_tilde_ratio: Option<f64>,

    pub quantile_level: f64,
    pub regularize: bool,
    pub epsilon: f64,

    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub initial_step_size: f64,
    pub target_acceptance: f64,
    pub chains: usize,
    pub max_lag: usize,
    pub predictive_draws: usize,

    pub data: Option<PathBuf>,
    pub unit: ValueUnit,
    pub window: Option<TimeWindow>,
    pub out: PathBuf,

    /// Forward-run horizon and output spacing in days.
    pub horizon: f64,
    pub output_interval: f64,
    /// Particle counts for the convergence study.
    pub particle_counts: Vec<usize>,
    /// Weight exponent of the flat norm used by the convergence study.
    pub weight_exponent: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DiscretizationConfig::default();
        let q = QuantileConfig::default();
        let s = SamplerSettings::default();
        Self {
            cell_line: CellLine::L5178Y,
            prior_location: None,
            prior_scale: None,
            alpha: None,
            sigma_k: None,
            sigma_o: None,
            sigma_i: None,
            n_particles: d.n_particles,
            r_max: None,
            time_step: d.time_step,
            q_exponent: d.q_exponent,
            sigma_tilde_ratio: None,
            quantile_level: q.level,
            regularize: q.regularize,
            epsilon: q.epsilon,
            iterations: s.iterations,
            burn_in: s.burn_in,
            seed: s.seed,
            initial_step_size: s.initial_step_size,
            target_acceptance: s.target_acceptance,
            chains: 1,
            max_lag: 200,
            predictive_draws: 500,
            data: None,
            unit: ValueUnit::Diameter,
            window: None,
            out: PathBuf::from("out"),
            horizon: 30.0,
            output_interval: 1.0,
            particle_counts: vec![100, 200, 400, 1600],
            weight_exponent: 1,
        }
    }
}

/// Wrapper written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, outputs: Vec<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            outputs,
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, or the `config` block of a JSON manifest.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        if text.trim_start().starts_with('{') {
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            Ok(manifest.config)
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    pub fn discretization(&self) -> DiscretizationConfig {
        DiscretizationConfig {
            n_particles: self.n_particles,
            r_max: self.r_max.unwrap_or(DEFAULT_R_MAX),
            q_exponent: self.q_exponent,
            sigma_tilde_ratio: self
                .sigma_tilde_ratio
                .unwrap_or_else(|| data::default_sigma_tilde_ratio(&self.cell_line)),
            time_step: self.time_step,
        }
    }

    pub fn quantile(&self) -> QuantileConfig {
        QuantileConfig {
            level: self.quantile_level,
            regularize: self.regularize,
            epsilon: self.epsilon,
        }
    }

    pub fn sampler(&self) -> SamplerSettings {
        SamplerSettings {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
            initial_step_size: self.initial_step_size,
            target_acceptance: self.target_acceptance,
        }
    }

    /// Custom prior if both blocks are given, else the cell line's default.
    pub fn prior(&self) -> Result<PriorSpec, ConfigError> {
        match (self.prior_location, self.prior_scale) {
            (Some(loc), Some(scale)) => {
                PriorSpec::new(loc, scale).map_err(|e| field_err("prior_scale", e))
            }
            (Some(_), None) => Err(field_err("prior_scale", "required with prior_location")),
            (None, Some(_)) => Err(field_err("prior_location", "required with prior_scale")),
            (None, None) => data::builtin_priors(&self.cell_line).map_err(|e| field_err("cell_line", e)),
        }
    }

    /// Forward-run parameters. Missing entries fall back to the prior
    /// medians.
    pub fn theta(&self) -> Result<ModelParams, ConfigError> {
        let median = self.prior().ok().map(|p| p.location.map(f64::exp));
        let pick = |v: Option<f64>, k: usize, name: &'static str| {
            v.or(median.map(|m| m[k]))
                .ok_or_else(|| field_err(name, "required when the cell line has no built-in prior"))
        };
        let alpha = pick(self.alpha, 0, "alpha")?;
        let sigma_k = pick(self.sigma_k, 1, "sigma_k")?;
        let sigma_o = pick(self.sigma_o, 2, "sigma_o")?;
        let sigma_i = pick(self.sigma_i, 3, "sigma_i")?;
        for (name, v) in [
            ("alpha", alpha),
            ("sigma_k", sigma_k),
            ("sigma_o", sigma_o),
            ("sigma_i", sigma_i),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_err(name, format!("must be positive, got {v}")));
            }
        }
        ModelParams::from_natural(alpha, sigma_k, sigma_o, sigma_i).map_err(|e| field_err("alpha", e))
    }

    /// Observation times of a forward run: `0, dt, 2 dt, ...` up to and
    /// including the horizon.
    pub fn output_times(&self) -> Vec<f64> {
        if self.horizon <= 0.0 {
            return vec![0.0];
        }
        let n = (self.horizon / self.output_interval + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * self.output_interval).collect();
        if self.horizon - times[n] > 1e-9 * self.horizon {
            times.push(self.horizon);
        } else {
            times[n] = self.horizon;
        }
        times
    }

    /// Checks every field that does not need the dataset.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.discretization();
        if d.n_particles < 2 {
            return Err(field_err("n_particles", "must be at least 2"));
        }
        if !(d.r_max.is_finite() && d.r_max > 0.0) {
            return Err(field_err("r_max", "must be positive"));
        }
        if !(d.time_step.is_finite() && d.time_step > 0.0) {
            return Err(field_err("time_step", "must be positive"));
        }
        if d.q_exponent == 0 {
            return Err(field_err("q_exponent", "must be positive"));
        }
        if !(d.sigma_tilde_ratio.is_finite() && d.sigma_tilde_ratio > 0.0) {
            return Err(field_err("sigma_tilde_ratio", "must be positive"));
        }
        d.validate().map_err(|e| field_err("n_particles", e))?;
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(field_err("quantile_level", "must lie in (0, 1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(field_err("epsilon", "must be positive"));
        }
        if self.iterations <= self.burn_in {
            return Err(field_err("iterations", "must exceed burn_in"));
        }
        if !(self.initial_step_size.is_finite() && self.initial_step_size > 0.0) {
            return Err(field_err("initial_step_size", "must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(field_err("target_acceptance", "must lie in (0, 1)"));
        }
        if self.chains == 0 {
            return Err(field_err("chains", "must be at least 1"));
        }
        if self.predictive_draws == 0 {
            return Err(field_err("predictive_draws", "must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(field_err("horizon", "must be non-negative"));
        }
        if !(self.output_interval.is_finite() && self.output_interval > 0.0) {
            return Err(field_err("output_interval", "must be positive"));
        }
        crate::measures::WeightExponent::try_from(self.weight_exponent)
            .map_err(|e| field_err("weight_exponent", e))?;
        self.prior()?;
        for (name, v) in [
            ("alpha", self.alpha),
            ("sigma_k", self.sigma_k),
            ("sigma_o", self.sigma_o),
            ("sigma_i", self.sigma_i),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(field_err(name, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
