//! Independent log-normal priors on the four model parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::model::ModelParams;

/// Normal distributions on the log-parameters, in the order
/// `log_alpha, log_sigma_k, log_sigma_o, log_sigma_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub location: [f64; 4],
    pub scale: [f64; 4],
}

impl PriorSpec {
    pub fn new(location: [f64; 4], scale: [f64; 4]) -> Result<Self, InferenceError> {
        let spec = Self { location, scale };
        spec.validate()?;
        Ok(spec)
    }

    /// Prior whose log-locations are the logs of the given medians.
    pub fn from_medians(medians: [f64; 4], scale: [f64; 4]) -> Result<Self, InferenceError> {
        if let Some(m) = medians.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(InferenceError::InvalidPrior(format!(
                "medians must be positive, got {m}"
            )));
        }
        Self::new(medians.map(f64::ln), scale)
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.location.iter().any(|l| !l.is_finite()) {
            return Err(InferenceError::InvalidPrior(
                "locations must be finite".into(),
            ));
        }
        if let Some(s) = self.scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(InferenceError::InvalidPrior(format!(
                "scales must be positive, got {s}"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *slot = self.location[k] + self.scale[k] * z;
        }
        ModelParams::from_log_array(v)
    }
}

/// Sum of the four normal log-densities, normalising constants included.
pub fn log_prior(theta: &ModelParams, prior: &PriorSpec) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    theta
        .to_log_array()
        .iter()
        .zip(prior.location.iter().zip(&prior.scale))
        .map(|(x, (mu, s))| {
            let z = (x - mu) / s;
            -0.5 * z * z - s.ln() - 0.5 * ln_2pi
        })
        .sum()
}
