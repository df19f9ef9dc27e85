//! Log-normal observation model on colony radii.

use super::mcmc::LogTarget;
use super::prior::{log_prior, PriorSpec};
use super::InferenceError;
use crate::data::Dataset;
use crate::model::{DiscretizationConfig, ModelParams};
use crate::solver::{self, QuantileConfig};

/// `sum_i [-log(sqrt(2 pi) s) - (log obs_i - log pred_i)^2 / (2 s^2)]`.
pub fn log_likelihood_from_radii(observed: &[f64], predicted: &[f64], sigma_o: f64) -> f64 {
    debug_assert_eq!(observed.len(), predicted.len());
    let norm = -((2.0 * std::f64::consts::PI).sqrt() * sigma_o).ln();
    let inv = 1.0 / (2.0 * sigma_o * sigma_o);
    observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| {
            let r = o.ln() - p.ln();
            norm - r * r * inv
        })
        .sum()
}

/// Log-likelihood of the dataset at `theta`. Forward-model failures
/// (unstable integration, colony larger than the domain) give `-inf`;
/// invalid configurations are errors.
pub fn log_likelihood(
    theta: &ModelParams,
    data: &Dataset,
    cfg: &DiscretizationConfig,
    qcfg: &QuantileConfig,
) -> Result<f64, InferenceError> {
    if data.is_empty() {
        return Err(InferenceError::EmptyDataset);
    }
    cfg.validate().map_err(solver::SolverError::from)?;
    qcfg.validate()?;
    let observed = data.radii();
    if let Some(&bad) = observed.iter().find(|r| !(**r > 0.0)) {
        return Err(InferenceError::NonPositiveObservation(bad));
    }
    if !theta.is_valid() {
        return Ok(f64::NEG_INFINITY);
    }
    let trajectory = match solver::simulate(theta, cfg, qcfg, &data.times()) {
        Ok(t) => t,
        Err(e) => {
            log::debug!("forward model rejected {theta:?}: {e}");
            return Ok(f64::NEG_INFINITY);
        }
    };
    let value = log_likelihood_from_radii(&observed, &trajectory.radii, theta.sigma_o());
    Ok(if value.is_nan() { f64::NEG_INFINITY } else { value })
}

/// Unnormalised log-posterior. Without data the likelihood is identically
/// zero and the target is the prior.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    pub data: Option<&'a Dataset>,
    pub prior: PriorSpec,
    pub cfg: DiscretizationConfig,
    pub qcfg: QuantileConfig,
}

impl<'a> Posterior<'a> {
    pub fn new(
        data: Option<&'a Dataset>,
        prior: PriorSpec,
        cfg: DiscretizationConfig,
        qcfg: QuantileConfig,
    ) -> Result<Self, InferenceError> {
        prior.validate()?;
        cfg.validate().map_err(solver::SolverError::from)?;
        qcfg.validate()?;
        if data.is_some_and(Dataset::is_empty) {
            return Err(InferenceError::EmptyDataset);
        }
        Ok(Self {
            data,
            prior,
            cfg,
            qcfg,
        })
    }
}

impl LogTarget for Posterior<'_> {
    fn log_density(&self, theta: &ModelParams) -> f64 {
        let lp = log_prior(theta, &self.prior);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let ll = match self.data {
            None => 0.0,
            Some(data) => log_likelihood(theta, data, &self.cfg, &self.qcfg)
                .expect("posterior inputs validated at construction"),
        };
        lp + ll
    }
}
