//! Pointwise credible bands for the latent radius curve.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::quantile_sorted;
use super::mcmc::Chain;
use super::InferenceError;
use crate::model::DiscretizationConfig;
use crate::solver::{self, QuantileConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBand {
    pub times: Vec<f64>,
    /// 2.5% pointwise quantile of the predicted radius.
    pub lo: Vec<f64>,
    pub median: Vec<f64>,
    /// 97.5% pointwise quantile.
    pub hi: Vec<f64>,
    pub draws_used: usize,
    pub draws_failed: usize,
}

/// Draws `n_draws` retained samples uniformly with replacement, runs the
/// forward model for each and summarises the radii at `times`. Observation
/// noise is not added. Draws whose forward run fails are skipped and counted.
pub fn posterior_predictive<R: Rng + ?Sized>(
    chain: &Chain,
    times: &[f64],
    cfg: &DiscretizationConfig,
    qcfg: &QuantileConfig,
    n_draws: usize,
    rng: &mut R,
) -> Result<PredictiveBand, InferenceError> {
    if chain.is_empty() {
        return Err(InferenceError::EmptyChain);
    }
    if n_draws == 0 {
        return Err(InferenceError::InvalidSettings(
            "n_draws must be at least 1".into(),
        ));
    }
    cfg.validate().map_err(solver::SolverError::from)?;
    qcfg.validate()?;

    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(n_draws);
    let mut failed = 0;
    for _ in 0..n_draws {
        let theta = chain.samples[rng.gen_range(0..chain.len())].theta;
        match solver::simulate(&theta, cfg, qcfg, times) {
            Ok(traj) => curves.push(traj.radii),
            Err(e @ solver::SolverError::BadObservationTimes { .. })
            | Err(e @ solver::SolverError::EmptyObservationTimes) => return Err(e.into()),
            Err(e) => {
                log::warn!("predictive draw at {theta:?} skipped: {e}");
                failed += 1;
            }
        }
    }
    if curves.is_empty() {
        return Err(InferenceError::AllDrawsFailed(n_draws));
    }
    if failed > 0 {
        log::warn!("{failed} of {n_draws} predictive draws failed");
    }

    let mut lo = Vec::with_capacity(times.len());
    let mut median = Vec::with_capacity(times.len());
    let mut hi = Vec::with_capacity(times.len());
    let mut column = Vec::with_capacity(curves.len());
    for j in 0..times.len() {
        column.clear();
        column.extend(curves.iter().map(|c| c[j]));
        column.sort_by(f64::total_cmp);
        lo.push(quantile_sorted(&column, 0.025));
        median.push(quantile_sorted(&column, 0.5));
        hi.push(quantile_sorted(&column, 0.975));
    }
    Ok(PredictiveBand {
        times: times.to_vec(),
        lo,
        median,
        hi,
        draws_used: curves.len(),
        draws_failed: failed,
    })
}
