//! Empirical grid-convergence study: weighted flat distance between runs at
//! increasing particle counts and the finest one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{weighted_flat_distance, WeightExponent};
use crate::model::{DiscretizationConfig, ModelParams};
use crate::solver::{self, QuantileConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("need at least 3 particle counts, got {0}")]
    TooFewCounts(usize),
    #[error("particle counts must be strictly increasing ({0} follows {1})")]
    NotIncreasing(usize, usize),
    #[error("run with {n} particles failed: {source}")]
    Solver { n: usize, source: SolverError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_particles: usize,
    /// Weighted flat distance to the reference at each observation time.
    pub errors: Vec<f64>,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub times: Vec<f64>,
    pub reference_particles: usize,
    /// One row per count, the reference last (with zero error).
    pub rows: Vec<ConvergenceRow>,
    /// Error reduction per doubling of `N` between consecutive non-reference
    /// rows, normalised to a factor of two when counts do not double.
    pub ratios: Vec<f64>,
    /// Least-squares slope of `-log(max_error)` against `log N` over the
    /// non-reference rows.
    pub order: f64,
}

/// Runs the forward model at every count in `counts` (strictly increasing,
/// at least three) and compares each state with the run at the largest count.
pub fn convergence_study(
    theta: &ModelParams,
    base: &DiscretizationConfig,
    qcfg: &QuantileConfig,
    counts: &[usize],
    times: &[f64],
    exponent: WeightExponent,
) -> Result<ConvergenceTable, ConvergenceError> {
    if counts.len() < 3 {
        return Err(ConvergenceError::TooFewCounts(counts.len()));
    }
    for w in counts.windows(2) {
        if w[1] <= w[0] {
            return Err(ConvergenceError::NotIncreasing(w[1], w[0]));
        }
    }
    let run = |n: usize| {
        let cfg = DiscretizationConfig {
            n_particles: n,
            ..base.clone()
        };
        solver::simulate(theta, &cfg, qcfg, times).map_err(|source| ConvergenceError::Solver { n, source })
    };

    let reference_n = *counts.last().expect("checked length");
    let reference = run(reference_n)?;
    let mut rows = Vec::with_capacity(counts.len());
    for &n in counts {
        let errors: Vec<f64> = if n == reference_n {
            vec![0.0; times.len()]
        } else {
            let traj = run(n)?;
            traj.states
                .iter()
                .zip(&reference.states)
                .map(|(a, b)| weighted_flat_distance(a, b, exponent))
                .collect()
        };
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            n_particles: n,
            errors,
            max_error,
        });
    }

    let coarse = &rows[..rows.len() - 1];
    let ratios = coarse
        .windows(2)
        .map(|w| {
            let doublings = (w[1].n_particles as f64 / w[0].n_particles as f64).log2();
            (w[0].max_error / w[1].max_error).powf(1.0 / doublings)
        })
        .collect();
    let order = fitted_order(coarse);

    Ok(ConvergenceTable {
        times: times.to_vec(),
        reference_particles: reference_n,
        rows,
        ratios,
        order,
    })
}

fn fitted_order(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_error > 0.0)
        .map(|r| ((r.n_particles as f64).ln(), -r.max_error.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, DiscretizationConfig) {
        let theta = ModelParams::from_natural(1.0, 0.3, 0.1, 0.5).unwrap();
        let cfg = DiscretizationConfig {
            r_max: 3.0,
            time_step: 0.05,
            ..Default::default()
        };
        (theta, cfg)
    }

    #[test]
    fn validates_counts() {
        let (theta, cfg) = setup();
        let q = QuantileConfig::default();
        assert_eq!(
            convergence_study(&theta, &cfg, &q, &[50, 100], &[1.0], WeightExponent::One),
            Err(ConvergenceError::TooFewCounts(2))
        );
        assert_eq!(
            convergence_study(&theta, &cfg, &q, &[50, 100, 100], &[1.0], WeightExponent::One),
            Err(ConvergenceError::NotIncreasing(100, 100))
        );
    }

    #[test]
    fn errors_shrink_with_resolution() {
        let (theta, cfg) = setup();
        let t = convergence_study(
            &theta,
            &cfg,
            &QuantileConfig::default(),
            &[25, 50, 100, 400],
            &[0.5, 1.0],
            WeightExponent::One,
        )
        .unwrap();
        assert_eq!(t.rows.last().unwrap().max_error, 0.0);
        assert!(t.rows[0].max_error > t.rows[1].max_error);
        assert!(t.rows[1].max_error > t.rows[2].max_error);
        assert_eq!(t.ratios.len(), 2);
        assert!(t.order > 0.5, "order {}", t.order);
    }
}
