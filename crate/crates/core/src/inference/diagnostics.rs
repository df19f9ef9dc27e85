//! Chain summaries: autocorrelation, effective sample size, acceptance rate
//! and central posterior quantiles.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::mcmc::Chain;
use super::InferenceError;
use crate::model::PARAM_NAMES;

/// ESS below this is flagged as too small for reliable tail quantiles.
pub const LOW_ESS_THRESHOLD: f64 = 400.0;

/// Per-parameter summary, in the order of [`PARAM_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub parameters: Vec<String>,
    /// `autocorrelation[k][lag]`.
    pub autocorrelation: Vec<Vec<f64>>,
    /// `None` for a parameter whose chain is constant.
    pub ess: Vec<Option<f64>>,
    /// (2.5%, 50%, 97.5%) of each log-parameter.
    pub quantiles: Vec<[f64; 3]>,
    pub degenerate: bool,
    pub low_ess: bool,
}

impl Diagnostics {
    pub fn min_ess(&self) -> Option<f64> {
        self.ess.iter().flatten().copied().reduce(f64::min)
    }
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Biased sample autocovariance for lags `0..=max_lag`, computed with a
/// zero-padded FFT.
fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered(x)
        .into_iter()
        .map(|v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    buf[..=max_lag.min(n - 1)].iter().map(|c| c.re * scale).collect()
}

/// Sample autocorrelation `rho_0..rho_max_lag` (biased estimator). A
/// constant series has `rho_0 = 1` and zero at every other lag.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>, InferenceError> {
    if x.len() < max_lag + 1 {
        return Err(InferenceError::InsufficientSamples {
            needed: max_lag + 1,
            have: x.len(),
        });
    }
    let acov = autocovariance(x, max_lag);
    let c0 = acov[0];
    if is_constant(x) || !(c0 > 0.0) {
        let mut rho = vec![0.0; max_lag + 1];
        rho[0] = 1.0;
        return Ok(rho);
    }
    let mut rho: Vec<f64> = acov.iter().map(|c| c / c0).collect();
    rho[0] = 1.0;
    Ok(rho)
}

/// Geyer's initial positive sequence estimator with the monotone
/// correction, capped at `n`. `None` for a constant series.
pub fn effective_sample_size(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || is_constant(x) {
        return None;
    }
    let acov = autocovariance(x, n - 1);
    let c0 = acov[0];
    if !(c0 > 0.0) || !c0.is_finite() {
        return None;
    }
    let rho = |k: usize| if k < n { acov[k] / c0 } else { 0.0 };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    // tau = -1 + 2 * sum of pairs; the first pair contains rho_0 = 1.
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Some((n as f64 / tau).min(n as f64))
}

/// Linear-interpolation quantile of a sample (type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn diagnostics(chain: &Chain, max_lag: usize) -> Result<Diagnostics, InferenceError> {
    let n = chain.len();
    if n < max_lag + 1 {
        return Err(InferenceError::InsufficientSamples {
            needed: max_lag + 1,
            have: n,
        });
    }
    let mut autocorr = Vec::with_capacity(4);
    let mut ess = Vec::with_capacity(4);
    let mut quantiles = Vec::with_capacity(4);
    for k in 0..4 {
        let xs = chain.component(k);
        autocorr.push(autocorrelation(&xs, max_lag)?);
        ess.push(effective_sample_size(&xs));
        let mut sorted = xs;
        sorted.sort_by(f64::total_cmp);
        quantiles.push([
            quantile_sorted(&sorted, 0.025),
            quantile_sorted(&sorted, 0.5),
            quantile_sorted(&sorted, 0.975),
        ]);
    }
    let degenerate = ess.iter().any(Option::is_none);
    let low_ess = degenerate || ess.iter().flatten().any(|&e| e < LOW_ESS_THRESHOLD);
    Ok(Diagnostics {
        n_samples: n,
        acceptance_rate: chain.acceptance_rate(),
        parameters: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        autocorrelation: autocorr,
        ess,
        quantiles,
        degenerate,
        low_ess,
    })
}

/// Combines per-chain summaries: acceptance rates are sample-weighted and
/// ESS values add up.
pub fn merge_summaries(parts: &[Diagnostics]) -> Option<MergedSummary> {
    let total: usize = parts.iter().map(|d| d.n_samples).sum();
    if total == 0 {
        return None;
    }
    let acceptance_rate =
        parts.iter().map(|d| d.acceptance_rate * d.n_samples as f64).sum::<f64>() / total as f64;
    let ess = (0..4)
        .map(|k| {
            parts
                .iter()
                .map(|d| d.ess.get(k).copied().flatten())
                .sum::<Option<f64>>()
        })
        .collect();
    Some(MergedSummary {
        chains: parts.len(),
        n_samples: total,
        acceptance_rate,
        ess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedSummary {
    pub chains: usize,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub ess: Vec<Option<f64>>,
}
