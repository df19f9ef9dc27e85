//! Random-walk Metropolis-Hastings on the log-parameters.
//!
//! The proposal adds `N(0, s^2)` independently to each log-parameter, so it is
//! symmetric and the acceptance ratio only involves the target. During burn-in
//! `log s` follows a Robbins-Monro recursion towards the target acceptance
//! rate; after burn-in `s` is frozen and every retained transition is a plain
//! Metropolis step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::Posterior;
use super::prior::PriorSpec;
use super::InferenceError;
use crate::data::Dataset;
use crate::model::{DiscretizationConfig, ModelParams};
use crate::solver::QuantileConfig;

/// Exponent of the decaying adaptation gain `k^-0.6`.
const ADAPTATION_DECAY: f64 = 0.6;
const MAX_INITIAL_DRAWS: usize = 1000;

/// Unnormalised log-density over the log-parameter vector. `-inf` marks
/// infeasible points.
pub trait LogTarget {
    fn log_density(&self, theta: &ModelParams) -> f64;
}

impl<F> LogTarget for F
where
    F: Fn(&ModelParams) -> f64,
{
    fn log_density(&self, theta: &ModelParams) -> f64 {
        self(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    /// Total Metropolis iterations including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub initial_step_size: f64,
    pub target_acceptance: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            iterations: 450_000,
            burn_in: 50_000,
            seed: 0,
            initial_step_size: 0.1,
            target_acceptance: 0.23,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::InvalidSettings(m));
        if self.iterations <= self.burn_in {
            return bad(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            ));
        }
        if !(self.initial_step_size.is_finite() && self.initial_step_size > 0.0) {
            return bad(format!(
                "initial_step_size must be positive, got {}",
                self.initial_step_size
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!(
                "target_acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            ));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta: ModelParams,
    pub log_posterior: f64,
    pub accepted: bool,
}

/// Retained (post burn-in) samples plus the adaptation history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chain {
    pub samples: Vec<Sample>,
    /// Step size in effect at each burn-in iteration.
    pub step_size_trace: Vec<f64>,
    /// Frozen step size used after burn-in.
    pub step_size: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub iterations: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.accepted).count() as f64 / self.samples.len() as f64
    }

    /// Values of one log-parameter (0..4) across the retained samples.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta.to_log_array()[k]).collect()
    }
}

/// Random-walk proposal: each log-parameter moves by an independent
/// `N(0, step_size^2)` increment.
pub fn propose<R: Rng + ?Sized>(current: &ModelParams, step_size: f64, rng: &mut R) -> ModelParams {
    let mut v = current.to_log_array();
    for x in &mut v {
        let z: f64 = rng.sample(StandardNormal);
        *x += step_size * z;
    }
    ModelParams::from_log_array(v)
}

/// `min(1, exp(candidate - current))`; an infeasible candidate gives 0.
pub fn accept_probability(log_post_current: f64, log_post_candidate: f64) -> f64 {
    if log_post_candidate.is_nan() || log_post_candidate == f64::NEG_INFINITY {
        return 0.0;
    }
    (log_post_candidate - log_post_current).exp().min(1.0)
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn sample_with_rng<T: LogTarget + ?Sized>(
    target: &T,
    initial: ModelParams,
    initial_log_density: f64,
    settings: &SamplerSettings,
    rng: &mut ChaCha8Rng,
) -> Chain {
    let mut current = initial;
    // The current log-density doubles as the likelihood cache: a rejected
    // proposal repeats `current`, which is never re-integrated.
    let mut current_lp = initial_log_density;
    let mut log_step = settings.initial_step_size.ln();
    let mut samples = Vec::with_capacity(settings.retained());
    let mut trace = Vec::with_capacity(settings.burn_in);

    for iteration in 1..=settings.iterations {
        let step = log_step.exp();
        let candidate = propose(&current, step, rng);
        let candidate_lp = sanitize(target.log_density(&candidate));
        let u: f64 = rng.gen();
        let accepted = u <= accept_probability(current_lp, candidate_lp);
        if accepted {
            current = candidate;
            current_lp = candidate_lp;
        }
        if iteration <= settings.burn_in {
            trace.push(step);
            let gain = (iteration as f64).powf(-ADAPTATION_DECAY);
            let indicator = if accepted { 1.0 } else { 0.0 };
            log_step += gain * (indicator - settings.target_acceptance);
        } else {
            samples.push(Sample {
                theta: current,
                log_posterior: current_lp,
                accepted,
            });
        }
    }

    Chain {
        samples,
        step_size_trace: trace,
        step_size: log_step.exp(),
        seed: settings.seed,
        burn_in: settings.burn_in,
        iterations: settings.iterations,
    }
}

/// Runs the sampler from a given starting point.
pub fn sample_chain<T: LogTarget + ?Sized>(
    target: &T,
    initial: ModelParams,
    settings: &SamplerSettings,
) -> Result<Chain, InferenceError> {
    settings.validate()?;
    let lp = sanitize(target.log_density(&initial));
    if !lp.is_finite() {
        return Err(InferenceError::NoFeasibleStart(1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    Ok(sample_with_rng(target, initial, lp, settings, &mut rng))
}

/// Runs the sampler with the starting point drawn from `prior` (redrawn while
/// the target is infeasible there).
pub fn sample_from_prior<T: LogTarget + ?Sized>(
    target: &T,
    prior: &PriorSpec,
    settings: &SamplerSettings,
) -> Result<Chain, InferenceError> {
    settings.validate()?;
    prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..MAX_INITIAL_DRAWS {
        let start = prior.sample(&mut rng);
        let lp = sanitize(target.log_density(&start));
        if lp.is_finite() {
            return Ok(sample_with_rng(target, start, lp, settings, &mut rng));
        }
    }
    Err(InferenceError::NoFeasibleStart(MAX_INITIAL_DRAWS))
}

/// Posterior sampling for a dataset (or the prior alone when `data` is
/// `None`).
pub fn run_chain(
    data: Option<&Dataset>,
    prior: &PriorSpec,
    cfg: &DiscretizationConfig,
    qcfg: &QuantileConfig,
    settings: &SamplerSettings,
) -> Result<Chain, InferenceError> {
    let posterior = Posterior::new(data, *prior, cfg.clone(), qcfg.clone())?;
    sample_from_prior(&posterior, prior, settings)
}

/// Retained sample with the largest log-posterior; ties go to the earliest.
pub fn map_estimate(chain: &Chain) -> Result<ModelParams, InferenceError> {
    let mut best: Option<&Sample> = None;
    for s in &chain.samples {
        if best.is_none_or(|b| s.log_posterior > b.log_posterior) {
            best = Some(s);
        }
    }
    best.map(|s| s.theta).ok_or(InferenceError::EmptyChain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_normal(theta: &ModelParams) -> f64 {
        -0.5 * theta.to_log_array().iter().map(|x| x * x).sum::<f64>()
    }

    fn settings(iterations: usize, burn_in: usize) -> SamplerSettings {
        SamplerSettings {
            iterations,
            burn_in,
            seed: 11,
            initial_step_size: 0.5,
            target_acceptance: 0.23,
        }
    }

    #[test]
    fn acceptance_probability_examples() {
        assert_eq!(accept_probability(-3.0, -3.0), 1.0);
        assert_relative_eq!(accept_probability(0.0, -(2.0f64.ln())), 0.5, epsilon = 1e-15);
        assert_eq!(accept_probability(0.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(accept_probability(0.0, 5.0), 1.0);
    }

    #[test]
    fn tiny_step_proposal_stays_put() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = ModelParams::from_log_array([0.1, -2.0, 0.3, -1.0]);
        let p = propose(&theta, 1e-300, &mut rng);
        assert_eq!(p, theta);
    }

    #[test]
    fn settings_validation() {
        assert!(settings(10, 10).validate().is_err());
        assert!(settings(10, 11).validate().is_err());
        assert!(SamplerSettings {
            initial_step_size: 0.0,
            ..settings(10, 1)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rejected_steps_repeat_the_previous_state() {
        let chain = sample_chain(&std_normal, ModelParams::from_log_array([0.0; 4]), &settings(5000, 500))
            .unwrap();
        assert_eq!(chain.len(), 4500);
        for w in chain.samples.windows(2) {
            if !w[1].accepted {
                assert_eq!(w[1].theta, w[0].theta);
                assert_eq!(w[1].log_posterior, w[0].log_posterior);
            } else {
                assert_ne!(w[1].theta, w[0].theta);
            }
        }
        assert!(chain.samples.iter().all(|s| s.log_posterior.is_finite()));
        assert_eq!(chain.step_size_trace.len(), 500);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let start = ModelParams::from_log_array([0.5; 4]);
        let a = sample_chain(&std_normal, start, &settings(3000, 300)).unwrap();
        let b = sample_chain(&std_normal, start, &settings(3000, 300)).unwrap();
        assert_eq!(a, b);
        let c = sample_chain(&std_normal, start, &SamplerSettings { seed: 12, ..settings(3000, 300) })
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_offset_in_target_does_not_change_the_chain() {
        let start = ModelParams::from_log_array([0.5; 4]);
        let shifted = |t: &ModelParams| std_normal(t) + 10.0;
        let a = sample_chain(&std_normal, start, &settings(5000, 500)).unwrap();
        let b = sample_chain(&shifted, start, &settings(5000, 500)).unwrap();
        let thetas = |c: &Chain| c.samples.iter().map(|s| (s.theta, s.accepted)).collect::<Vec<_>>();
        assert_eq!(thetas(&a), thetas(&b));
    }

    #[test]
    fn infeasible_start_is_an_error() {
        let never = |_: &ModelParams| f64::NEG_INFINITY;
        assert!(matches!(
            sample_chain(&never, ModelParams::from_log_array([0.0; 4]), &settings(10, 1)),
            Err(InferenceError::NoFeasibleStart(_))
        ));
        let prior = PriorSpec::new([0.0; 4], [1.0; 4]).unwrap();
        assert!(matches!(
            sample_from_prior(&never, &prior, &settings(10, 1)),
            Err(InferenceError::NoFeasibleStart(_))
        ));
    }

    #[test]
    fn map_examples() {
        let s = |v: f64, lp: f64| Sample {
            theta: ModelParams::from_log_array([v; 4]),
            log_posterior: lp,
            accepted: true,
        };
        let mut chain = Chain {
            samples: vec![s(1.0, -3.0)],
            ..Default::default()
        };
        assert_eq!(map_estimate(&chain).unwrap(), ModelParams::from_log_array([1.0; 4]));
        chain.samples = vec![s(1.0, -3.0), s(2.0, -2.0), s(3.0, -1.0)];
        assert_eq!(map_estimate(&chain).unwrap(), ModelParams::from_log_array([3.0; 4]));
        chain.samples = vec![s(1.0, -1.0), s(2.0, -1.0)];
        assert_eq!(map_estimate(&chain).unwrap(), ModelParams::from_log_array([1.0; 4]));
        chain.samples.clear();
        assert_eq!(map_estimate(&chain), Err(InferenceError::EmptyChain));
    }
}
