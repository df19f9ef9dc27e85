//! Time integration of the particle mass system and extraction of the
//! colony radius.
//!
//! Particles sit on the fixed grid `x_i = i R0 / N`; only their masses move:
//!
//! ```text
//! dm_i/dt = (cap_i - m_i) * sum_j L(x_i, x_j) m_j,   cap_i = 4 pi x_i^2 R0 / N
//! ```
//!
//! `L` vanishes for `|x_i - x_j| >= sigma_k`, so the interaction matrix is
//! banded and is built once per parameter vector. Row sums are accumulated in
//! ascending `j`, which makes every evaluation bit-reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::DiscreteMeasure;
use crate::model::{self, DiscretizationConfig, ModelError, ModelParams};

/// Relative tolerance below zero under which a mass is clamped to zero
/// instead of reported as an instability.
pub const NEGATIVE_MASS_TOLERANCE: f64 = 1e-12;
/// Relative overshoot tolerated above a particle's carrying capacity.
pub const CAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no observation times requested")]
    EmptyObservationTimes,
    #[error("observation times must be finite, non-negative and strictly increasing (index {index})")]
    BadObservationTimes { index: usize },
    #[error("state does not live on the particle grid of the configuration")]
    GridMismatch,
    #[error("integration unstable at t = {time}: particle {index} has mass {mass} (cap {cap})")]
    Unstable {
        time: f64,
        index: usize,
        mass: f64,
        cap: f64,
    },
    #[error("radius of an empty measure is undefined")]
    EmptyMeasure,
    #[error("invalid quantile configuration: {0}")]
    InvalidQuantile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How the colony radius is read off a particle state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    /// Mass fraction enclosed by the radius.
    pub level: f64,
    /// Use the Laplace-smoothed CDF instead of the raw discrete quantile.
    pub regularize: bool,
    /// Laplace scale in mm (only read when `regularize` is set).
    pub epsilon: f64,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self {
            level: 0.95,
            regularize: false,
            epsilon: 0.01,
        }
    }
}

impl QuantileConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(SolverError::InvalidQuantile(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.regularize && !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(SolverError::InvalidQuantile(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Particle states and colony radii at the requested observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteMeasure>,
    pub radii: Vec<f64>,
}

impl Trajectory {
    pub fn total_masses(&self) -> Vec<f64> {
        self.states.iter().map(DiscreteMeasure::tv_norm).collect()
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.radii.iter().map(|r| 2.0 * r).collect()
    }
}

/// Banded interaction matrix `L(x_i, x_j)` on a fixed grid.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    row_start: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl InteractionMatrix {
    pub fn new(grid: &[f64], alpha: f64, sigma_k: f64) -> Self {
        let mut row_start = Vec::with_capacity(grid.len());
        let mut offsets = Vec::with_capacity(grid.len() + 1);
        let mut values = Vec::new();
        offsets.push(0);
        for &xi in grid {
            let lo = grid.partition_point(|&xj| xj <= xi - sigma_k);
            let hi = grid.partition_point(|&xj| xj < xi + sigma_k);
            row_start.push(lo);
            values.extend(
                grid[lo..hi]
                    .iter()
                    .map(|&xj| model::kernel_l_unchecked(xi, xj, alpha, sigma_k)),
            );
            offsets.push(values.len());
        }
        Self {
            row_start,
            offsets,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.row_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_start.is_empty()
    }

    /// Stored entries of row `i` and the column index of the first one.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.row_start[i], &self.values[self.offsets[i]..self.offsets[i + 1]])
    }

    /// `out_i = sum_j L_ij m_j`, summed in ascending `j`.
    pub fn apply(&self, masses: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (start, row) = self.row(i);
            *o = row
                .iter()
                .zip(&masses[start..start + row.len()])
                .map(|(l, m)| l * m)
                .sum();
        }
    }
}

/// The mass ODE system for one parameter vector.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    grid: Vec<f64>,
    caps: Vec<f64>,
    kernel: InteractionMatrix,
}

impl ParticleSystem {
    pub fn new(params: &ModelParams, cfg: &DiscretizationConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let (alpha, sigma_k) = (params.alpha(), params.sigma_k());
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                value: alpha,
            }
            .into());
        }
        if !(sigma_k.is_finite() && sigma_k > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "sigma_k",
                value: sigma_k,
            }
            .into());
        }
        let grid = cfg.grid();
        let kernel = InteractionMatrix::new(&grid, alpha, sigma_k);
        Ok(Self {
            caps: cfg.caps(),
            grid,
            kernel,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn kernel(&self) -> &InteractionMatrix {
        &self.kernel
    }

    pub fn rates(&self, masses: &[f64], out: &mut [f64]) {
        self.kernel.apply(masses, out);
        for ((o, cap), m) in out.iter_mut().zip(&self.caps).zip(masses) {
            *o *= cap - m;
        }
    }

    fn check_grid(&self, state: &DiscreteMeasure) -> Result<(), SolverError> {
        let ok = state.len() == self.grid.len()
            && state
                .locations()
                .iter()
                .zip(&self.grid)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * b);
        if ok {
            Ok(())
        } else {
            Err(SolverError::GridMismatch)
        }
    }
}

/// Mass rates of a state on the canonical grid.
pub fn rhs(
    state: &DiscreteMeasure,
    params: &ModelParams,
    cfg: &DiscretizationConfig,
) -> Result<Vec<f64>, SolverError> {
    let system = ParticleSystem::new(params, cfg)?;
    system.check_grid(state)?;
    let mut out = vec![0.0; state.len()];
    system.rates(state.masses(), &mut out);
    Ok(out)
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
        }
    }

    fn step(&mut self, system: &ParticleSystem, m: &mut [f64], dt: f64) {
        let half = 0.5 * dt;
        system.rates(m, &mut self.k1);
        for ((s, x), k) in self.stage.iter_mut().zip(m.iter()).zip(&self.k1) {
            *s = x + half * k;
        }
        system.rates(&self.stage, &mut self.k2);
        for ((s, x), k) in self.stage.iter_mut().zip(m.iter()).zip(&self.k2) {
            *s = x + half * k;
        }
        system.rates(&self.stage, &mut self.k3);
        for ((s, x), k) in self.stage.iter_mut().zip(m.iter()).zip(&self.k3) {
            *s = x + dt * k;
        }
        system.rates(&self.stage, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, x) in m.iter_mut().enumerate() {
            *x += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn enforce_bounds(masses: &mut [f64], caps: &[f64], time: f64) -> Result<(), SolverError> {
    let tv: f64 = masses.iter().map(|m| m.abs()).sum();
    let floor = -NEGATIVE_MASS_TOLERANCE * tv;
    for (index, (m, &cap)) in masses.iter_mut().zip(caps).enumerate() {
        let unstable = !m.is_finite() || *m < floor || *m > cap * (1.0 + CAP_TOLERANCE);
        if unstable {
            return Err(SolverError::Unstable {
                time,
                index,
                mass: *m,
                cap,
            });
        }
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    Ok(())
}

fn validate_times(obs_times: &[f64]) -> Result<(), SolverError> {
    if obs_times.is_empty() {
        return Err(SolverError::EmptyObservationTimes);
    }
    for (index, &t) in obs_times.iter().enumerate() {
        let increasing = index == 0 || t > obs_times[index - 1];
        if !(t.is_finite() && t >= 0.0 && increasing) {
            return Err(SolverError::BadObservationTimes { index });
        }
    }
    Ok(())
}

/// Integrates with classical fixed-step RK4 from `t = 0`, landing exactly on
/// every observation time (the last substep before a landing is shortened).
pub fn integrate(
    initial: &DiscreteMeasure,
    params: &ModelParams,
    cfg: &DiscretizationConfig,
    obs_times: &[f64],
    qcfg: &QuantileConfig,
) -> Result<Trajectory, SolverError> {
    validate_times(obs_times)?;
    qcfg.validate()?;
    let system = ParticleSystem::new(params, cfg)?;
    system.check_grid(initial)?;

    let h = cfg.time_step;
    let mut masses = initial.masses().to_vec();
    let mut work = Rk4Workspace::new(masses.len());
    let mut t = 0.0;
    let mut states = Vec::with_capacity(obs_times.len());
    let mut radii = Vec::with_capacity(obs_times.len());

    for &target in obs_times {
        let span = target - t;
        if span > 0.0 {
            let steps = ((span / h) - 1e-9).ceil().max(1.0) as usize;
            for k in 0..steps {
                let dt = if k + 1 == steps {
                    span - (steps - 1) as f64 * h
                } else {
                    h
                };
                work.step(&system, &mut masses, dt);
                let now = if k + 1 == steps { target } else { t + (k + 1) as f64 * h };
                enforce_bounds(&mut masses, &system.caps, now)?;
            }
        }
        t = target;
        let state = DiscreteMeasure::from_trusted(system.grid.clone(), masses.clone());
        radii.push(radius(&state, qcfg)?);
        states.push(state);
    }

    Ok(Trajectory {
        times: obs_times.to_vec(),
        states,
        radii,
    })
}

/// Initial masses from `params` followed by [`integrate`].
pub fn simulate(
    params: &ModelParams,
    cfg: &DiscretizationConfig,
    qcfg: &QuantileConfig,
    obs_times: &[f64],
) -> Result<Trajectory, SolverError> {
    let initial = model::initial_masses(params, cfg)?;
    integrate(&initial, params, cfg, obs_times, qcfg)
}

/// Colony radius: the smallest location whose cumulative mass strictly
/// exceeds `level * TV`, or the root of the Laplace-regularized CDF.
pub fn radius(state: &DiscreteMeasure, qcfg: &QuantileConfig) -> Result<f64, SolverError> {
    let total = state.tv_norm();
    if !(total > 0.0) {
        return Err(SolverError::EmptyMeasure);
    }
    if qcfg.regularize {
        return Ok(regularized_radius(state, qcfg.level, qcfg.epsilon));
    }
    let threshold = qcfg.level * total;
    let mut cumulative = 0.0;
    for (x, m) in state.atoms() {
        cumulative += m;
        if cumulative > threshold {
            return Ok(x);
        }
    }
    // Rounding can leave the running sum a hair below level * TV only when
    // level is within an ulp of one; the last atom is the answer then.
    Ok(*state.locations().last().expect("non-empty measure"))
}

/// CDF of the state convolved with the Laplace density
/// `exp(-|y| / eps) / (2 eps)`, normalised by total mass.
pub fn regularized_cdf(x: f64, state: &DiscreteMeasure, epsilon: f64) -> f64 {
    let total = state.tv_norm();
    if !(total > 0.0) {
        return 0.0;
    }
    let acc: f64 = state
        .atoms()
        .map(|(a, m)| {
            let z = (x - a) / epsilon;
            let cdf = if z < 0.0 {
                0.5 * z.exp()
            } else {
                1.0 - 0.5 * (-z).exp()
            };
            m * cdf
        })
        .sum();
    (acc / total).clamp(0.0, 1.0)
}

fn regularized_radius(state: &DiscreteMeasure, level: f64, epsilon: f64) -> f64 {
    let locs = state.locations();
    // Beyond 50 scales from the hull the CDF is within e^-50 of 0 or 1.
    let mut lo = locs[0] - 50.0 * epsilon;
    let mut hi = locs[locs.len() - 1] + 50.0 * epsilon;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_cdf(mid, state, epsilon) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
