//! Closed-form ingredients of the radial non-local proliferation model:
//! the interaction kernel, the mollified initial colony and the particle grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::DiscreteMeasure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("kernel evaluated at a singular point (R = {big_r}, r = {r}); both radii must be positive")]
    SingularKernel { big_r: f64, r: f64 },
    #[error("invalid model parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("initial colony support {support} mm is not inside the domain radius {r_max} mm")]
    TruncatedSupport { support: f64, r_max: f64 },
}

/// Model parameters stored on the log scale:
/// proliferation rate `alpha` (1/day), kernel radius `sigma_k` (mm),
/// observation noise `sigma_o` (SD of log-radius) and initial colony radius
/// `sigma_i` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub log_alpha: f64,
    pub log_sigma_k: f64,
    pub log_sigma_o: f64,
    pub log_sigma_i: f64,
}

pub const PARAM_NAMES: [&str; 4] = ["log_alpha", "log_sigma_k", "log_sigma_o", "log_sigma_i"];

impl ModelParams {
    pub fn from_natural(
        alpha: f64,
        sigma_k: f64,
        sigma_o: f64,
        sigma_i: f64,
    ) -> Result<Self, ModelError> {
        for (name, value) in [
            ("alpha", alpha),
            ("sigma_k", sigma_k),
            ("sigma_o", sigma_o),
            ("sigma_i", sigma_i),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(Self {
            log_alpha: alpha.ln(),
            log_sigma_k: sigma_k.ln(),
            log_sigma_o: sigma_o.ln(),
            log_sigma_i: sigma_i.ln(),
        })
    }

    pub fn from_log_array(values: [f64; 4]) -> Self {
        Self {
            log_alpha: values[0],
            log_sigma_k: values[1],
            log_sigma_o: values[2],
            log_sigma_i: values[3],
        }
    }

    pub fn to_log_array(self) -> [f64; 4] {
        [self.log_alpha, self.log_sigma_k, self.log_sigma_o, self.log_sigma_i]
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn sigma_k(&self) -> f64 {
        self.log_sigma_k.exp()
    }

    pub fn sigma_o(&self) -> f64 {
        self.log_sigma_o.exp()
    }

    pub fn sigma_i(&self) -> f64 {
        self.log_sigma_i.exp()
    }

    /// All four natural-scale values are finite and positive.
    pub fn is_valid(&self) -> bool {
        [self.alpha(), self.sigma_k(), self.sigma_o(), self.sigma_i()]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Particle grid and time-stepping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub n_particles: usize,
    /// Domain radius `R0` in mm; particles sit at `x_i = i R0 / N`.
    pub r_max: f64,
    pub q_exponent: u32,
    /// Ratio between the mollified edge of the initial colony and `sigma_i`.
    pub sigma_tilde_ratio: f64,
    /// RK4 step in days.
    pub time_step: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            r_max: 3.0,
            q_exponent: 13,
            sigma_tilde_ratio: 1.065,
            time_step: 0.01,
        }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidDiscretization(msg));
        if self.n_particles < 2 {
            return bad(format!("n_particles must be at least 2, got {}", self.n_particles));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return bad(format!("r_max must be positive, got {}", self.r_max));
        }
        if self.q_exponent == 0 {
            return bad("q_exponent must be positive".into());
        }
        if !(self.sigma_tilde_ratio.is_finite() && self.sigma_tilde_ratio > 0.0) {
            return bad(format!(
                "sigma_tilde_ratio must be positive, got {}",
                self.sigma_tilde_ratio
            ));
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return bad(format!("time_step must be positive, got {}", self.time_step));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        self.r_max / self.n_particles as f64
    }

    /// `x_i = (i / N) R0` for `i = 1..=N`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_particles as f64;
        (1..=self.n_particles)
            .map(|i| i as f64 / n * self.r_max)
            .collect()
    }

    /// Per-particle carrying capacity `4 pi x_i^2 R0 / N`.
    pub fn caps(&self) -> Vec<f64> {
        let h = self.cell_width();
        self.grid().iter().map(|x| 4.0 * PI * x * x * h).collect()
    }
}

/// Radial interaction kernel
/// `L(R, r) = 3 alpha / (16 pi s^3) * (min((R+r)^2, s^2) - min((R-r)^2, s^2)) / (R r)`
/// with `s = sigma_k`.
pub fn kernel_l(big_r: f64, r: f64, alpha: f64, sigma_k: f64) -> Result<f64, ModelError> {
    if !(big_r > 0.0 && r > 0.0) {
        return Err(ModelError::SingularKernel { big_r, r });
    }
    Ok(kernel_l_unchecked(big_r, r, alpha, sigma_k))
}

#[inline]
pub(crate) fn kernel_l_unchecked(big_r: f64, r: f64, alpha: f64, sigma_k: f64) -> f64 {
    let s2 = sigma_k * sigma_k;
    let sum = big_r + r;
    let diff = big_r - r;
    // When R + r <= s both terms are unsaturated and the bracket is 4 R r.
    if sum <= sigma_k {
        return 3.0 * alpha / (4.0 * PI * s2 * sigma_k);
    }
    let upper = s2.min(sum * sum);
    let lower = s2.min(diff * diff);
    3.0 * alpha / (16.0 * PI * s2 * sigma_k) * (upper - lower) / (big_r * r)
}

/// Normalised ball kernel profile in three dimensions.
pub fn cartesian_kernel(distance: f64, sigma_k: f64) -> f64 {
    if distance <= sigma_k {
        3.0 / (4.0 * PI * sigma_k.powi(3))
    } else {
        0.0
    }
}

fn sigma_tilde(sigma_i: f64, cfg: &DiscretizationConfig) -> f64 {
    cfg.sigma_tilde_ratio * sigma_i
}

/// Radial initial density `4 pi r^2 (1 - (r / st)^q)` on `[0, st]`,
/// `st = sigma_tilde_ratio * sigma_i`.
pub fn initial_density(r: f64, sigma_i: f64, cfg: &DiscretizationConfig) -> f64 {
    let st = sigma_tilde(sigma_i, cfg);
    if !(0.0..=st).contains(&r) {
        return 0.0;
    }
    4.0 * PI * r * r * (1.0 - (r / st).powi(cfg.q_exponent as i32))
}

/// Antiderivative of [`initial_density`] from 0, saturating at the edge.
fn initial_cumulative(r: f64, st: f64, q: u32) -> f64 {
    let r = r.clamp(0.0, st);
    let r3 = r * r * r;
    4.0 * PI * (r3 / 3.0 - r3 * (r / st).powi(q as i32) / (q as f64 + 3.0))
}

/// `4 pi st^3 q / (3 (q + 3))`.
pub fn initial_total_mass(sigma_i: f64, cfg: &DiscretizationConfig) -> f64 {
    let st = sigma_tilde(sigma_i, cfg);
    let q = cfg.q_exponent as f64;
    4.0 * PI * st.powi(3) * q / (3.0 * (q + 3.0))
}

/// Cell-integrated initial masses `m_i(0) = int_{x_{i-1}}^{x_i} p(r, 0) dr`
/// placed at the right end of each cell.
pub fn initial_masses(
    params: &ModelParams,
    cfg: &DiscretizationConfig,
) -> Result<DiscreteMeasure, ModelError> {
    cfg.validate()?;
    let sigma_i = params.sigma_i();
    if !(sigma_i.is_finite() && sigma_i > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "sigma_i",
            value: sigma_i,
        });
    }
    let st = sigma_tilde(sigma_i, cfg);
    if st >= cfg.r_max {
        return Err(ModelError::TruncatedSupport {
            support: st,
            r_max: cfg.r_max,
        });
    }
    let grid = cfg.grid();
    let mut previous = 0.0;
    let masses = grid
        .iter()
        .map(|&x| {
            let current = initial_cumulative(x, st, cfg.q_exponent);
            let m = (current - previous).max(0.0);
            previous = current;
            m
        })
        .collect();
    Ok(DiscreteMeasure::from_trusted(grid, masses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(n: usize, r_max: f64) -> DiscretizationConfig {
        DiscretizationConfig {
            n_particles: n,
            r_max,
            ..Default::default()
        }
    }

    #[test]
    fn kernel_regimes() {
        let core = kernel_l(0.1, 0.2, 1.0, 1.0).unwrap();
        assert_relative_eq!(core, 3.0 / (4.0 * PI), max_relative = 1e-14);
        assert_eq!(kernel_l(2.0, 0.5, 1.0, 1.0).unwrap(), 0.0);
        let mid = kernel_l(0.6, 0.6, 1.0, 1.0).unwrap();
        assert_relative_eq!(mid, 3.0 / (16.0 * PI) / 0.36, max_relative = 1e-14);
        assert_relative_eq!(mid, 0.165786, epsilon = 1e-6);
    }

    #[test]
    fn kernel_rejects_origin() {
        assert!(kernel_l(0.0, 0.5, 1.0, 1.0).is_err());
        assert!(kernel_l(0.5, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_symmetric_and_linear_in_alpha() {
        for &(a, b, s) in &[(0.3, 0.45, 0.2), (1.0, 1.05, 0.1), (0.01, 0.02, 0.5)] {
            let l1 = kernel_l(a, b, 1.3, s).unwrap();
            assert_relative_eq!(l1, kernel_l(b, a, 1.3, s).unwrap(), max_relative = 1e-14);
            assert_relative_eq!(2.0 * l1, kernel_l(a, b, 2.6, s).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn cartesian_kernel_examples() {
        assert_relative_eq!(cartesian_kernel(0.0, 1.0), 0.238732414637843, epsilon = 1e-12);
        assert_eq!(cartesian_kernel(1.5, 1.0), 0.0);
    }

    #[test]
    fn initial_density_edges() {
        let c = DiscretizationConfig::default();
        let st = 1.065 * 0.4;
        assert_eq!(initial_density(st, 0.4, &c), 0.0);
        assert_eq!(initial_density(0.0, 0.4, &c), 0.0);
        assert_eq!(initial_density(st * 1.01, 0.4, &c), 0.0);
        assert!(initial_density(0.2, 0.4, &c) > 0.0);
    }

    #[test]
    fn total_initial_mass_closed_form() {
        let c = DiscretizationConfig {
            sigma_tilde_ratio: 1.0,
            ..Default::default()
        };
        assert_relative_eq!(initial_total_mass(1.0, &c), 52.0 * PI / 48.0, max_relative = 1e-14);
        assert_relative_eq!(initial_total_mass(1.0, &c), 3.403392, epsilon = 1e-6);
    }

    #[test]
    fn initial_masses_sum_and_support() {
        let c = cfg(200, 3.0);
        let p = ModelParams::from_natural(1.0, 0.1, 0.1, 0.5).unwrap();
        let m = initial_masses(&p, &c).unwrap();
        assert_relative_eq!(m.tv_norm(), initial_total_mass(0.5, &c), max_relative = 1e-13);
        let st = 1.065 * 0.5;
        for (i, (x, mass)) in m.atoms().enumerate() {
            if i > 0 && m.locations()[i - 1] >= st {
                assert_eq!(mass, 0.0, "cell ending at {x} lies beyond the colony");
            }
        }
    }

    #[test]
    fn initial_masses_additive_under_refinement() {
        let p = ModelParams::from_natural(1.0, 0.1, 0.1, 0.37).unwrap();
        let coarse = initial_masses(&p, &cfg(50, 2.0)).unwrap();
        let fine = initial_masses(&p, &cfg(100, 2.0)).unwrap();
        for i in 0..50 {
            let sum = fine.masses()[2 * i] + fine.masses()[2 * i + 1];
            assert_relative_eq!(coarse.masses()[i], sum, epsilon = 1e-13);
        }
    }

    #[test]
    fn truncated_support_is_rejected() {
        let p = ModelParams::from_natural(1.0, 0.1, 0.1, 1.0).unwrap();
        assert!(matches!(
            initial_masses(&p, &cfg(10, 1.0)),
            Err(ModelError::TruncatedSupport { .. })
        ));
    }

    #[test]
    fn grid_and_caps() {
        let c = cfg(4, 2.0);
        assert_eq!(c.grid(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_relative_eq!(c.caps()[1], 4.0 * PI * 0.5);
        assert!(cfg(1, 1.0).validate().is_err());
    }
}
