use std::f64::consts::PI;

use approx::assert_relative_eq;
use spheroid_core::measures::{flat_distance, DiscreteMeasure};
use spheroid_core::model::{self, DiscretizationConfig, ModelError, ModelParams};
use spheroid_core::solver::{self, QuantileConfig, SolverError};

fn theta() -> ModelParams {
    ModelParams::from_natural(1.0, 0.2, 0.1, 0.5).unwrap()
}

fn cfg(n: usize, r_max: f64) -> DiscretizationConfig {
    DiscretizationConfig {
        n_particles: n,
        r_max,
        ..Default::default()
    }
}

/// `int_0^inf L(R, r) 4 pi r^2 dr` is the kernel mass `alpha`, since `L` is
/// the spherical average of `alpha K`.
#[test]
fn kernel_spherical_average_conserves_mass() {
    for &(big_r, alpha, sigma_k) in &[(0.05, 1.0, 0.2), (0.5, 2.5, 0.2), (1.3, 0.7, 0.4), (2.0, 1.0, 0.05)] {
        let upper: f64 = big_r + sigma_k;
        let n = 400_000;
        let h = upper / n as f64;
        let integral: f64 = (0..n)
            .map(|k| {
                let r = (k as f64 + 0.5) * h;
                model::kernel_l(big_r, r, alpha, sigma_k).unwrap() * 4.0 * PI * r * r * h
            })
            .sum();
        assert_relative_eq!(integral, alpha, max_relative = 1e-6);
    }
}

#[test]
fn kernel_is_symmetric_and_nonnegative() {
    for &(a, b) in &[(0.1, 0.15), (0.3, 0.01), (1.0, 1.2), (2.0, 0.5)] {
        let lab = model::kernel_l(a, b, 1.3, 0.25).unwrap();
        let lba = model::kernel_l(b, a, 1.3, 0.25).unwrap();
        assert!(lab >= 0.0);
        assert_relative_eq!(lab, lba, max_relative = 1e-14);
    }
    assert!(matches!(
        model::kernel_l(0.0, 1.0, 1.0, 0.1),
        Err(ModelError::SingularKernel { .. })
    ));
}

#[test]
fn initial_masses_integrate_the_colony_profile() {
    let params = theta();
    let c = cfg(400, 2.0);
    let m0 = model::initial_masses(&params, &c).unwrap();
    assert_relative_eq!(m0.tv_norm(), model::initial_total_mass(params.sigma_i(), &c), max_relative = 1e-12);
    // Midpoint quadrature of the density as an independent check.
    let st = 1.065 * params.sigma_i();
    let n = 200_000;
    let h = st / n as f64;
    let quad: f64 = (0..n)
        .map(|k| model::initial_density((k as f64 + 0.5) * h, params.sigma_i(), &c) * h)
        .sum();
    assert_relative_eq!(m0.tv_norm(), quad, max_relative = 1e-8);
}

/// The 95% mass quantile of `r^2 (1 - (r / st)^13)` solved by bisection on
/// its antiderivative; the discrete radius lands within one cell of it.
#[test]
fn initial_radius_matches_profile_quantile() {
    let params = theta();
    let c = cfg(200, 2.0);
    let st = 1.065 * params.sigma_i();
    let cum = |r: f64| r.powi(3) / 3.0 - r.powi(16) / (16.0 * st.powi(13));
    let target = 0.95 * cum(st);
    let (mut lo, mut hi) = (0.0, st);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cum(mid) < target {
            lo = mid
        } else {
            hi = mid
        }
    }
    let traj = solver::simulate(&params, &c, &QuantileConfig::default(), &[0.0]).unwrap();
    assert!((traj.radii[0] - lo).abs() <= c.cell_width(), "{} vs {lo}", traj.radii[0]);
}

#[test]
fn time_step_refinement_converges() {
    let params = theta();
    let times = [1.0, 2.0, 3.0];
    let run = |h: f64| {
        let c = DiscretizationConfig {
            time_step: h,
            ..cfg(100, 2.0)
        };
        solver::simulate(&params, &c, &QuantileConfig::default(), &times).unwrap()
    };
    let reference = run(0.001);
    let coarse = run(0.1);
    let fine = run(0.05);
    for j in 0..times.len() {
        let e_coarse = flat_distance(&coarse.states[j], &reference.states[j]);
        let e_fine = flat_distance(&fine.states[j], &reference.states[j]);
        assert!(e_fine < e_coarse / 8.0, "time {}: {e_coarse} -> {e_fine}", times[j]);
        assert!(e_fine < 1e-6);
    }
}

#[test]
fn radius_and_mass_grow_monotonically() {
    let params = theta();
    let c = cfg(150, 3.0);
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
    let traj = solver::simulate(&params, &c, &QuantileConfig::default(), &times).unwrap();
    for w in traj.radii.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let masses = traj.total_masses();
    for w in masses.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!(traj.radii.last().unwrap() > &traj.radii[0]);
}

/// `dm_i/dt <= cap_i sum_j L_ij m_j`, so the total mass grows at most like
/// `exp(lambda t)` with `lambda` the largest column sum of `cap_i L_ij`.
#[test]
fn total_mass_respects_exponential_bound() {
    let params = theta();
    let c = cfg(150, 3.0);
    let grid = c.grid();
    let caps = c.caps();
    let lambda = grid
        .iter()
        .map(|&r| {
            grid.iter()
                .zip(&caps)
                .map(|(&x, cap)| cap * model::kernel_l(x, r, params.alpha(), params.sigma_k()).unwrap())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    assert!(lambda < 1.5 * params.alpha());
    let times = [0.5, 1.0, 2.0, 4.0];
    let traj = solver::simulate(&params, &c, &QuantileConfig::default(), &times).unwrap();
    let tv0 = model::initial_masses(&params, &c).unwrap().tv_norm();
    for (t, tv) in times.iter().zip(traj.total_masses()) {
        assert!(tv <= tv0 * (lambda * t).exp() * (1.0 + 1e-9));
    }
}

#[test]
fn states_stay_within_caps() {
    let params = ModelParams::from_natural(3.0, 0.3, 0.1, 0.5).unwrap();
    let c = cfg(120, 3.0);
    let caps = c.caps();
    let traj = solver::simulate(&params, &c, &QuantileConfig::default(), &[1.0, 5.0, 10.0]).unwrap();
    for state in &traj.states {
        for (m, cap) in state.masses().iter().zip(&caps) {
            assert!(*m >= 0.0 && *m <= cap * (1.0 + 1e-9));
        }
    }
}

#[test]
fn integrate_rejects_bad_inputs() {
    let params = theta();
    let c = cfg(50, 2.0);
    let q = QuantileConfig::default();
    let m0 = model::initial_masses(&params, &c).unwrap();
    assert!(matches!(
        solver::integrate(&m0, &params, &c, &[], &q),
        Err(SolverError::EmptyObservationTimes)
    ));
    assert!(matches!(
        solver::integrate(&m0, &params, &c, &[1.0, 0.5], &q),
        Err(SolverError::BadObservationTimes { index: 1 })
    ));
    let other = DiscreteMeasure::new(&[(0.5, 1.0)]).unwrap();
    assert!(matches!(
        solver::integrate(&other, &params, &c, &[1.0], &q),
        Err(SolverError::GridMismatch)
    ));
    let big = ModelParams::from_natural(1.0, 0.2, 0.1, 5.0).unwrap();
    assert!(solver::simulate(&big, &c, &q, &[1.0]).is_err());
}

#[test]
fn regularized_radius_approaches_raw_radius() {
    let params = theta();
    let c = cfg(200, 2.0);
    let traj = solver::simulate(&params, &c, &QuantileConfig::default(), &[0.0, 2.0, 4.0]).unwrap();
    for eps in [0.05, 0.01, 0.001] {
        let q = QuantileConfig {
            regularize: true,
            epsilon: eps,
            ..Default::default()
        };
        for (state, raw) in traj.states.iter().zip(&traj.radii) {
            let reg = solver::radius(state, &q).unwrap();
            assert!((solver::regularized_cdf(reg, state, eps) - 0.95).abs() < 1e-9);
            assert!((reg - raw).abs() <= c.cell_width() + 5.0 * eps);
        }
    }
}
