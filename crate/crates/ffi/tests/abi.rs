use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use approx::assert_relative_eq;
use spheroid_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { spheroid_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "expected an error message");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn defaults() -> (SpheroidDiscretization, SpheroidQuantile) {
    let mut d = unsafe { std::mem::zeroed::<SpheroidDiscretization>() };
    let mut q = unsafe { std::mem::zeroed::<SpheroidQuantile>() };
    unsafe {
        assert_eq!(spheroid_discretization_default(&mut d), SpheroidStatus::Ok);
        assert_eq!(spheroid_quantile_default(&mut q), SpheroidStatus::Ok);
    }
    d.n_particles = 60;
    d.r_max = 1.5;
    (d, q)
}

const PARAMS: SpheroidParams = SpheroidParams {
    alpha: 0.8,
    sigma_k: 0.1,
    sigma_o: 0.05,
    sigma_i: 0.3,
};

#[test]
fn kernel_matches_core() {
    let mut out = 0.0;
    let status = unsafe { spheroid_kernel_l(0.4, 0.35, 1.2, 0.1, &mut out) };
    assert_eq!(status, SpheroidStatus::Ok);
    let expected = spheroid_core::model::kernel_l(0.4, 0.35, 1.2, 0.1).unwrap();
    assert_eq!(out, expected);
    assert_eq!(unsafe { spheroid_last_error_message(ptr::null_mut(), 0) }, 0);

    let status = unsafe { spheroid_kernel_l(0.0, 0.35, 1.2, 0.1, &mut out) };
    assert_eq!(status, SpheroidStatus::InvalidArgument);
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(spheroid_kernel_l(1.0, 1.0, 1.0, 0.1, ptr::null_mut()), SpheroidStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut n = 0usize;
        assert_eq!(spheroid_measure_len(ptr::null(), &mut n), SpheroidStatus::NullPointer);
        assert_eq!(spheroid_chain_len(ptr::null(), &mut n), SpheroidStatus::NullPointer);
        // Freeing null is a no-op.
        spheroid_measure_free(ptr::null_mut());
        spheroid_trajectory_free(ptr::null_mut());
        spheroid_dataset_free(ptr::null_mut());
        spheroid_chain_free(ptr::null_mut());
    }
}

#[test]
fn error_message_is_truncated_safely() {
    let mut out = 0.0;
    unsafe {
        spheroid_kernel_l(-1.0, 1.0, 1.0, 0.1, &mut out);
        let full = spheroid_last_error_message(ptr::null_mut(), 0);
        let mut small = [1 as c_char; 5];
        assert_eq!(spheroid_last_error_message(small.as_mut_ptr(), small.len()), full);
        assert_eq!(small[4], 0);
    }
}

#[test]
fn flat_norm_and_measure_distance() {
    let loc = [0.0, 0.5, 3.0];
    let w = [1.0, -1.0, 0.25];
    let mut out = 0.0;
    unsafe {
        assert_eq!(spheroid_flat_norm(loc.as_ptr(), w.as_ptr(), 3, &mut out), SpheroidStatus::Ok);
    }
    assert_relative_eq!(out, 0.5 + 0.25, epsilon = 1e-12);

    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(spheroid_measure_new([1.0].as_ptr(), [2.0].as_ptr(), 1, &mut a), SpheroidStatus::Ok);
        assert_eq!(spheroid_measure_new([2.0].as_ptr(), [2.0].as_ptr(), 1, &mut b), SpheroidStatus::Ok);
        let mut d = 0.0;
        assert_eq!(spheroid_measure_distance(a, b, 0, &mut d), SpheroidStatus::Ok);
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);
        assert_eq!(spheroid_measure_distance(a, b, 7, &mut d), SpheroidStatus::InvalidArgument);
        let mut bad = ptr::null_mut();
        assert_ne!(
            spheroid_measure_new([2.0, 1.0].as_ptr(), [1.0, 1.0].as_ptr(), 2, &mut bad),
            SpheroidStatus::Ok
        );
        assert!(bad.is_null());
        spheroid_measure_free(a);
        spheroid_measure_free(b);
    }
}

#[test]
fn simulation_round_trip() {
    let (d, q) = defaults();
    let times = [0.0, 1.0, 2.0];
    let mut traj = ptr::null_mut();
    unsafe {
        assert_eq!(spheroid_simulate(&PARAMS, &d, &q, times.as_ptr(), 3, &mut traj), SpheroidStatus::Ok);
        let mut n = 0;
        spheroid_trajectory_len(traj, &mut n);
        assert_eq!(n, 3);
        let mut radii = [0.0; 3];
        assert_eq!(spheroid_trajectory_radii(traj, radii.as_mut_ptr(), 3), SpheroidStatus::Ok);
        assert_eq!(spheroid_trajectory_radii(traj, radii.as_mut_ptr(), 2), SpheroidStatus::OutOfRange);

        let theta = spheroid_core::ModelParams::from_natural(0.8, 0.1, 0.05, 0.3).unwrap();
        let cfg = spheroid_core::DiscretizationConfig {
            n_particles: 60,
            r_max: 1.5,
            ..Default::default()
        };
        let expected = spheroid_core::solver::simulate(&theta, &cfg, &Default::default(), &times).unwrap();
        assert_eq!(radii.to_vec(), expected.radii);

        let mut state = ptr::null_mut();
        assert_eq!(spheroid_trajectory_state(traj, 2, &mut state), SpheroidStatus::Ok);
        let mut masses = vec![0.0; 60];
        assert_eq!(spheroid_measure_masses(state, masses.as_mut_ptr(), 60), SpheroidStatus::Ok);
        assert_eq!(masses, expected.states[2].masses());
        assert_eq!(spheroid_trajectory_state(traj, 3, &mut state), SpheroidStatus::OutOfRange);
        spheroid_measure_free(state);
        spheroid_trajectory_free(traj);

        let back = [1.0, 0.5];
        assert_eq!(spheroid_simulate(&PARAMS, &d, &q, back.as_ptr(), 2, &mut traj), SpheroidStatus::Solver);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn likelihood_and_chain() {
    let (d, q) = defaults();
    let times = [1.0, 2.0, 3.0];
    let radii = [0.33, 0.36, 0.4];
    let mut ds = ptr::null_mut();
    let mut prior = unsafe { std::mem::zeroed::<SpheroidPrior>() };
    let mut settings = unsafe { std::mem::zeroed::<SpheroidSamplerSettings>() };
    unsafe {
        assert_eq!(spheroid_dataset_new(times.as_ptr(), radii.as_ptr(), 3, &mut ds), SpheroidStatus::Ok);
        let mut ll = 0.0;
        assert_eq!(spheroid_log_likelihood(&PARAMS, ds, &d, &q, &mut ll), SpheroidStatus::Ok);
        assert!(ll.is_finite());

        let name = CString::new("V-79").unwrap();
        assert_eq!(spheroid_builtin_prior(name.as_ptr(), &mut prior), SpheroidStatus::Ok);
        assert_relative_eq!(prior.location[0], 1.04f64.ln(), epsilon = 1e-12);
        assert_eq!(spheroid_sampler_default(&mut settings), SpheroidStatus::Ok);
        assert_eq!(settings.iterations, 450_000);
        settings.iterations = 600;
        settings.burn_in = 100;
        settings.seed = 4;

        let mut chain = ptr::null_mut();
        assert_eq!(spheroid_run_chain(ds, &prior, &d, &q, &settings, &mut chain), SpheroidStatus::Ok);
        let mut n = 0;
        spheroid_chain_len(chain, &mut n);
        assert_eq!(n, 500);
        let mut acc = 0.0;
        spheroid_chain_acceptance_rate(chain, &mut acc);
        assert!((0.0..=1.0).contains(&acc));
        let (mut lp, mut accepted, mut theta) = (0.0, false, [0.0; 4]);
        assert_eq!(spheroid_chain_sample(chain, 0, theta.as_mut_ptr(), &mut lp, &mut accepted), SpheroidStatus::Ok);
        assert!(lp.is_finite());
        assert_eq!(
            spheroid_chain_sample(chain, 500, theta.as_mut_ptr(), &mut lp, &mut accepted),
            SpheroidStatus::OutOfRange
        );
        let mut map = PARAMS;
        assert_eq!(spheroid_chain_map(chain, &mut map), SpheroidStatus::Ok);
        assert!(map.alpha > 0.0 && map.sigma_i > 0.0);
        spheroid_chain_free(chain);

        settings.burn_in = 600;
        let mut none = ptr::null_mut();
        assert_eq!(spheroid_run_chain(ds, &prior, &d, &q, &settings, &mut none), SpheroidStatus::Inference);
        assert!(none.is_null());
        spheroid_dataset_free(ds);
    }
}

#[test]
fn dataset_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    std::fs::write(&path, "time_day,value_mm\n1,0.8\n5,1.2\n9,1.6\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let line = CString::new("B-16").unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(spheroid_dataset_load(p.as_ptr(), line.as_ptr(), true, 2.0, 9.0, &mut ds), SpheroidStatus::Ok);
        let mut n = 0;
        spheroid_dataset_len(ds, &mut n);
        assert_eq!(n, 2);
        spheroid_dataset_free(ds);

        let missing = CString::new(dir.path().join("x.csv").to_str().unwrap()).unwrap();
        assert_eq!(
            spheroid_dataset_load(missing.as_ptr(), line.as_ptr(), true, 1.0, 0.0, &mut ds),
            SpheroidStatus::Data
        );
        assert!(!last_error().is_empty());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/spheroid.h")).unwrap();
    for name in [
        "spheroid_last_error_message",
        "spheroid_simulate",
        "spheroid_run_chain",
        "spheroid_measure_distance",
        "spheroid_dataset_load",
        "typedef struct SpheroidChain SpheroidChain",
        "SPHEROID_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
