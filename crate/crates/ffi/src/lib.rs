//! C ABI over `spheroid-core`.
//!
//! Every function returns a [`SpheroidStatus`]; results go through out
//! pointers. Objects are opaque handles created by `*_new`/`*_load`/`*_run`
//! functions and released with the matching `*_free`. When a call fails, a
//! message is stored per thread and can be read with
//! [`spheroid_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spheroid_core::data::{self, LoadOptions};
use spheroid_core::inference::{self, PriorSpec, SamplerSettings};
use spheroid_core::measures::{self, SignedAtomList, WeightExponent};
use spheroid_core::model::{self, DiscretizationConfig, ModelParams};
use spheroid_core::solver::{self, QuantileConfig};
use spheroid_core::{CellLine, Chain, Dataset, DiscreteMeasure, Observation, TimeWindow, Trajectory, ValueUnit};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpheroidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Solver = 4,
    Inference = 5,
    Data = 6,
    Panic = 7,
}

/// Model parameters on the natural scale.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpheroidParams {
    pub alpha: f64,
    pub sigma_k: f64,
    pub sigma_o: f64,
    pub sigma_i: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpheroidDiscretization {
    pub n_particles: usize,
    pub r_max: f64,
    pub q_exponent: u32,
    pub sigma_tilde_ratio: f64,
    pub time_step: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpheroidQuantile {
    pub level: f64,
    pub regularize: bool,
    pub epsilon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpheroidSamplerSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub initial_step_size: f64,
    pub target_acceptance: f64,
}

/// Log-normal prior: location and scale of each log-parameter, in the order
/// alpha, sigma_k, sigma_o, sigma_i.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpheroidPrior {
    pub location: [f64; 4],
    pub scale: [f64; 4],
}

/// Opaque non-negative discrete measure.
pub struct SpheroidMeasure(DiscreteMeasure);
/// Opaque forward-model trajectory.
pub struct SpheroidTrajectory(Trajectory);
/// Opaque radius time series.
pub struct SpheroidDataset(Dataset);
/// Opaque Markov chain.
pub struct SpheroidChain(Chain);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult = Result<(), (SpheroidStatus, String)>;

fn guard<F: FnOnce() -> FfiResult>(f: F) -> SpheroidStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpheroidStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpheroidStatus::Panic
        }
    }
}

fn fail<T>(status: SpheroidStatus, msg: impl ToString) -> Result<T, (SpheroidStatus, String)> {
    Err((status, msg.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), (SpheroidStatus, String)> {
    if p.is_null() {
        fail(SpheroidStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (SpheroidStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SpheroidStatus, String)> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SpheroidStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

impl SpheroidParams {
    fn to_core(self) -> Result<ModelParams, (SpheroidStatus, String)> {
        ModelParams::from_natural(self.alpha, self.sigma_k, self.sigma_o, self.sigma_i)
            .or_else(|e| fail(SpheroidStatus::InvalidArgument, e))
    }

    fn from_core(p: &ModelParams) -> Self {
        Self {
            alpha: p.alpha(),
            sigma_k: p.sigma_k(),
            sigma_o: p.sigma_o(),
            sigma_i: p.sigma_i(),
        }
    }
}

impl From<SpheroidDiscretization> for DiscretizationConfig {
    fn from(d: SpheroidDiscretization) -> Self {
        Self {
            n_particles: d.n_particles,
            r_max: d.r_max,
            q_exponent: d.q_exponent,
            sigma_tilde_ratio: d.sigma_tilde_ratio,
            time_step: d.time_step,
        }
    }
}

impl From<SpheroidQuantile> for QuantileConfig {
    fn from(q: SpheroidQuantile) -> Self {
        Self {
            level: q.level,
            regularize: q.regularize,
            epsilon: q.epsilon,
        }
    }
}

impl From<SpheroidSamplerSettings> for SamplerSettings {
    fn from(s: SpheroidSamplerSettings) -> Self {
        Self {
            iterations: s.iterations,
            burn_in: s.burn_in,
            seed: s.seed,
            initial_step_size: s.initial_step_size,
            target_acceptance: s.target_acceptance,
        }
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length, or 0
/// when the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn spheroid_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_discretization_default(out: *mut SpheroidDiscretization) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = DiscretizationConfig::default();
        *out = SpheroidDiscretization {
            n_particles: d.n_particles,
            r_max: d.r_max,
            q_exponent: d.q_exponent,
            sigma_tilde_ratio: d.sigma_tilde_ratio,
            time_step: d.time_step,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_quantile_default(out: *mut SpheroidQuantile) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let q = QuantileConfig::default();
        *out = SpheroidQuantile {
            level: q.level,
            regularize: q.regularize,
            epsilon: q.epsilon,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_sampler_default(out: *mut SpheroidSamplerSettings) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let s = SamplerSettings::default();
        *out = SpheroidSamplerSettings {
            iterations: s.iterations,
            burn_in: s.burn_in,
            seed: s.seed,
            initial_step_size: s.initial_step_size,
            target_acceptance: s.target_acceptance,
        };
        Ok(())
    })
}

/// Built-in prior for "L-5178Y", "V-79" or "B-16".
///
/// # Safety
/// `cell_line` must be a NUL-terminated string, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_builtin_prior(cell_line: *const c_char, out: *mut SpheroidPrior) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = string(cell_line, "cell_line")?;
        let line: CellLine = name.parse().or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        let p = data::builtin_priors(&line).or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        *out = SpheroidPrior {
            location: p.location,
            scale: p.scale,
        };
        Ok(())
    })
}

/// Radial interaction kernel `L(R, r)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_kernel_l(
    big_r: f64,
    r: f64,
    alpha: f64,
    sigma_k: f64,
    out: *mut f64,
) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = model::kernel_l(big_r, r, alpha, sigma_k).or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Flat norm of the signed measure `sum_i weights[i] * delta(locations[i])`.
///
/// # Safety
/// `locations` and `weights` must be valid for `len` reads, `out` for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_flat_norm(
    locations: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let xs = slice(locations, len, "locations")?;
        let ws = slice(weights, len, "weights")?;
        let atoms = SignedAtomList::new(xs.iter().copied().zip(ws.iter().copied()).collect())
            .or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        *out = measures::flat_norm(&atoms);
        Ok(())
    })
}

/// # Safety
/// `locations` and `masses` must be valid for `len` reads, `out` for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_measure_new(
    locations: *const f64,
    masses: *const f64,
    len: usize,
    out: *mut *mut SpheroidMeasure,
) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let xs = slice(locations, len, "locations")?.to_vec();
        let ms = slice(masses, len, "masses")?.to_vec();
        let m = DiscreteMeasure::from_parts(xs, ms).or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SpheroidMeasure(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spheroid_measure_free(m: *mut SpheroidMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_measure_len(m: *const SpheroidMeasure, out: *mut usize) -> SpheroidStatus {
    guard(|| {
        non_null(m, "measure")?;
        non_null(out, "out")?;
        *out = (*m).0.len();
        Ok(())
    })
}

/// Copies up to `len` masses into `buf`.
///
/// # Safety
/// `m` must be a live handle, `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn spheroid_measure_masses(
    m: *const SpheroidMeasure,
    buf: *mut f64,
    len: usize,
) -> SpheroidStatus {
    guard(|| {
        non_null(m, "measure")?;
        let src = (*m).0.masses();
        if len < src.len() {
            return fail(SpheroidStatus::OutOfRange, format!("buffer holds {len}, need {}", src.len()));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Flat distance (`exponent` 0) or weighted flat distance (`exponent` 1 or
/// 2) between two measures.
///
/// # Safety
/// `a` and `b` must be live handles, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_measure_distance(
    a: *const SpheroidMeasure,
    b: *const SpheroidMeasure,
    exponent: u32,
    out: *mut f64,
) -> SpheroidStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        *out = match exponent {
            0 => measures::flat_distance(&(*a).0, &(*b).0),
            e => {
                let w = WeightExponent::try_from(e).or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
                measures::weighted_flat_distance(&(*a).0, &(*b).0, w)
            }
        };
        Ok(())
    })
}

/// Forward run from the initial colony, reporting states and radii at
/// `times`.
///
/// # Safety
/// Struct pointers must be valid for reads, `times` for `n_times` reads and
/// `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_simulate(
    params: *const SpheroidParams,
    disc: *const SpheroidDiscretization,
    quantile: *const SpheroidQuantile,
    times: *const f64,
    n_times: usize,
    out: *mut *mut SpheroidTrajectory,
) -> SpheroidStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(disc, "disc")?;
        non_null(quantile, "quantile")?;
        non_null(out, "out")?;
        let theta = (*params).to_core()?;
        let times = slice(times, n_times, "times")?;
        let traj = solver::simulate(&theta, &(*disc).into(), &(*quantile).into(), times)
            .or_else(|e| fail(SpheroidStatus::Solver, e))?;
        *out = Box::into_raw(Box::new(SpheroidTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spheroid_trajectory_free(t: *mut SpheroidTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of reported times.
///
/// # Safety
/// `t` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_trajectory_len(t: *const SpheroidTrajectory, out: *mut usize) -> SpheroidStatus {
    guard(|| {
        non_null(t, "trajectory")?;
        non_null(out, "out")?;
        *out = (*t).0.times.len();
        Ok(())
    })
}

/// Copies the radii (mm) into `buf`, which must hold at least the
/// trajectory length.
///
/// # Safety
/// `t` must be a live handle, `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn spheroid_trajectory_radii(
    t: *const SpheroidTrajectory,
    buf: *mut f64,
    len: usize,
) -> SpheroidStatus {
    guard(|| {
        non_null(t, "trajectory")?;
        let src = &(*t).0.radii;
        if len < src.len() {
            return fail(SpheroidStatus::OutOfRange, format!("buffer holds {len}, need {}", src.len()));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// New measure handle holding the particle state at `index`.
///
/// # Safety
/// `t` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_trajectory_state(
    t: *const SpheroidTrajectory,
    index: usize,
    out: *mut *mut SpheroidMeasure,
) -> SpheroidStatus {
    guard(|| {
        non_null(t, "trajectory")?;
        non_null(out, "out")?;
        let traj = &*t;
        let state = traj
            .0
            .states
            .get(index)
            .ok_or((SpheroidStatus::OutOfRange, format!("no state at index {index}")))?;
        *out = Box::into_raw(Box::new(SpheroidMeasure(state.clone())));
        Ok(())
    })
}

/// Dataset from radius observations (times strictly increasing, radii
/// positive).
///
/// # Safety
/// `times` and `radii` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_dataset_new(
    times: *const f64,
    radii: *const f64,
    len: usize,
    out: *mut *mut SpheroidDataset,
) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let ts = slice(times, len, "times")?;
        let rs = slice(radii, len, "radii")?;
        let obs = ts
            .iter()
            .zip(rs)
            .map(|(&time, &radius)| Observation { time, radius })
            .collect();
        let ds = Dataset::new(CellLine::Custom("custom".into()), obs, None)
            .or_else(|e| fail(SpheroidStatus::Data, e))?;
        *out = Box::into_raw(Box::new(SpheroidDataset(ds)));
        Ok(())
    })
}

/// Loads a `time_day,value_mm` CSV. `diameter` selects halving of the
/// values; a window is applied when `window_start <= window_end`.
///
/// # Safety
/// `path` and `cell_line` must be NUL-terminated strings, `out` valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_dataset_load(
    path: *const c_char,
    cell_line: *const c_char,
    diameter: bool,
    window_start: f64,
    window_end: f64,
    out: *mut *mut SpheroidDataset,
) -> SpheroidStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = string(path, "path")?;
        let line: CellLine = string(cell_line, "cell_line")?
            .parse()
            .or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        let window = if window_start <= window_end {
            Some(TimeWindow::new(window_start, window_end).or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?)
        } else {
            None
        };
        let opts = LoadOptions {
            unit: if diameter { ValueUnit::Diameter } else { ValueUnit::Radius },
            window,
            cell_line: line,
        };
        let ds = data::load_dataset(path, &opts).or_else(|e| fail(SpheroidStatus::Data, e))?;
        *out = Box::into_raw(Box::new(SpheroidDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spheroid_dataset_free(d: *mut SpheroidDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_dataset_len(d: *const SpheroidDataset, out: *mut usize) -> SpheroidStatus {
    guard(|| {
        non_null(d, "dataset")?;
        non_null(out, "out")?;
        *out = (*d).0.len();
        Ok(())
    })
}

/// Log-normal log-likelihood; `-inf` when the forward model fails at
/// `params`.
///
/// # Safety
/// All pointers must be valid; `dataset` a live handle.
#[no_mangle]
pub unsafe extern "C" fn spheroid_log_likelihood(
    params: *const SpheroidParams,
    dataset: *const SpheroidDataset,
    disc: *const SpheroidDiscretization,
    quantile: *const SpheroidQuantile,
    out: *mut f64,
) -> SpheroidStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(dataset, "dataset")?;
        non_null(disc, "disc")?;
        non_null(quantile, "quantile")?;
        non_null(out, "out")?;
        let theta = (*params).to_core()?;
        *out = inference::log_likelihood(&theta, &(*dataset).0, &(*disc).into(), &(*quantile).into())
            .or_else(|e| fail(SpheroidStatus::Inference, e))?;
        Ok(())
    })
}

/// Runs a Metropolis-Hastings chain. A null `dataset` samples the prior.
///
/// # Safety
/// All non-dataset pointers must be valid; `dataset` null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spheroid_run_chain(
    dataset: *const SpheroidDataset,
    prior: *const SpheroidPrior,
    disc: *const SpheroidDiscretization,
    quantile: *const SpheroidQuantile,
    settings: *const SpheroidSamplerSettings,
    out: *mut *mut SpheroidChain,
) -> SpheroidStatus {
    guard(|| {
        non_null(prior, "prior")?;
        non_null(disc, "disc")?;
        non_null(quantile, "quantile")?;
        non_null(settings, "settings")?;
        non_null(out, "out")?;
        let data = if dataset.is_null() { None } else { Some(&(*dataset).0) };
        let prior = PriorSpec::new((*prior).location, (*prior).scale)
            .or_else(|e| fail(SpheroidStatus::InvalidArgument, e))?;
        let chain = inference::run_chain(data, &prior, &(*disc).into(), &(*quantile).into(), &(*settings).into())
            .or_else(|e| fail(SpheroidStatus::Inference, e))?;
        *out = Box::into_raw(Box::new(SpheroidChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spheroid_chain_free(c: *mut SpheroidChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of retained samples.
///
/// # Safety
/// `c` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_chain_len(c: *const SpheroidChain, out: *mut usize) -> SpheroidStatus {
    guard(|| {
        non_null(c, "chain")?;
        non_null(out, "out")?;
        *out = (*c).0.len();
        Ok(())
    })
}

/// Retained sample `index`: log-parameters, log-posterior and acceptance
/// flag.
///
/// # Safety
/// `c` must be a live handle; `log_params` valid for 4 writes; the other out
/// pointers for one write each.
#[no_mangle]
pub unsafe extern "C" fn spheroid_chain_sample(
    c: *const SpheroidChain,
    index: usize,
    log_params: *mut f64,
    log_posterior: *mut f64,
    accepted: *mut bool,
) -> SpheroidStatus {
    guard(|| {
        non_null(c, "chain")?;
        non_null(log_params, "log_params")?;
        non_null(log_posterior, "log_posterior")?;
        non_null(accepted, "accepted")?;
        let chain = &*c;
        let s = chain
            .0
            .samples
            .get(index)
            .ok_or((SpheroidStatus::OutOfRange, format!("no sample at index {index}")))?;
        ptr::copy_nonoverlapping(s.theta.to_log_array().as_ptr(), log_params, 4);
        *log_posterior = s.log_posterior;
        *accepted = s.accepted;
        Ok(())
    })
}

/// # Safety
/// `c` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_chain_acceptance_rate(c: *const SpheroidChain, out: *mut f64) -> SpheroidStatus {
    guard(|| {
        non_null(c, "chain")?;
        non_null(out, "out")?;
        *out = (*c).0.acceptance_rate();
        Ok(())
    })
}

/// Highest-posterior retained sample, natural scale.
///
/// # Safety
/// `c` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn spheroid_chain_map(c: *const SpheroidChain, out: *mut SpheroidParams) -> SpheroidStatus {
    guard(|| {
        non_null(c, "chain")?;
        non_null(out, "out")?;
        let map = inference::map_estimate(&(*c).0).or_else(|e| fail(SpheroidStatus::Inference, e))?;
        *out = SpheroidParams::from_core(&map);
        Ok(())
    })
}
