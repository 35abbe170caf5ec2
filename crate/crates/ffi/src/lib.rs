//! C ABI over `rydcav`.
//!
//! Objects are opaque heap handles released with the matching `*_free`.
//! Every fallible call returns a [`RydcavStatus`]; on failure the message is
//! kept per thread and read with [`rydcav_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64 as C64;
use rydcav::dynamics::{integrate, IntegrateOptions, Model, Trajectory};
use rydcav::gate::{evaluate, Blockade};
use rydcav::mcwf::{coherent_ladder, ensemble_average, EnsembleResult, McwfOptions};
use rydcav::{Config, Error, PhysicalParams, SingleExcState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RydcavStatus {
    Ok = 0,
    Io = 1,
    Config = 3,
    Numerical = 4,
    NullArgument = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RydcavComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for RydcavComplex {
    fn from(z: C64) -> Self {
        RydcavComplex { re: z.re, im: z.im }
    }
}

/// Opaque parameter set.
pub struct RydcavParams(PhysicalParams);

/// Opaque single-excitation trajectory.
pub struct RydcavTrajectory(Trajectory);

/// Opaque ensemble average.
pub struct RydcavEnsemble(EnsembleResult);

/// Opaque list of qubit-ensemble Förster couplings.
pub struct RydcavBlockade(Blockade);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: RydcavStatus, msg: String) -> RydcavStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> RydcavStatus {
    let status = match e.exit_code() {
        1 => RydcavStatus::Io,
        3 => RydcavStatus::Config,
        _ => RydcavStatus::Numerical,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics to [`RydcavStatus::Panic`].
fn guard(f: impl FnOnce() -> RydcavStatus) -> RydcavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == RydcavStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => fail(RydcavStatus::Panic, "internal panic".into()),
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(RydcavStatus::NullArgument, format!("{} is null", stringify!($p)));
        })+
    };
}

fn boxed<T>(out: *mut *mut T, value: T) -> RydcavStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RydcavStatus::Ok
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rydcav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rydcav_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses parameters from config text (frequencies in MHz).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_params_from_config(text: *const c_char, out: *mut *mut RydcavParams) -> RydcavStatus {
    guard(|| {
        non_null!(text, out);
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(RydcavStatus::InvalidUtf8, "config text is not UTF-8".into());
        };
        match Config::parse(text).and_then(|c| PhysicalParams::from_config(&c)) {
            Ok(p) => boxed(out, RydcavParams(p)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `p` must be null or a handle from [`rydcav_params_from_config`], freed once.
#[no_mangle]
pub unsafe extern "C" fn rydcav_params_free(p: *mut RydcavParams) {
    free(p);
}

/// Collective coupling in rad/us.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_params_g_collective(p: *const RydcavParams, out: *mut f64) -> RydcavStatus {
    guard(|| {
        non_null!(p, out);
        *out = (*p).0.g_collective;
        RydcavStatus::Ok
    })
}

/// Integrates from a loaded cavity photon. `adiabatic` selects the eliminated model.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_integrate(
    p: *const RydcavParams,
    adiabatic: bool,
    t_end: f64,
    dt: f64,
    stride: usize,
    out: *mut *mut RydcavTrajectory,
) -> RydcavStatus {
    guard(|| {
        non_null!(p, out);
        let model = if adiabatic { Model::Adiabatic } else { Model::Full };
        let opts = IntegrateOptions::new(t_end, dt).with_stride(stride);
        match integrate(SingleExcState::photon_loaded(), &(*p).0, opts, model) {
            Ok(t) => boxed(out, RydcavTrajectory(t)),
            Err(e) => from_error(e),
        }
    })
}

/// Number of samples in a trajectory.
///
/// # Safety
/// `t` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn rydcav_trajectory_len(t: *const RydcavTrajectory) -> usize {
    if t.is_null() {
        return 0;
    }
    (*t).0.len()
}

/// Copies times and the three populations. Any output pointer may be null;
/// non-null ones must hold [`rydcav_trajectory_len`] values.
///
/// # Safety
/// As above.
#[no_mangle]
pub unsafe extern "C" fn rydcav_trajectory_copy(
    t: *const RydcavTrajectory,
    times: *mut f64,
    pop_b: *mut f64,
    pop_e: *mut f64,
    pop_r: *mut f64,
) -> RydcavStatus {
    guard(|| {
        non_null!(t);
        let tr = &(*t).0;
        copy_out(&tr.times, times);
        copy_out(&tr.pop_b(), pop_b);
        copy_out(&tr.pop_e(), pop_e);
        copy_out(&tr.pop_r(), pop_r);
        RydcavStatus::Ok
    })
}

unsafe fn copy_out(src: &[f64], dst: *mut f64) {
    if !dst.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
}

/// # Safety
/// `t` must be null or a trajectory handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rydcav_trajectory_free(t: *mut RydcavTrajectory) {
    free(t);
}

/// Ensemble of quantum-jump trajectories from a coherent state `alpha`.
/// `workers == 0` uses the default thread pool; results do not depend on it.
///
/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_mcwf_ensemble(
    p: *const RydcavParams,
    alpha: RydcavComplex,
    cutoff: usize,
    t_end: f64,
    dt: f64,
    sample_interval: f64,
    n_traj: usize,
    seed: u64,
    workers: usize,
    out: *mut *mut RydcavEnsemble,
) -> RydcavStatus {
    guard(|| {
        non_null!(p, out);
        let run = coherent_ladder(C64::new(alpha.re, alpha.im), cutoff).and_then(|s0| {
            let opts = McwfOptions::new(t_end, dt).with_sample_interval(sample_interval);
            ensemble_average(&s0, &(*p).0, opts, n_traj, seed, (workers > 0).then_some(workers))
        });
        match run {
            Ok(r) => boxed(out, RydcavEnsemble(r)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `e` must be a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn rydcav_ensemble_len(e: *const RydcavEnsemble) -> usize {
    if e.is_null() {
        return 0;
    }
    (*e).0.times.len()
}

/// Copies the sampled columns; null outputs are skipped.
///
/// # Safety
/// Non-null outputs must hold [`rydcav_ensemble_len`] values.
#[no_mangle]
pub unsafe extern "C" fn rydcav_ensemble_copy(
    e: *const RydcavEnsemble,
    times: *mut f64,
    mean_photon: *mut f64,
    stderr_photon: *mut f64,
    rydberg_pop: *mut f64,
    stderr_rydberg: *mut f64,
) -> RydcavStatus {
    guard(|| {
        non_null!(e);
        let r = &(*e).0;
        copy_out(&r.times, times);
        copy_out(&r.mean_photon, mean_photon);
        copy_out(&r.stderr_photon, stderr_photon);
        copy_out(&r.rydberg_pop, rydberg_pop);
        copy_out(&r.stderr_rydberg, stderr_rydberg);
        RydcavStatus::Ok
    })
}

/// # Safety
/// `e` must be null or an ensemble handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rydcav_ensemble_free(e: *mut RydcavEnsemble) {
    free(e);
}

/// Blockade from `n` complex Förster couplings (rad/us).
///
/// # Safety
/// `v` must hold `n` values (may be null when `n == 0`); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_blockade_new(
    v: *const RydcavComplex,
    n: usize,
    out: *mut *mut RydcavBlockade,
) -> RydcavStatus {
    guard(|| {
        non_null!(out);
        if n > 0 {
            non_null!(v);
        }
        let v_m = (0..n).map(|i| {
            let z = *v.add(i);
            C64::new(z.re, z.im)
        });
        boxed(out, RydcavBlockade(Blockade::new(v_m.collect())))
    })
}

/// # Safety
/// `b` must be null or a blockade handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rydcav_blockade_free(b: *mut RydcavBlockade) {
    free(b);
}

/// Reflection without and with the stored qubit excitation, and the gate fidelity, at probe offset `delta`.
///
/// # Safety
/// Handles must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rydcav_gate_evaluate(
    p: *const RydcavParams,
    b: *const RydcavBlockade,
    delta: f64,
    r_unblocked: *mut RydcavComplex,
    r_blocked: *mut RydcavComplex,
    fidelity: *mut f64,
) -> RydcavStatus {
    guard(|| {
        non_null!(p, b, r_unblocked, r_blocked, fidelity);
        match evaluate(&(*p).0, delta, &(*b).0) {
            Ok((ru, rb, f)) => {
                *r_unblocked = ru.into();
                *r_blocked = rb.into();
                *fidelity = f;
                RydcavStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
