//! C interface to the dualscale toolkit.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `ds_*_new`/`ds_*_load` function and released by the matching `ds_*_free`.
//! Fallible calls return a [`DsStatus`]; the message of the most recent
//! failure on the calling thread is available through [`ds_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dualscale::dynamics::{DriverLoadParams, PendulumParams, PlantParams, Trajectory};
use dualscale::estimation::{RegressorSample, RlsState};
use dualscale::homogeneity::{
    driverload_transform, homogenize_controller, pendulum_transform, HomogeneityTransform, HomogenizedController,
    NominalSpec, SaturationMode,
};
use dualscale::rl::{evaluate_policy, EvalOptions, Policy};
use dualscale::Error;

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    InvalidInput = 1,
    IntegrationFailure = 2,
    UnsupportedParameter = 3,
    DegenerateSignal = 4,
    NumericalDegeneracy = 5,
    NotYetIdentified = 6,
    TrainingFailure = 7,
    Config = 8,
    Io = 9,
    Parse = 10,
    NullPointer = 11,
    Panic = 12,
}

/// A loaded policy network.
pub struct DsPolicy(Policy);

/// Numeric scalings relating a perturbed plant to the nominal one.
pub struct DsTransform(HomogeneityTransform);

/// A policy wrapped with a homogeneity transform.
pub struct DsController(HomogenizedController<Policy>);

/// Recursive least-squares estimator state.
pub struct DsRls(RlsState);

/// A simulated trajectory.
pub struct DsTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DsStatus {
    match e {
        Error::InvalidInput(_) => DsStatus::InvalidInput,
        Error::IntegrationFailure { .. } => DsStatus::IntegrationFailure,
        Error::UnsupportedParameter(_) => DsStatus::UnsupportedParameter,
        Error::DegenerateSignal(_) => DsStatus::DegenerateSignal,
        Error::NumericalDegeneracy(_) => DsStatus::NumericalDegeneracy,
        Error::NotYetIdentified(_) => DsStatus::NotYetIdentified,
        Error::TrainingFailure { .. } => DsStatus::TrainingFailure,
        Error::Config(_) => DsStatus::Config,
        Error::Io(_) => DsStatus::Io,
        Error::Json(_) => DsStatus::Parse,
    }
}

struct Failure(DsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DsStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `p` points to `n` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `p` points to `n` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: `out` is non-null and the caller guarantees it is writable.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes a live handle or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn hmut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes a live, unaliased handle or null.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(p) });
    }
}

fn dim_check(expected: usize, got: usize, what: &str) -> Result<(), Failure> {
    if expected == got {
        Ok(())
    } else {
        Err(Failure(DsStatus::InvalidInput, format!("{what} has length {got}, expected {expected}")))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ds_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has room for `len` bytes and `n < len`.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Loads a policy file written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_policy_load(path: *const c_char, out: *mut *mut DsPolicy) -> DsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Failure(DsStatus::InvalidInput, "path is not UTF-8".into()))?;
        let policy = Policy::load(Path::new(path))?;
        unsafe { write_out(out, DsPolicy(policy)) }
    })
}

/// Number of observation entries the policy expects (0 for null).
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_policy_input_dim(policy: *const DsPolicy) -> usize {
    unsafe { policy.as_ref() }.map_or(0, |p| p.0.actor.input_dim())
}

/// Evaluates the raw policy output at `x`.
///
/// # Safety
/// `x` must point to `n` doubles and `u` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_policy_act(policy: *const DsPolicy, x: *const f64, n: usize, u: *mut f64) -> DsStatus {
    guard(|| {
        let p = unsafe { href(policy, "policy") }?;
        let x = unsafe { slice(x, n, "state") }?;
        dim_check(p.0.actor.input_dim(), n, "state")?;
        let out = unsafe { hmut(u, "output") }?;
        *out = p.0.act(x)?;
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_policy_free(policy: *mut DsPolicy) {
    unsafe { free(policy) }
}

/// Pendulum transform for `(m, l, g)` relative to the nominal `(nm, nl, ng)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_pendulum_transform(
    m: f64,
    l: f64,
    g: f64,
    nm: f64,
    nl: f64,
    ng: f64,
    out: *mut *mut DsTransform,
) -> DsStatus {
    guard(|| {
        let p = PendulumParams::new(m, l, g)?;
        let spec = NominalSpec::pendulum(PendulumParams::new(nm, nl, ng)?)?;
        unsafe { write_out(out, DsTransform(pendulum_transform(&p, &spec)?)) }
    })
}

/// Vehicle/load transform; the mass ratios must match.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ds_driverload_transform(
    big_m: f64,
    m: f64,
    l: f64,
    g: f64,
    n_big_m: f64,
    nm: f64,
    nl: f64,
    ng: f64,
    out: *mut *mut DsTransform,
) -> DsStatus {
    guard(|| {
        let p = DriverLoadParams::new(big_m, m, l, g)?;
        let spec = NominalSpec::driver_load(DriverLoadParams::new(n_big_m, nm, nl, ng)?)?;
        unsafe { write_out(out, DsTransform(driverload_transform(&p, &spec)?)) }
    })
}

/// State dimension of the transform (0 for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_dim(t: *const DsTransform) -> usize {
    unsafe { t.as_ref() }.map_or(0, |t| t.0.dim())
}

/// Time scale `zeta` (NaN for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_zeta(t: *const DsTransform) -> f64 {
    unsafe { t.as_ref() }.map_or(f64::NAN, |t| t.0.zeta)
}

/// Control scale `c0` (NaN for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_control_scale(t: *const DsTransform) -> f64 {
    unsafe { t.as_ref() }.map_or(f64::NAN, |t| t.0.control_scale)
}

/// Copies the state scales `c_i` into `out[0..n]`; `n` must equal the
/// transform dimension.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_state_scales(t: *const DsTransform, out: *mut f64, n: usize) -> DsStatus {
    guard(|| {
        let t = unsafe { href(t, "transform") }?;
        dim_check(t.0.dim(), n, "output")?;
        unsafe { slice_mut(out, n, "output") }?.copy_from_slice(&t.0.state_scales);
        Ok(())
    })
}

/// Copies the amplitude scales `kappa_i` into `out[0..n]`.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_kappa(t: *const DsTransform, out: *mut f64, n: usize) -> DsStatus {
    guard(|| {
        let t = unsafe { href(t, "transform") }?;
        dim_check(t.0.dim(), n, "output")?;
        unsafe { slice_mut(out, n, "output") }?.copy_from_slice(&t.0.kappa);
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_transform_free(t: *mut DsTransform) {
    unsafe { free(t) }
}

/// Wraps copies of `policy` and `transform` into a homogenizing controller.
/// A positive `saturation` clamps the policy output before scaling.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_controller_new(
    policy: *const DsPolicy,
    transform: *const DsTransform,
    saturation: f64,
    out: *mut *mut DsController,
) -> DsStatus {
    guard(|| {
        let p = unsafe { href(policy, "policy") }?;
        let t = unsafe { href(transform, "transform") }?;
        let mut c = homogenize_controller(p.0.clone(), t.0.clone())?;
        if saturation > 0.0 {
            c = c.with_saturation(saturation, SaturationMode::PolicyOutput);
        }
        unsafe { write_out(out, DsController(c)) }
    })
}

/// Control input `u = c0 * pi(c .* x)`.
///
/// # Safety
/// `x` must point to `n` doubles and `u` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_controller_evaluate(c: *mut DsController, x: *const f64, n: usize, u: *mut f64) -> DsStatus {
    guard(|| {
        let c = unsafe { hmut(c, "controller") }?;
        let x = unsafe { slice(x, n, "state") }?;
        let out = unsafe { hmut(u, "output") }?;
        *out = c.0.evaluate(x)?;
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_controller_free(c: *mut DsController) {
    unsafe { free(c) }
}

/// Estimator with initial estimate `psi0[0..n]`, covariance `p0 * I` and
/// forgetting factor `lambda`.
///
/// # Safety
/// `psi0` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_rls_new(psi0: *const f64, n: usize, p0: f64, lambda: f64, out: *mut *mut DsRls) -> DsStatus {
    guard(|| {
        let psi0 = unsafe { slice(psi0, n, "initial estimate") }?;
        let s = RlsState::new(psi0.to_vec(), p0, lambda)?;
        unsafe { write_out(out, DsRls(s)) }
    })
}

/// One update with regressor `phi[0..n]` and measurement `y`.
///
/// # Safety
/// `phi` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_rls_update(r: *mut DsRls, phi: *const f64, n: usize, y: f64) -> DsStatus {
    guard(|| {
        let r = unsafe { hmut(r, "estimator") }?;
        let phi = unsafe { slice(phi, n, "regressor") }?;
        r.0.update(&RegressorSample { phi: phi.to_vec(), y })?;
        Ok(())
    })
}

/// Copies the current estimate into `out[0..n]`.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_rls_estimate(r: *const DsRls, out: *mut f64, n: usize) -> DsStatus {
    guard(|| {
        let r = unsafe { href(r, "estimator") }?;
        dim_check(r.0.dim(), n, "output")?;
        unsafe { slice_mut(out, n, "output") }?.copy_from_slice(&r.0.psi);
        Ok(())
    })
}

/// Trace of the covariance (NaN for null).
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_rls_trace(r: *const DsRls) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.trace())
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_rls_free(r: *mut DsRls) {
    unsafe { free(r) }
}

/// Greedy pendulum rollout of `policy` from `(theta0, rate0)`, through
/// `transform` when it is non-null. `t_final` and `period` are on the
/// nominal time axis; a positive `saturation` clamps the policy output.
/// `success`, when non-null, receives 1 if the upright criterion holds.
///
/// # Safety
/// Handles must be live or null where allowed; outputs must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ds_pendulum_rollout(
    policy: *const DsPolicy,
    transform: *const DsTransform,
    m: f64,
    l: f64,
    g: f64,
    theta0: f64,
    rate0: f64,
    t_final: f64,
    period: f64,
    saturation: f64,
    success: *mut i32,
    out: *mut *mut DsTrajectory,
) -> DsStatus {
    guard(|| {
        let p = unsafe { href(policy, "policy") }?;
        let t = unsafe { transform.as_ref() }.map(|t| &t.0);
        let params = PlantParams::Pendulum(PendulumParams::new(m, l, g)?);
        let opts = EvalOptions {
            t_final,
            control_period: period,
            saturation: (saturation > 0.0).then_some(saturation),
            ..EvalOptions::default()
        };
        let r = evaluate_policy(&p.0, &params, t, &[theta0, rate0], &opts)?;
        if let Some(s) = unsafe { success.as_mut() } {
            *s = i32::from(r.success);
        }
        unsafe { write_out(out, DsTrajectory(r.trajectory)) }
    })
}

/// Number of samples (0 for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_len(t: *const DsTrajectory) -> usize {
    unsafe { t.as_ref() }.map_or(0, |t| t.0.len())
}

/// State dimension (0 for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_dim(t: *const DsTrajectory) -> usize {
    unsafe { t.as_ref() }.map_or(0, |t| t.0.dim())
}

/// Reads sample `i`: its time, the state into `state[0..n]` and the control.
///
/// # Safety
/// `time` and `control` must be writable; `state` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_sample(
    t: *const DsTrajectory,
    i: usize,
    time: *mut f64,
    state: *mut f64,
    n: usize,
    control: *mut f64,
) -> DsStatus {
    guard(|| {
        let t = unsafe { href(t, "trajectory") }?;
        if i >= t.0.len() {
            return Err(Failure(DsStatus::InvalidInput, format!("sample {i} out of range")));
        }
        dim_check(t.0.dim(), n, "state")?;
        *unsafe { hmut(time, "time") }? = t.0.times()[i];
        unsafe { slice_mut(state, n, "state") }?.copy_from_slice(t.0.state(i));
        *unsafe { hmut(control, "control") }? = t.0.controls()[i];
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_free(t: *mut DsTrajectory) {
    unsafe { free(t) }
}
