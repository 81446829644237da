//! C ABI for `relspin`.
//!
//! Conventions:
//! - Every fallible function returns a [`RelspinStatus`]; on failure a
//!   message is kept per thread and read with [`relspin_last_error`].
//! - Objects are opaque handles created by `*_new`/`*_load`/`*_parse`/
//!   `relspin_simulate` and released by the matching `*_free`. Freeing NULL
//!   is a no-op.
//! - Strings returned through `char **` are owned by the caller and
//!   released with [`relspin_string_free`].
//! - Complex matrices are written row-major as interleaved (re, im) pairs.
//! - Panics never cross the boundary; they surface as
//!   `RELSPIN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use relspin::app;
use relspin::operators::{condition_checks, operator_suite, spin_operator, Momentum3, PhysParams, SpinKind};
use relspin::propagate::{Trajectory, CSV_COLUMNS};
use relspin::scenario::{self, Resolved};
use relspin::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelspinStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    InvalidArgument = 2,
    /// Scenario parse or validation error; the message names the field.
    Config = 3,
    SingularMomentum = 4,
    ZeroModeGuard = 5,
    NotHermitian = 6,
    NonFinite = 7,
    Unsupported = 8,
    KrylovNotConverged = 9,
    BoundaryFlux = 10,
    Io = 11,
    /// An index or buffer length was out of range.
    OutOfRange = 12,
    Panic = 13,
}

pub const RELSPIN_SPIN_DIRAC: i32 = 0;
pub const RELSPIN_SPIN_FW: i32 = 1;
pub const RELSPIN_SPIN_PRYCE: i32 = 2;

/// Doubles in one 4×4 complex matrix.
pub const RELSPIN_MATRIX_DOUBLES: usize = 32;

/// Physical constants (m0, c, e) in internal units.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RelspinParams {
    pub m0: f64,
    pub c: f64,
    pub e: f64,
}

/// Proper-spin-operator checks at one momentum.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RelspinConditions {
    pub su2_residual: f64,
    /// Largest deviation of each component's spectrum from (−½, −½, ½, ½).
    pub spectrum_deviation: f64,
    pub free_commutation_residual: f64,
    pub free_commutation_components: [f64; 3],
}

/// A validated scenario.
pub struct RelspinScenario(Resolved);

/// Sampled observables of a run, in the CSV column order.
pub struct RelspinTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RelspinStatus {
    match e {
        Error::NotHermitian { .. } => RelspinStatus::NotHermitian,
        Error::SingularMomentum { .. } => RelspinStatus::SingularMomentum,
        Error::ZeroModeGuard { .. } => RelspinStatus::ZeroModeGuard,
        Error::InvalidParams(_) | Error::InvalidArgument(_) => RelspinStatus::InvalidArgument,
        Error::NonFinite(_) => RelspinStatus::NonFinite,
        Error::Unsupported(_) => RelspinStatus::Unsupported,
        Error::KrylovNotConverged { .. } => RelspinStatus::KrylovNotConverged,
        Error::BoundaryFlux { .. } => RelspinStatus::BoundaryFlux,
        Error::Config { .. } => RelspinStatus::Config,
        Error::Io(_) => RelspinStatus::Io,
    }
}

struct Failure(RelspinStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: RelspinStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, recording its error and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RelspinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RelspinStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {what}"));
            RelspinStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers that are either NULL or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| fail(RelspinStatus::NullArgument, format!("{name} is NULL")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(fail(RelspinStatus::NullArgument, format!("{name} is NULL")))
    } else {
        Ok(p)
    }
}

fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(RelspinStatus::NullArgument, format!("{name} is NULL")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| fail(RelspinStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn kind_of(kind: i32) -> Result<SpinKind, Failure> {
    match kind {
        RELSPIN_SPIN_DIRAC => Ok(SpinKind::Dirac),
        RELSPIN_SPIN_FW => Ok(SpinKind::Fw),
        RELSPIN_SPIN_PRYCE => Ok(SpinKind::Pryce),
        other => Err(fail(RelspinStatus::InvalidArgument, format!("unknown spin kind {other}"))),
    }
}

fn params_of(p: *const RelspinParams) -> Result<PhysParams, Failure> {
    if p.is_null() {
        return Ok(PhysParams::electron_scaled());
    }
    let p = non_null(p, "params")?;
    Ok(PhysParams::new(p.m0, p.c, p.e)?)
}

fn momentum_of(p: *const f64) -> Result<Momentum3, Failure> {
    if p.is_null() {
        return Err(fail(RelspinStatus::NullArgument, "p is NULL"));
    }
    // SAFETY: p points at three doubles per the API contract.
    let v = unsafe { std::slice::from_raw_parts(p, 3) };
    Ok(Momentum3([v[0], v[1], v[2]]))
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let out = out_ptr(out, "out")?;
    let c = CString::new(s).map_err(|_| fail(RelspinStatus::InvalidArgument, "string contains NUL"))?;
    // SAFETY: out is non-null and writable.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| fail(RelspinStatus::Io, e.to_string()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relspin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn relspin_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn relspin_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Writes the three components of the spin operator at momentum `p` into
/// `out` (3 × RELSPIN_MATRIX_DOUBLES doubles). `params` may be NULL for the
/// scaled electron (m0 = c = 1, e = −1).
///
/// # Safety
/// `p` must point at 3 doubles and `out` at 96 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn relspin_spin_operator(kind: i32, p: *const f64, params: *const RelspinParams, out: *mut f64) -> RelspinStatus {
    guard(|| {
        let kind = kind_of(kind)?;
        let params = params_of(params)?;
        let p = momentum_of(p)?;
        let out = out_ptr(out, "out")?;
        let s = spin_operator(kind, p, &params)?;
        // SAFETY: out holds 96 doubles per the contract.
        let buf = unsafe { std::slice::from_raw_parts_mut(out, 3 * RELSPIN_MATRIX_DOUBLES) };
        for (c, m) in s.0.iter().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    let at = c * RELSPIN_MATRIX_DOUBLES + 2 * (4 * i + j);
                    buf[at] = m.0[i][j].re;
                    buf[at + 1] = m.0[i][j].im;
                }
            }
        }
        Ok(())
    })
}

/// SU(2), spectrum and free-commutation checks at momentum `p`.
///
/// # Safety
/// `p` must point at 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_condition_checks(
    kind: i32,
    p: *const f64,
    params: *const RelspinParams,
    out: *mut RelspinConditions,
) -> RelspinStatus {
    guard(|| {
        let kind = kind_of(kind)?;
        let params = params_of(params)?;
        let p = momentum_of(p)?;
        let out = out_ptr(out, "out")?;
        let r = condition_checks(kind, p, &params)?;
        let c = RelspinConditions {
            su2_residual: r.su2_residual,
            spectrum_deviation: r.spectrum_deviation(),
            free_commutation_residual: r.free_commutation_residual,
            free_commutation_components: r.free_commutation_components,
        };
        // SAFETY: out is non-null and writable.
        unsafe { out.write(c) };
        Ok(())
    })
}

/// The operator suite over `samples` seeded momenta with |p| ≤ `pmax`.
/// Sets `*passed` and, if `json_out` is not NULL, the JSON report.
///
/// # Safety
/// `passed` must be writable; `json_out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_check_operators(
    samples: u64,
    pmax: f64,
    seed: u64,
    passed: *mut bool,
    json_out: *mut *mut c_char,
) -> RelspinStatus {
    guard(|| {
        let passed = out_ptr(passed, "passed")?;
        if samples == 0 {
            return Err(fail(RelspinStatus::InvalidArgument, "samples must be at least 1"));
        }
        if !(pmax.is_finite() && pmax > 0.0) {
            return Err(fail(RelspinStatus::InvalidArgument, format!("pmax must be finite and > 0, got {pmax}")));
        }
        let suite = operator_suite(samples as usize, pmax, seed, &PhysParams::electron_scaled())?;
        // SAFETY: non-null and writable.
        unsafe { passed.write(suite.passed) };
        if !json_out.is_null() {
            give_string(json(&app::OperatorsOutcome { schema: app::OPERATORS_SCHEMA, suite })?, json_out)?;
        }
        Ok(())
    })
}

fn give_scenario(r: Result<Resolved, Error>, out: *mut *mut RelspinScenario) -> Result<(), Failure> {
    let out = out_ptr(out, "out")?;
    let handle = Box::into_raw(Box::new(RelspinScenario(r?)));
    // SAFETY: out is non-null and writable.
    unsafe { *out = handle };
    Ok(())
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_scenario_parse(json: *const c_char, out: *mut *mut RelspinScenario) -> RelspinStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        give_scenario(scenario::parse(text).and_then(|s| s.resolve()), out)
    })
}

/// Reads, parses and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_scenario_load(path: *const c_char, out: *mut *mut RelspinScenario) -> RelspinStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        give_scenario(scenario::load(Path::new(path)), out)
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn relspin_scenario_free(s: *mut RelspinScenario) {
    if !s.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Verifies the scenario's spin equations (`refine` runs the grid ladder).
/// Sets `*passed`; writes the JSON report if `json_out` is not NULL.
///
/// # Safety
/// `s` must be a live scenario handle; `passed` writable; `json_out` NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_verify_dynamics(
    s: *const RelspinScenario,
    refine: bool,
    passed: *mut bool,
    json_out: *mut *mut c_char,
) -> RelspinStatus {
    guard(|| {
        let s = non_null(s, "scenario")?;
        let passed = out_ptr(passed, "passed")?;
        let outcome = app::verify_dynamics(&s.0, refine)?;
        // SAFETY: non-null and writable.
        unsafe { passed.write(outcome.passed) };
        if !json_out.is_null() {
            give_string(json(&outcome)?, json_out)?;
        }
        Ok(())
    })
}

/// Propagates the scenario's initial state.
///
/// # Safety
/// `s` must be a live scenario handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_simulate(s: *const RelspinScenario, out: *mut *mut RelspinTrajectory) -> RelspinStatus {
    guard(|| {
        let s = non_null(s, "scenario")?;
        let out = out_ptr(out, "out")?;
        let (traj, _) = app::simulate(&s.0)?;
        // SAFETY: out is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(RelspinTrajectory(traj))) };
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn relspin_trajectory_free(t: *mut RelspinTrajectory) {
    if !t.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Number of samples (0 for NULL).
///
/// # Safety
/// `t` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn relspin_trajectory_len(t: *const RelspinTrajectory) -> usize {
    // SAFETY: NULL or live per the contract.
    unsafe { t.as_ref() }.map_or(0, |t| t.0.samples.len())
}

/// Number of columns in the trajectory CSV contract.
#[no_mangle]
pub extern "C" fn relspin_trajectory_column_count() -> usize {
    CSV_COLUMNS.len()
}

/// Name of column `index` (static string), or NULL when out of range.
#[no_mangle]
pub extern "C" fn relspin_trajectory_column_name(index: usize) -> *const c_char {
    static NAMES: std::sync::OnceLock<Vec<CString>> = std::sync::OnceLock::new();
    let names = NAMES.get_or_init(|| CSV_COLUMNS.iter().map(|c| CString::new(*c).expect("no NUL")).collect());
    names.get(index).map_or(ptr::null(), |c| c.as_ptr())
}

/// Copies column `name` into `buf` (capacity `len`, at least the
/// trajectory length).
///
/// # Safety
/// `t` must be a live trajectory handle, `name` a NUL-terminated string and
/// `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn relspin_trajectory_column(
    t: *const RelspinTrajectory,
    name: *const c_char,
    buf: *mut f64,
    len: usize,
) -> RelspinStatus {
    guard(|| {
        let t = non_null(t, "trajectory")?;
        let name = c_str(name, "name")?;
        let buf = out_ptr(buf, "buf")?;
        let col = t.0.column(name).ok_or_else(|| fail(RelspinStatus::InvalidArgument, format!("unknown column \"{name}\"")))?;
        if len < col.len() {
            return Err(fail(RelspinStatus::OutOfRange, format!("buffer holds {len} values, trajectory has {}", col.len())));
        }
        // SAFETY: buf is writable for len ≥ col.len() doubles.
        unsafe { ptr::copy_nonoverlapping(col.as_ptr(), buf, col.len()) };
        Ok(())
    })
}

/// The trajectory as CSV text (header plus one row per sample).
///
/// # Safety
/// `t` must be a live trajectory handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_trajectory_csv(t: *const RelspinTrajectory, out: *mut *mut c_char) -> RelspinStatus {
    guard(|| {
        let t = non_null(t, "trajectory")?;
        let mut bytes = Vec::new();
        t.0.write_csv(&mut bytes)?;
        give_string(String::from_utf8(bytes).expect("CSV is ASCII"), out)
    })
}

/// Runs the scenario over `count` field strengths (internal units) and
/// returns the divergence CSV (b0, t, d_py, d_fw).
///
/// # Safety
/// `s` must be a live scenario handle, `strengths` readable for `count`
/// doubles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relspin_sweep(
    s: *const RelspinScenario,
    strengths: *const f64,
    count: usize,
    out: *mut *mut c_char,
) -> RelspinStatus {
    guard(|| {
        let s = non_null(s, "scenario")?;
        if strengths.is_null() {
            return Err(fail(RelspinStatus::NullArgument, "strengths is NULL"));
        }
        // SAFETY: readable for count doubles per the contract.
        let strengths = unsafe { std::slice::from_raw_parts(strengths, count) };
        let rows = app::sweep(&s.0, strengths)?;
        let mut bytes = Vec::new();
        app::write_sweep_csv(&rows, &mut bytes)?;
        give_string(String::from_utf8(bytes).expect("CSV is ASCII"), out)
    })
}
