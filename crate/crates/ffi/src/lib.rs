//! C interface to the palflow solver.
//!
//! Problems and solutions are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`PalflowStatus`]; on failure [`palflow_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use palflow::ode::{Method, StopReason};
use palflow::prox::{ProxFunction, ProxKind, SmoothingParam};
use palflow::registry::{self, ProblemInstance};
use palflow::run::{solve_instance, DualInit, RunConfig, RunSummary};
use palflow::schema::parse_problem_str;
use palflow::{Error, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PalflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    ParseError = 4,
    NumericFault = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PalflowMethod {
    Rk4 = 0,
    Rk45 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PalflowStopReason {
    KktTol = 0,
    TimeLimit = 1,
    NonFinite = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PalflowProxKind {
    Zero = 0,
    L1 = 1,
    IndicatorZero = 2,
    /// Uses the `weight` argument of [`palflow_prox`].
    Quadratic = 3,
}

/// Solver settings. Start from [`palflow_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalflowOptions {
    pub mu: f64,
    /// Same weight for every inequality; `<= 0` keeps the problem's own weights.
    pub eta: f64,
    pub dt: f64,
    /// `<= 0` uses the problem's default horizon.
    pub t_end: f64,
    pub kkt_tol: f64,
    pub method: PalflowMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub record_every: usize,
    /// Nonzero removes the agent mean from the initial `w'` of network problems.
    pub project_dual: u8,
}

/// Opaque problem handle.
pub struct PalflowProblem {
    name: String,
    instance: ProblemInstance,
}

/// Opaque solution handle.
pub struct PalflowSolution {
    summary: RunSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> PalflowStatus {
    match e {
        Error::UnknownProblem(_) => PalflowStatus::UnknownProblem,
        Error::Parse(_) => PalflowStatus::ParseError,
        Error::Domain(_) | Error::Integration { .. } | Error::Estimation(_) => PalflowStatus::NumericFault,
        _ => PalflowStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PalflowStatus, String)>) -> PalflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PalflowStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PalflowStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PalflowStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PalflowStatus, String) {
    (PalflowStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (PalflowStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (PalflowStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread. Valid until the next call
/// that fails on the same thread; never null.
#[no_mangle]
pub extern "C" fn palflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn palflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn palflow_options_default() -> PalflowOptions {
    let d = RunConfig::default();
    PalflowOptions {
        mu: d.mu,
        eta: 0.0,
        dt: d.dt,
        t_end: 0.0,
        kkt_tol: d.kkt_tol,
        method: PalflowMethod::Rk4,
        abs_tol: d.abs_tol,
        rel_tol: d.rel_tol,
        record_every: d.record_every,
        project_dual: 1,
    }
}

/// Loads a built-in problem by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn palflow_problem_from_registry(
    name: *const c_char,
    out: *mut *mut PalflowProblem,
) -> PalflowStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(name, "name")?;
        let instance = registry::load(name).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PalflowProblem { name: name.to_string(), instance }));
        Ok(())
    })
}

/// Parses a problem from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn palflow_problem_from_json(
    json: *const c_char,
    out: *mut *mut PalflowProblem,
) -> PalflowStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let instance = parse_problem_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PalflowProblem { name: "<json>".into(), instance }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from a `palflow_problem_from_*` call
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn palflow_problem_free(problem: *mut PalflowProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Decision dimension (per agent for network problems); 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_problem_dim(problem: *const PalflowProblem) -> usize {
    match problem.as_ref().map(|p| &p.instance) {
        Some(ProblemInstance::Central { spec, .. }) => spec.n(),
        Some(ProblemInstance::Distributed { net, .. }) => net.n(),
        None => 0,
    }
}

/// Number of agents: 1 for centralized problems, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_problem_agents(problem: *const PalflowProblem) -> usize {
    match problem.as_ref().map(|p| &p.instance) {
        Some(ProblemInstance::Central { .. }) => 1,
        Some(ProblemInstance::Distributed { net, .. }) => net.num_agents(),
        None => 0,
    }
}

fn config_from(name: &str, opts: &PalflowOptions) -> RunConfig {
    RunConfig {
        problem: name.to_string(),
        mu: opts.mu,
        eta: (opts.eta > 0.0).then(|| vec![opts.eta]),
        dt: opts.dt,
        t_end: Some(if opts.t_end > 0.0 { opts.t_end } else { registry::default_horizon(name) }),
        kkt_tol: opts.kkt_tol,
        method: match opts.method {
            PalflowMethod::Rk4 => Method::Rk4Fixed,
            PalflowMethod::Rk45 => Method::Rk45Adaptive,
        },
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        record_every: opts.record_every,
        dual_init: if opts.project_dual != 0 { DualInit::Projected } else { DualInit::AsGiven },
        ..RunConfig::default()
    }
}

/// Integrates the flow until the KKT tolerance or the horizon. A run that
/// stops at the horizon still returns `Ok`; check
/// [`palflow_solution_converged`].
///
/// # Safety
/// `problem` must be a live handle, `options` null (defaults) or valid, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn palflow_solve(
    problem: *const PalflowProblem,
    options: *const PalflowOptions,
    out: *mut *mut PalflowSolution,
) -> PalflowStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| palflow_options_default());
        let cfg = config_from(&problem.name, &opts);
        let output = solve_instance(problem.instance.clone(), &cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PalflowSolution { summary: output.summary }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`palflow_solve`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_free(solution: *mut PalflowSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// 1 if the KKT tolerance was reached, 0 otherwise or for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_converged(solution: *const PalflowSolution) -> u8 {
    solution.as_ref().map_or(0, |s| s.summary.converged as u8)
}

/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_stop_reason(solution: *const PalflowSolution) -> PalflowStopReason {
    match solution.as_ref().map(|s| s.summary.stop_reason) {
        Some(StopReason::KktTol) => PalflowStopReason::KktTol,
        Some(StopReason::NonFinite) | None => PalflowStopReason::NonFinite,
        Some(StopReason::TimeLimit) => PalflowStopReason::TimeLimit,
    }
}

/// Final smoothed KKT residual; NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_kkt(solution: *const PalflowSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.summary.final_kkt.total)
}

/// Final integration time summed over continuation rounds; NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_time(solution: *const PalflowSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.summary.rounds.iter().map(|r| r.t_final).sum())
}

/// # Safety
/// `buf` must hold `len` doubles and `written` must be valid.
unsafe fn copy_out(
    values: &[f64],
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> Result<(), (PalflowStatus, String)> {
    if written.is_null() {
        return Err(null("written"));
    }
    *written = values.len();
    if values.len() > len {
        return Err((PalflowStatus::BufferTooSmall, format!("need {} entries, buffer has {len}", values.len())));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// # Safety
/// `solution` must be null or a live handle; `buf` must hold `len` doubles and
/// `written` must be valid.
unsafe fn solution_vector(
    solution: *const PalflowSolution,
    get: fn(&RunSummary) -> &[f64],
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> PalflowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(get(&s.summary), buf, len, written)
    })
}

/// The solution `x`, or the agent average for network problems. Writes the entry count to `written` even when the buffer is too
/// small.
///
/// # Safety
/// `solution` must be a live handle, `buf` must hold `len` doubles and
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_x(
    solution: *const PalflowSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> PalflowStatus {
    solution_vector(solution, |s| &s.x_star, buf, len, written)
}

/// Inequality multipliers, stacked over agents for network problems. Writes the entry count to `written` even when the buffer is too
/// small.
///
/// # Safety
/// `solution` must be a live handle, `buf` must hold `len` doubles and
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_lambda(
    solution: *const PalflowSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> PalflowStatus {
    solution_vector(solution, |s| &s.multipliers.lambda, buf, len, written)
}

/// Equality multipliers, stacked over agents for network problems. Writes the entry count to `written` even when the buffer is too
/// small.
///
/// # Safety
/// `solution` must be a live handle, `buf` must hold `len` doubles and
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn palflow_solution_nu(
    solution: *const PalflowSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> PalflowStatus {
    solution_vector(solution, |s| &s.multipliers.nu, buf, len, written)
}

/// Evaluates `prox_{μφ}(v)` into `out` (length `len`). `weight` is only read
/// for [`PalflowProxKind::Quadratic`].
///
/// # Safety
/// `v` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn palflow_prox(
    kind: PalflowProxKind,
    weight: f64,
    v: *const f64,
    len: usize,
    mu: f64,
    out: *mut f64,
) -> PalflowStatus {
    guard(|| {
        if v.is_null() {
            return Err(null("v"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match kind {
            PalflowProxKind::Zero => ProxKind::Zero,
            PalflowProxKind::L1 => ProxKind::L1Norm,
            PalflowProxKind::IndicatorZero => ProxKind::IndicatorZero,
            PalflowProxKind::Quadratic => ProxKind::Quadratic { weight },
        };
        let phi = ProxFunction::new(kind, len).map_err(lib_err)?;
        let mu = SmoothingParam::new(mu).map_err(lib_err)?;
        let input = Vector::from_column_slice(std::slice::from_raw_parts(v, len));
        let p = phi.prox(&input, mu).map_err(lib_err)?;
        ptr::copy_nonoverlapping(p.as_ptr(), out, len);
        Ok(())
    })
}
