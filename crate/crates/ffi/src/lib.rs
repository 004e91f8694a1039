//! C interface to the equilibrium solver.
//!
//! Parameters and solutions live behind opaque handles created and freed by
//! this library. Every fallible call returns an [`AltqStatus`]; on failure a
//! description is kept per thread and can be read with [`altq_last_error`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use altq::{AltqError, Case, Method, ModelParams, Solution, Strategy, ValidatedParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltqStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters, strategy or configuration rejected.
    InvalidInput = 2,
    /// A solver failed on valid input.
    SolverFailure = 3,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 4,
    /// Internal error; the library caught a panic.
    Internal = 5,
}

/// Stationary-distribution solver used inside the equilibrium search.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltqMethod {
    Qbd = 0,
    Genfunc = 1,
}

/// Which branch of the equilibrium characterization applies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltqCase {
    AllBalk = 0,
    Interior = 1,
    AllJoin = 2,
}

/// Equilibrium strategy and the performance measures at it.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltqSummary {
    pub q_e: f64,
    pub equilibrium_case: AltqCase,
    pub n_e: u32,
    pub n_s: u32,
    pub residual: f64,
    pub iterations: u32,
    pub fallbacks: u32,
    pub mu_e: f64,
    pub a_e: f64,
    pub mean_number: f64,
    pub welfare: f64,
}

/// Validated model parameters.
pub struct AltqParams(ValidatedParams);

/// Result of [`altq_solve`].
pub struct AltqSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(e: AltqError) -> AltqStatus {
    let status = if e.is_validation() {
        AltqStatus::InvalidInput
    } else {
        AltqStatus::SolverFailure
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> AltqStatus {
    set_error(format!("{what} is null"));
    AltqStatus::NullPointer
}

/// Runs `f`, turning panics into [`AltqStatus::Internal`].
fn guard(f: impl FnOnce() -> AltqStatus) -> AltqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            AltqStatus::Internal
        }
    }
}

fn to_method(m: AltqMethod) -> Method {
    match m {
        AltqMethod::Qbd => Method::Qbd,
        AltqMethod::Genfunc => Method::Genfunc,
    }
}

fn store_params(p: ModelParams, out: *mut *mut AltqParams) -> AltqStatus {
    match altq::validate(p) {
        Ok(v) => {
            // SAFETY: caller checked `out` for null.
            unsafe { *out = Box::into_raw(Box::new(AltqParams(v))) };
            AltqStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Validates parameters and returns a new handle in `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn altq_params_new(
    lambda: f64,
    mu: f64,
    theta: f64,
    zeta: f64,
    reward: f64,
    cost: f64,
    entrance_fee: f64,
    service_fee: f64,
    refund: f64,
    out: *mut *mut AltqParams,
) -> AltqStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        store_params(
            ModelParams {
                lambda,
                mu,
                theta,
                zeta,
                reward,
                cost,
                entrance_fee,
                service_fee,
                refund,
            },
            out,
        )
    })
}

/// Parses and validates a JSON parameter object (keys `lambda`, `mu`,
/// `theta`, `zeta`, `R`, `C`, `fe`, `fs`, `r`).
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn altq_params_from_json(json: *const c_char, out: *mut *mut AltqParams) -> AltqStatus {
    guard(|| {
        if json.is_null() {
            return null("json");
        }
        if out.is_null() {
            return null("out");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(e.to_string());
                return AltqStatus::InvalidUtf8;
            }
        };
        match ModelParams::from_json(text) {
            Ok(p) => store_params(p, out),
            Err(e) => fail(e),
        }
    })
}

/// Releases a parameter handle. Null is ignored.
///
/// # Safety
/// `params` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn altq_params_free(params: *mut AltqParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// The joining threshold `n_e` and reneging threshold `n_s`.
///
/// # Safety
/// `params` must be a live handle; `n_e` and `n_s` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn altq_params_thresholds(
    params: *const AltqParams,
    n_e: *mut u32,
    n_s: *mut u32,
) -> AltqStatus {
    guard(|| {
        if params.is_null() || n_e.is_null() || n_s.is_null() {
            return null("argument");
        }
        match Strategy::for_params(&(*params).0, 0.0) {
            Ok(s) => {
                *n_e = s.n_e;
                *n_s = s.n_s;
                AltqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Expected net benefit of a joining customer who arrives in an
/// unobservable period while others join with probability `q`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn altq_unconditional_benefit(
    params: *const AltqParams,
    q: f64,
    method: AltqMethod,
    out: *mut f64,
) -> AltqStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return null("argument");
        }
        let p = &(*params).0;
        let value = Strategy::for_params(p, q).and_then(|s| altq::unconditional_benefit(&s, p, to_method(method)));
        match value {
            Ok(v) => {
                *out = v;
                AltqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Expected net benefit of a customer who joins behind `n` others.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn altq_conditional_benefit(params: *const AltqParams, n: u64, out: *mut f64) -> AltqStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return null("argument");
        }
        let p = &(*params).0;
        match Strategy::for_params(p, 0.0) {
            Ok(s) => {
                *out = altq::conditional_benefit(n, &s, p).value;
                AltqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Computes the equilibrium and its measures.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn altq_solve(
    params: *const AltqParams,
    method: AltqMethod,
    out: *mut *mut AltqSolution,
) -> AltqStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return null("argument");
        }
        match altq::solve(&(*params).0, to_method(method)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(AltqSolution(s)));
                AltqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Copies the solution into `*out`.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn altq_solution_summary(solution: *const AltqSolution, out: *mut AltqSummary) -> AltqStatus {
    guard(|| {
        if solution.is_null() || out.is_null() {
            return null("argument");
        }
        let Solution { equilibrium: e, measures: m } = &(*solution).0;
        *out = AltqSummary {
            q_e: e.q_e,
            equilibrium_case: match e.case {
                Case::AllBalk => AltqCase::AllBalk,
                Case::Interior => AltqCase::Interior,
                Case::AllJoin => AltqCase::AllJoin,
            },
            n_e: e.n_e,
            n_s: e.n_s,
            residual: e.residual,
            iterations: e.iterations,
            fallbacks: e.fallbacks,
            mu_e: m.mu_e,
            a_e: m.a_e,
            mean_number: m.en,
            welfare: m.s_e,
        };
        AltqStatus::Ok
    })
}

/// Releases a solution handle. Null is ignored.
///
/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn altq_solution_free(solution: *mut AltqSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn altq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn altq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
