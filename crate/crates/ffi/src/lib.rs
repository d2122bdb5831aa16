//! C ABI over `hj-homog`.
//!
//! Problems are opaque `HjProblem` handles created from JSON and released with
//! `hj_problem_free`. Every call returns an `HjStatus`; on failure the message
//! is available from `hj_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hj_homog::cellpde::{estimate_hbar_grid, periodic_bump_source, DiscountedSolveConfig, PeriodicGrid};
use hj_homog::hamiltonian::schema::ProblemDoc;
use hj_homog::hamiltonian::{BumpProfile, HamiltonianSpec};
use hj_homog::homog1d::{limit_formula_1d, solve_hbar_1d, solve_hbar_eta_exact_1d, solve_hbar_r_1d, Solve1DOptions};
use hj_homog::randomfield::mc_estimate_hbar_eta_1d;
use hj_homog::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Panic = 5,
}

/// A Hamiltonian with its bump.
pub struct HjProblem {
    spec: HamiltonianSpec,
    bump: BumpProfile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HjStatus {
    match e {
        Error::InvalidArgument(_) => HjStatus::InvalidArgument,
        Error::Config(_) | Error::Json(_) | Error::Parse(_) => HjStatus::Config,
        _ => HjStatus::Solver,
    }
}

fn guard<F: FnOnce() -> Result<(), HjStatus>>(f: F) -> HjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HjStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside hj-homog".into());
            HjStatus::Panic
        }
    }
}

fn fail(e: Error) -> HjStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> HjStatus {
    set_error(format!("{what} is null"));
    HjStatus::NullPointer
}

unsafe fn problem<'a>(p: *const HjProblem) -> Result<&'a HjProblem, HjStatus> {
    // SAFETY: caller passes a handle from `hj_problem_from_json` or null.
    unsafe { p.as_ref() }.ok_or_else(|| null("problem"))
}

fn need<T>(out: *mut T) -> Result<(), HjStatus> {
    if out.is_null() {
        Err(null("output pointer"))
    } else {
        Ok(())
    }
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), HjStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: non-null and, per the contract, writable.
    unsafe { out.write(v) };
    Ok(())
}

/// Parses a problem document (`family`, `pbar`, `potential`, `bump`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_problem_from_json(json: *const c_char, out: *mut *mut HjProblem) -> HjStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| fail(Error::Config("json is not UTF-8".into())))?;
        let doc = ProblemDoc::from_json(text).map_err(fail)?;
        let handle = HjProblem {
            spec: doc.hamiltonian().map_err(fail)?,
            bump: doc.bump().map_err(fail)?,
        };
        unsafe { write(out, Box::into_raw(Box::new(handle))) }
    })
}

/// # Safety
/// `p` must come from `hj_problem_from_json` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hj_problem_free(p: *mut HjProblem) {
    if !p.is_null() {
        // SAFETY: allocated by Box in hj_problem_from_json.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Spatial dimension of the problem.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_problem_dim(p: *const HjProblem, out: *mut usize) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        write(out, pr.spec.dim())
    })
}

/// Unperturbed H̄ in d = 1 by root-finding.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_hbar_1d(p: *const HjProblem, out: *mut f64) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        let v = solve_hbar_1d(&pr.spec, &Solve1DOptions::default()).map_err(fail)?;
        write(out, v.value)
    })
}

/// H̄_R in d = 1 for the problem's bump repeated with period `period`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_hbar_r_1d(p: *const HjProblem, period: i64, out: *mut f64) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        let v = solve_hbar_r_1d(&pr.spec, &pr.bump, period, &Solve1DOptions::default()).map_err(fail)?;
        write(out, v.value)
    })
}

/// H̄_η in d = 1 from the expectation condition.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_hbar_eta_1d(p: *const HjProblem, eta: f64, out: *mut f64) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        let v = solve_hbar_eta_exact_1d(&pr.spec, &pr.bump, eta, &Solve1DOptions::default()).map_err(fail)?;
        write(out, v.value)
    })
}

/// The limit of `R(H̄_R − H̄)` in d = 1.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_limit_formula_1d(p: *const HjProblem, out: *mut f64) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        let opts = Solve1DOptions::default();
        let h = solve_hbar_1d(&pr.spec, &opts).map_err(fail)?;
        let v = limit_formula_1d(&pr.spec, &pr.bump, &h, &opts.rule).map_err(fail)?;
        write(out, v)
    })
}

/// Discounted grid estimate on `Q_period` with `n` nodes per unit length and the
/// bump as source (default δ schedule).
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_hbar_grid(p: *const HjProblem, period: u64, n: u64, out: *mut f64) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(out)?;
        let grid = PeriodicGrid::new(pr.spec.dim(), period, n).map_err(fail)?;
        let source = periodic_bump_source(&pr.bump, grid).map_err(fail)?;
        let v = estimate_hbar_grid(&pr.spec, &source, &DiscountedSolveConfig::default()).map_err(fail)?;
        write(out, v.value)
    })
}

/// Monte Carlo H̄_η in d = 1; writes the mean and its standard error.
///
/// # Safety
/// `p` must be a live handle; `mean` and `se` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_mc_hbar_eta_1d(
    p: *const HjProblem,
    eta: f64,
    torus_n: usize,
    samples: usize,
    seed: u64,
    mean: *mut f64,
    se: *mut f64,
) -> HjStatus {
    guard(|| unsafe {
        let pr = problem(p)?;
        need(mean)?;
        need(se)?;
        let e = mc_estimate_hbar_eta_1d(&pr.spec, &pr.bump, eta, torus_n, samples, seed, &Solve1DOptions::default()).map_err(fail)?;
        write(mean, e.mean)?;
        write(se, e.se)
    })
}

/// Message of the last failed call on this thread, or null. Valid until the next call
/// on this thread.
#[no_mangle]
pub extern "C" fn hj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn hj_status_string(status: HjStatus) -> *const c_char {
    let s: &'static CStr = match status {
        HjStatus::Ok => c"ok",
        HjStatus::NullPointer => c"null pointer",
        HjStatus::InvalidArgument => c"invalid argument",
        HjStatus::Config => c"configuration error",
        HjStatus::Solver => c"solver error",
        HjStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
