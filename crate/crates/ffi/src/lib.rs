//! C ABI over the `crbsde` solver.
//!
//! Problems and solutions are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`CrbsdeStatus`]; on failure [`crbsde_last_error_message`] describes the
//! error for the calling thread. Strings returned by the library are released
//! with [`crbsde_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crbsde::cli::{config::build_sub, parse_config, run, Command, RunOptions};
use crbsde::finprob::{FProcess, GProcess};
use crbsde::skorokhod::{two_sided_map, BarrierPair};
use crbsde::solver::{solve_penalized, solve_picard, verify_solution, Diagnostics, Problem, SolutionTriple};
use crbsde::Error;

/// Status codes; the nonzero codes from 2 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbsdeStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, bad index or buffer too small.
    InvalidArgument = 1,
    Config = 2,
    Precondition = 3,
    Numerical = 4,
    CapExceeded = 5,
    /// A panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbsdeMethod {
    Picard = 0,
    Penalty = 1,
}

/// Node-indexed output fields of a solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbsdeField {
    Y = 0,
    Z = 1,
    KPlus = 2,
    KMinus = 3,
}

/// A validated problem: tree, subfiltration, driver, obstacles, terminal value.
pub struct CrbsdeProblem {
    problem: Problem,
}

/// Solution triple with its diagnostics.
pub struct CrbsdeSolution {
    solution: SolutionTriple,
    diagnostics: Diagnostics,
    y_g: GProcess,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CrbsdeStatus {
    match e.exit_code() {
        2 => CrbsdeStatus::Config,
        3 => CrbsdeStatus::Precondition,
        4 => CrbsdeStatus::Numerical,
        5 => CrbsdeStatus::CapExceeded,
        _ => CrbsdeStatus::Internal,
    }
}

struct Fail(CrbsdeStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(CrbsdeStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrbsdeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CrbsdeStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal error: panic caught at the C boundary");
            CrbsdeStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn crbsde_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn crbsde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from a scenario config (the CLI JSON format; its
/// `problem` section is required). `seed` drives random trees and
/// subfiltrations.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crbsde_problem_from_json(json: *const c_char, seed: u64, out: *mut *mut CrbsdeProblem) -> CrbsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let cfg = parse_config(str_arg(json, "json")?)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let tree = cfg.tree(&mut rng)?;
        let sub = build_sub(&cfg.sub, tree, &mut rng)?;
        let (problem, _) = cfg.problem_config()?.build(&sub)?;
        *out = Box::into_raw(Box::new(CrbsdeProblem { problem }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`crbsde_problem_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crbsde_problem_free(p: *mut CrbsdeProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of time levels `N + 1`; 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn crbsde_problem_num_levels(p: *const CrbsdeProblem) -> usize {
    p.as_ref().map_or(0, |p| p.problem.tree().steps() + 1)
}

/// Number of nodes at `level`; 0 for a null handle or a level out of range.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn crbsde_problem_level_len(p: *const CrbsdeProblem, level: usize) -> usize {
    match p.as_ref() {
        Some(p) if level <= p.problem.tree().steps() => p.problem.tree().width(level),
        _ => 0,
    }
}

/// Solves by Picard iteration or, with `CRBSDE_METHOD_PENALTY`, by
/// penalization at level `penalty` (ignored otherwise).
///
/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solve(
    p: *const CrbsdeProblem,
    method: CrbsdeMethod,
    penalty: f64,
    out: *mut *mut CrbsdeSolution,
) -> CrbsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let p = &p.as_ref().ok_or_else(|| invalid("problem is null"))?.problem;
        let solution = match method {
            CrbsdeMethod::Picard => solve_picard(p)?,
            CrbsdeMethod::Penalty => {
                if !(penalty >= 0.0) || !penalty.is_finite() {
                    return Err(invalid("penalty must be finite and nonnegative"));
                }
                solve_penalized(p, penalty)?
            }
        };
        let diagnostics = verify_solution(p, &solution);
        let y_g = solution.y_g(p.sub());
        *out = Box::into_raw(Box::new(CrbsdeSolution { solution, diagnostics, y_g }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`crbsde_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_free(s: *mut CrbsdeSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// `Y_0`; NaN for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_y0(s: *const CrbsdeSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.solution.y0())
}

/// Iterations used by the solver; 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_iterations(s: *const CrbsdeSolution) -> usize {
    s.as_ref().map_or(0, |s| s.solution.iterations())
}

/// 1 when every audit of the solution passed, 0 otherwise.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_passed(s: *const CrbsdeSolution) -> i32 {
    s.as_ref().map_or(0, |s| i32::from(s.diagnostics.passed))
}

/// Copies one level of a node-indexed field into `buf`, which must hold at
/// least `crbsde_problem_level_len(level)` values.
///
/// # Safety
/// `s` must be a live solution handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_copy(
    s: *const CrbsdeSolution,
    field: CrbsdeField,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> CrbsdeStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| invalid("solution is null"))?;
        let x: &FProcess = match field {
            CrbsdeField::Y => &s.solution.y,
            CrbsdeField::Z => &s.solution.z,
            CrbsdeField::KPlus => &s.solution.k_plus,
            CrbsdeField::KMinus => &s.solution.k_minus,
        };
        if level >= x.num_levels() {
            return Err(invalid(&format!("level {level} out of range")));
        }
        let values = x.level(level);
        if buf.is_null() || len < values.len() {
            return Err(invalid(&format!("buffer needs {} values", values.len())));
        }
        std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
        Ok(())
    })
}

/// Diagnostics and `E[Y|G]` as a JSON document.
///
/// # Safety
/// `s` must be a live solution handle and `out` a valid pointer. The string
/// is released with [`crbsde_string_free`].
#[no_mangle]
pub unsafe extern "C" fn crbsde_solution_report_json(s: *const CrbsdeSolution, out: *mut *mut c_char) -> CrbsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let s = s.as_ref().ok_or_else(|| invalid("solution is null"))?;
        let doc = serde_json::json!({
            "y0": s.solution.y0(),
            "iterations": s.solution.iterations(),
            "diagnostics": s.diagnostics,
            "y_g": s.y_g,
        });
        *out = into_c_string(doc.to_string());
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn crbsde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Two-sided Skorokhod reflection of the path `x[0..n]` between `lower` and
/// `upper`. Writes `y = x + k` and `k`; `k_plus` and `k_minus` may be null.
///
/// # Safety
/// Input arrays must hold `n` values; non-null outputs must have room for `n`.
#[no_mangle]
pub unsafe extern "C" fn crbsde_skorokhod(
    n: usize,
    x: *const f64,
    lower: *const f64,
    upper: *const f64,
    y: *mut f64,
    k: *mut f64,
    k_plus: *mut f64,
    k_minus: *mut f64,
) -> CrbsdeStatus {
    guard(|| {
        let x = slice_arg(x, n, "x")?;
        let b = BarrierPair::new(slice_arg(lower, n, "lower")?.to_vec(), slice_arg(upper, n, "upper")?.to_vec())?;
        if y.is_null() || k.is_null() {
            return Err(invalid("y and k are required"));
        }
        let r = two_sided_map(x, &b)?;
        for (dst, src) in [(y, &r.y), (k, &r.k), (k_plus, &r.k_plus), (k_minus, &r.k_minus)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, n).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Runs a CLI command (`"solve"`, `"dynkin"`, `"penalize-sweep"`, ...) on a
/// config in memory and returns the JSON report; no files are written.
///
/// # Safety
/// `command` and `config_json` must be NUL-terminated strings and `out` a
/// valid pointer. The string is released with [`crbsde_string_free`].
#[no_mangle]
pub unsafe extern "C" fn crbsde_run_json(
    command: *const c_char,
    config_json: *const c_char,
    seed: u64,
    check: i32,
    out: *mut *mut c_char,
) -> CrbsdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let name = str_arg(command, "command")?;
        let command: Command = serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| invalid(&format!("unknown command `{name}`")))?;
        let cfg = parse_config(str_arg(config_json, "config_json")?)?;
        let output = run(command, &cfg, &RunOptions { seed, check: check != 0 })?;
        *out = into_c_string(output.report_json());
        Ok(())
    })
}
