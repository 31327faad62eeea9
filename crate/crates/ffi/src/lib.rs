//! C ABI for the solver. The surface follows the usual conventions for
//! language bindings:
//!
//! - opaque handles (`ssn_problem`, `ssn_config`, `ssn_report`) created and
//!   destroyed by paired functions;
//! - every fallible call returns an `int` error code (0 = ok) and writes
//!   its result through an out-pointer;
//! - the last error message is kept per thread and readable through
//!   [`ssn_last_error`] until the next failing call on that thread.
//!
//! The matching header is `include/ssnsdp.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::ptr;

use ssnsdp::solver::{solve, Preset, SolveReport, SolveStatus, SolverConfig};
use ssnsdp::warmstart::{admm_warmstart, WarmstartConfig};
use ssnsdp::SdpProblem;

pub const SSN_OK: c_int = 0;
pub const SSN_ERR_NULL: c_int = 1;
pub const SSN_ERR_UTF8: c_int = 2;
pub const SSN_ERR_PARSE: c_int = 3;
pub const SSN_ERR_IO: c_int = 4;
pub const SSN_ERR_INVALID: c_int = 5;
pub const SSN_ERR_NUMERIC: c_int = 6;

pub const SSN_STATUS_OPTIMAL: c_int = 0;
pub const SSN_STATUS_MAX_ITER: c_int = 1;
pub const SSN_STATUS_LINESEARCH_FAIL: c_int = 2;
pub const SSN_STATUS_LINEAR_SOLVER_FAIL: c_int = 3;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(code: c_int, msg: impl Into<String>) -> c_int {
    let msg = msg.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg).ok();
    });
    code
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |s| s.as_ptr())
    })
}

/// Opaque SDP instance.
pub struct SsnProblem(SdpProblem);

/// Opaque solver configuration (Newton constants plus warm-start options).
pub struct SsnConfig {
    solver: SolverConfig,
    warmstart: WarmstartConfig,
    use_warmstart: bool,
}

/// Opaque solve outcome.
pub struct SsnReport(SolveReport);

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        return Err(set_error(SSN_ERR_NULL, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(SSN_ERR_UTF8, "string argument is not valid UTF-8"))
}

fn put<T>(out: *mut *mut T, value: T) -> c_int {
    if out.is_null() {
        return set_error(SSN_ERR_NULL, "null out-pointer");
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    SSN_OK
}

/// Parses single-block SDPA sparse text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_problem_parse_sdpa(
    text: *const c_char,
    out: *mut *mut SsnProblem,
) -> c_int {
    let text = match read_str(text) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match ssnsdp::sdpa::read_sdpa(text) {
        Ok(p) => put(out, SsnProblem(p)),
        Err(e) => set_error(SSN_ERR_PARSE, e.to_string()),
    }
}

/// Reads and parses an SDPA file from disk.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssn_problem_read_file(
    path: *const c_char,
    out: *mut *mut SsnProblem,
) -> c_int {
    let path = match read_str(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return set_error(SSN_ERR_IO, format!("{path}: {e}")),
    };
    match ssnsdp::sdpa::read_sdpa(&text) {
        Ok(mut p) => {
            let stem = std::path::Path::new(path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            p.set_name(stem);
            put(out, SsnProblem(p))
        }
        Err(e) => set_error(SSN_ERR_PARSE, format!("{path}: {e}")),
    }
}

/// # Safety
/// `p` must be a handle from a `ssn_problem_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssn_problem_free(p: *mut SsnProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Matrix order `n`, or -1 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_problem_dim(p: *const SsnProblem) -> c_int {
    p.as_ref().map_or(-1, |p| p.0.n() as c_int)
}

/// Number of equality constraints `m`, or -1 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_problem_num_constraints(p: *const SsnProblem) -> c_int {
    p.as_ref().map_or(-1, |p| p.0.m() as c_int)
}

/// Default configuration (the maxcut parameter family, warm start on).
#[no_mangle]
pub extern "C" fn ssn_config_new(out: *mut *mut SsnConfig) -> c_int {
    put(
        out,
        SsnConfig {
            solver: SolverConfig::default(),
            warmstart: WarmstartConfig::default(),
            use_warmstart: true,
        },
    )
}

/// Configuration from a named preset: "maxcut", "theta", "biq" or
/// "clustering".
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssn_config_preset(
    name: *const c_char,
    out: *mut *mut SsnConfig,
) -> c_int {
    let name = match read_str(name) {
        Ok(n) => n,
        Err(code) => return code,
    };
    let Some(preset) = Preset::parse(name) else {
        return set_error(SSN_ERR_INVALID, format!("unknown preset `{name}`"));
    };
    put(
        out,
        SsnConfig {
            solver: preset.solver_config(),
            warmstart: preset.warmstart_config(),
            use_warmstart: true,
        },
    )
}

/// # Safety
/// `c` must be a handle from a `ssn_config_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssn_config_free(c: *mut SsnConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

macro_rules! config_setter {
    ($name:ident, $field:ident, $ty:ty) => {
        /// # Safety
        /// `c` must be null or a live config handle.
        #[no_mangle]
        pub unsafe extern "C" fn $name(c: *mut SsnConfig, value: $ty) -> c_int {
            match c.as_mut() {
                Some(c) => {
                    c.solver.$field = value as _;
                    SSN_OK
                }
                None => set_error(SSN_ERR_NULL, "null config handle"),
            }
        }
    };
}

config_setter!(ssn_config_set_tol, tol, c_double);
config_setter!(ssn_config_set_eps_hat, eps_hat, c_double);
config_setter!(ssn_config_set_nu, nu, c_double);
config_setter!(ssn_config_set_kappa_c, kappa_c, c_double);

/// Newton iteration cap.
///
/// # Safety
/// `c` must be null or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_config_set_max_iterations(c: *mut SsnConfig, value: c_int) -> c_int {
    match c.as_mut() {
        Some(c) if value >= 0 => {
            c.solver.max_newton = value as usize;
            SSN_OK
        }
        Some(_) => set_error(SSN_ERR_INVALID, "max iterations must be nonnegative"),
        None => set_error(SSN_ERR_NULL, "null config handle"),
    }
}

/// Enable (nonzero) or disable (zero) the ADMM warm start.
///
/// # Safety
/// `c` must be null or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_config_set_warmstart(c: *mut SsnConfig, enabled: c_int) -> c_int {
    match c.as_mut() {
        Some(c) => {
            c.use_warmstart = enabled != 0;
            SSN_OK
        }
        None => set_error(SSN_ERR_NULL, "null config handle"),
    }
}

/// Solves `problem` under `config` and hands back a report handle.
///
/// # Safety
/// `problem` and `config` must be null or live handles; `out` must be a
/// valid pointer to receive the report handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_solve(
    problem: *const SsnProblem,
    config: *const SsnConfig,
    out: *mut *mut SsnReport,
) -> c_int {
    let Some(problem) = problem.as_ref() else {
        return set_error(SSN_ERR_NULL, "null problem handle");
    };
    let Some(config) = config.as_ref() else {
        return set_error(SSN_ERR_NULL, "null config handle");
    };
    if let Err(e) = config.solver.validate() {
        return set_error(SSN_ERR_INVALID, e.to_string());
    }
    let start = if config.use_warmstart {
        match admm_warmstart(&problem.0, &config.warmstart) {
            Ok(ws) => Some(ws.into_starting_point()),
            Err(e) => return set_error(SSN_ERR_NUMERIC, e.to_string()),
        }
    } else {
        None
    };
    match solve(&problem.0, &config.solver, start) {
        Ok(rep) => put(out, SsnReport(rep)),
        Err(e) => set_error(SSN_ERR_NUMERIC, e.to_string()),
    }
}

/// # Safety
/// `r` must be a handle produced by [`ssn_solve`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_free(r: *mut SsnReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Terminal status code, or -1 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_status(r: *const SsnReport) -> c_int {
    r.as_ref().map_or(-1, |r| match r.0.status {
        SolveStatus::Optimal => SSN_STATUS_OPTIMAL,
        SolveStatus::MaxIter => SSN_STATUS_MAX_ITER,
        SolveStatus::LinesearchFail => SSN_STATUS_LINESEARCH_FAIL,
        SolveStatus::LinearSolverFail => SSN_STATUS_LINEAR_SOLVER_FAIL,
    })
}

macro_rules! report_count {
    ($name:ident, $field:ident) => {
        /// Iteration count, or -1 for a null handle.
        ///
        /// # Safety
        /// `r` must be null or a live report handle.
        #[no_mangle]
        pub unsafe extern "C" fn $name(r: *const SsnReport) -> i64 {
            r.as_ref().map_or(-1, |r| r.0.$field as i64)
        }
    };
}

report_count!(ssn_report_it0, it0);
report_count!(ssn_report_it1, it1);
report_count!(ssn_report_it2, it2);

macro_rules! report_value {
    ($name:ident, $($path:tt)+) => {
        /// NaN for a null handle.
        ///
        /// # Safety
        /// `r` must be null or a live report handle.
        #[no_mangle]
        pub unsafe extern "C" fn $name(r: *const SsnReport) -> c_double {
            r.as_ref().map_or(f64::NAN, |r| r.0.$($path)+)
        }
    };
}

report_value!(ssn_report_cpu_seconds, cpu_seconds);
report_value!(ssn_report_obj_primal, residuals.obj_primal);
report_value!(ssn_report_obj_dual, residuals.obj_dual);
report_value!(ssn_report_eta_p, residuals.eta_p);
report_value!(ssn_report_eta_d, residuals.eta_d);
report_value!(ssn_report_eta_c, residuals.eta_c);
report_value!(ssn_report_eta_kkt, residuals.eta_kkt);

/// Matrix order of the solution, or -1 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_dim(r: *const SsnReport) -> c_int {
    r.as_ref().map_or(-1, |r| r.0.x.n() as c_int)
}

/// Multiplier count of the solution, or -1 for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_num_multipliers(r: *const SsnReport) -> c_int {
    r.as_ref().map_or(-1, |r| r.0.y.len() as c_int)
}

unsafe fn copy_sym(m: &ssnsdp::SymMat, buf: *mut c_double, len: usize) -> c_int {
    let n = m.n();
    if buf.is_null() {
        return set_error(SSN_ERR_NULL, "null output buffer");
    }
    if len != n * n {
        return set_error(
            SSN_ERR_INVALID,
            format!("buffer holds {len} values, need {}", n * n),
        );
    }
    for i in 0..n {
        for j in 0..n {
            *buf.add(i * n + j) = m.get(i, j);
        }
    }
    SSN_OK
}

/// Copies the primal solution into `buf` (row-major, `len == n * n`).
///
/// # Safety
/// `r` must be a live report handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_copy_x(
    r: *const SsnReport,
    buf: *mut c_double,
    len: usize,
) -> c_int {
    match r.as_ref() {
        Some(r) => copy_sym(&r.0.x, buf, len),
        None => set_error(SSN_ERR_NULL, "null report handle"),
    }
}

/// Copies the dual slack matrix into `buf` (row-major, `len == n * n`).
///
/// # Safety
/// Same contract as [`ssn_report_copy_x`].
#[no_mangle]
pub unsafe extern "C" fn ssn_report_copy_z(
    r: *const SsnReport,
    buf: *mut c_double,
    len: usize,
) -> c_int {
    match r.as_ref() {
        Some(r) => copy_sym(&r.0.z, buf, len),
        None => set_error(SSN_ERR_NULL, "null report handle"),
    }
}

/// Copies the multipliers into `buf` (`len == m`).
///
/// # Safety
/// `r` must be a live report handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ssn_report_copy_y(
    r: *const SsnReport,
    buf: *mut c_double,
    len: usize,
) -> c_int {
    let Some(r) = r.as_ref() else {
        return set_error(SSN_ERR_NULL, "null report handle");
    };
    if buf.is_null() {
        return set_error(SSN_ERR_NULL, "null output buffer");
    }
    if len != r.0.y.len() {
        return set_error(
            SSN_ERR_INVALID,
            format!("buffer holds {len} values, need {}", r.0.y.len()),
        );
    }
    for (k, &v) in r.0.y.iter().enumerate() {
        *buf.add(k) = v;
    }
    SSN_OK
}
