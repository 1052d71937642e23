//! C ABI over the `halfspace` library.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Strings returned through `char **` are released with
//! [`hs_string_free`]. Every entry point returns an [`HsStatus`]; on failure
//! [`hs_last_error_message`] describes the error for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use halfspace::classify::{classify, Classification, ClassifyError, Payload, Verdict};
use halfspace::cli::{parse_spec, SpecFileError};
use halfspace::expr::{parse_expr, Expr};
use halfspace::model::ProblemSpec;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidSpec = 4,
    EvalError = 5,
    OracleError = 6,
    Panic = 7,
    InvalidArgument = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsVerdict {
    NonExistence = 0,
    Unique = 1,
    Family = 2,
    Inconclusive = 3,
}

/// Parsed expression in `x1..x{n}`.
pub struct HsExpr {
    expr: Expr,
    n_vars: usize,
}

/// Validated problem.
pub struct HsProblem {
    spec: ProblemSpec,
}

/// Classifier result.
pub struct HsClassification {
    result: Classification,
    n_tangential: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (HsStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (HsStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn c_text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (HsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(CString::from_raw(s))));
    }
}

/// Parses `text` as an expression in `x1..x{n_vars}`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_expr_parse(text: *const c_char, n_vars: usize, out: *mut *mut HsExpr) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = c_text(text, "text")?;
        let expr = parse_expr(s, n_vars).map_err(|e| (HsStatus::ParseError, e.to_string()))?;
        put(out, Box::into_raw(Box::new(HsExpr { expr, n_vars })), "out")
    })
}

/// Evaluates at `point[0..len]`; `len` must equal the variable count.
///
/// # Safety
/// `point` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_expr_eval(e: *const HsExpr, point: *const f64, len: usize, out: *mut f64) -> HsStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        if len != e.n_vars {
            return Err((HsStatus::InvalidArgument, format!("point has {len} components, expected {}", e.n_vars)));
        }
        let x = slice(point, len, "point")?;
        let v = e.expr.eval(x).map_err(|err| (HsStatus::EvalError, err.to_string()))?;
        put(out, v, "out")
    })
}

/// `∂/∂x{axis+1}` as a new handle.
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_expr_differentiate(e: *const HsExpr, axis: usize, out: *mut *mut HsExpr) -> HsStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        if axis >= e.n_vars {
            return Err((HsStatus::InvalidArgument, format!("axis {axis} out of range for {} variables", e.n_vars)));
        }
        let d = HsExpr { expr: e.expr.differentiate(axis), n_vars: e.n_vars };
        put(out, Box::into_raw(Box::new(d)), "out")
    })
}

/// Canonical text of the expression; free with `hs_string_free`.
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_expr_to_string(e: *const HsExpr, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, owned_string(e.expr.to_string()), "out")
    })
}

/// # Safety
/// `e` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_expr_free(e: *mut HsExpr) {
    if !e.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(e))));
    }
}

/// Parses a JSON problem file (schema version 1).
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_problem_from_json(json: *const c_char, out: *mut *mut HsProblem) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = c_text(json, "json")?;
        let loaded = parse_spec(s).map_err(|e| {
            let status = match e {
                SpecFileError::Json { .. } | SpecFileError::Expr { .. } | SpecFileError::ModeKey { .. } => HsStatus::ParseError,
                _ => HsStatus::InvalidSpec,
            };
            (status, e.to_string())
        })?;
        put(out, Box::into_raw(Box::new(HsProblem { spec: loaded.problem })), "out")
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_problem_free(p: *mut HsProblem) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Runs the classifier.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_classify(p: *const HsProblem, out: *mut *mut HsClassification) -> HsStatus {
    guard(|| {
        let p = handle(p, "problem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let result = classify(&p.spec).map_err(|e| {
            let status = match &e {
                ClassifyError::Model(_) | ClassifyError::Spec(_) => HsStatus::InvalidSpec,
                ClassifyError::Verify(halfspace::verify::VerifyError::Oracle(_)) => HsStatus::OracleError,
                _ => HsStatus::EvalError,
            };
            (status, e.to_string())
        })?;
        let c = HsClassification { result, n_tangential: p.spec.n_tangential() };
        put(out, Box::into_raw(Box::new(c)), "out")
    })
}

/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_classification_verdict(c: *const HsClassification, out: *mut HsVerdict) -> HsStatus {
    guard(|| {
        let c = handle(c, "classification")?;
        let v = match c.result.verdict {
            Verdict::NonExistence => HsVerdict::NonExistence,
            Verdict::Unique => HsVerdict::Unique,
            Verdict::Family => HsVerdict::Family,
            Verdict::Inconclusive => HsVerdict::Inconclusive,
        };
        put(out, v, "out")
    })
}

/// Rule id such as `R-THETA-NONNEG`, or NULL written to `out` when no rule
/// applied. Free a non-NULL result with `hs_string_free`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_classification_rule_id(c: *const HsClassification, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let c = handle(c, "classification")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, c.result.rule_id.map_or(ptr::null_mut(), |r| owned_string(r.to_string())), "out")
    })
}

/// Full classification as JSON; free with `hs_string_free`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_classification_to_json(c: *const HsClassification, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let c = handle(c, "classification")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&c.result).map_err(|e| (HsStatus::EvalError, e.to_string()))?;
        put(out, owned_string(s), "out")
    })
}

/// Evaluates the payload at `(xp[0..len], xn)`. For a family, `param` selects
/// the member; it is ignored for a single series.
///
/// # Safety
/// `xp` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_classification_payload_eval(
    c: *const HsClassification,
    xp: *const f64,
    len: usize,
    xn: f64,
    param: f64,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        let c = handle(c, "classification")?;
        if len != c.n_tangential {
            return Err((HsStatus::InvalidArgument, format!("x' has {len} components, expected {}", c.n_tangential)));
        }
        let x = slice(xp, len, "xp")?;
        let series = match &c.result.payload {
            Payload::Series { series, .. } => series.clone(),
            Payload::Family(f) => f.member(param),
            _ => return Err((HsStatus::InvalidArgument, "the classification has no solution payload".into())),
        };
        let v = series.synth(x, xn).map_err(|e| (HsStatus::EvalError, e.to_string()))?;
        put(out, v, "out")
    })
}

/// # Safety
/// `c` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_classification_free(c: *mut HsClassification) {
    if !c.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(c))));
    }
}
