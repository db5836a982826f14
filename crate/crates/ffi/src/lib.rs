//! C interface to `mimo_crossing`.
//!
//! Every function returns an `int32_t` status (`MCX_OK` on success). On
//! failure the message is kept per thread and read back with
//! [`mcx_last_error`]. Objects cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mimo_crossing::crossing::q_matrix;
use mimo_crossing::immse::{mi_direct, mi_immse, IntegrationConfig};
use mimo_crossing::input::{ConditionalInput, GaussianInput, MixtureInput};
use mimo_crossing::linalg::SymMatrix;
use mimo_crossing::mmse::{conditional_mmse, EstimatorConfig};
use mimo_crossing::path::{snr_path, ChannelPath, DiagonalChannel};
use mimo_crossing::scenario::{run, Format, Outcome, Scenario};
use mimo_crossing::Error;

pub const MCX_OK: i32 = 0;
pub const MCX_ERR_NULL: i32 = 1;
pub const MCX_ERR_UTF8: i32 = 2;
pub const MCX_ERR_CONFIG: i32 = 3;
pub const MCX_ERR_INVALID: i32 = 4;
pub const MCX_ERR_NUMERICAL: i32 = 5;
pub const MCX_ERR_HYPOTHESIS: i32 = 6;
pub const MCX_ERR_RANGE: i32 = 7;
pub const MCX_ERR_PANIC: i32 = 8;

pub const MCX_FORMAT_CSV: i32 = 0;
pub const MCX_FORMAT_JSON: i32 = 1;

/// Input distribution, possibly conditioned on a discrete variable.
pub struct McxInput(ConditionalInput);

/// Diagonal channel path `t ↦ H(t)`.
pub struct McxPath(ChannelPath);

/// Result of running a scenario: named artifacts plus a violation flag.
pub struct McxOutcome {
    inner: Outcome,
    names: Vec<CString>,
    contents: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Json(_) | Error::Io(_) => MCX_ERR_CONFIG,
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Ordering(_)
            | Error::NotPsd { .. }
            | Error::IndefiniteWeight { .. }
            | Error::QuadratureDimension(_) => MCX_ERR_INVALID,
            Error::Hypothesis(_) | Error::Infeasible(_) => MCX_ERR_HYPOTHESIS,
            Error::Bracket(_) | Error::Numerical(_) => MCX_ERR_NUMERICAL,
        };
        Fail(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MCX_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MCX_ERR_PANIC
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MCX_ERR_NULL, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MCX_ERR_UTF8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn estimator(samples: u64, seed: u64) -> EstimatorConfig {
    EstimatorConfig::monte_carlo(samples as usize, seed)
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mcx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a mixture document (`{"dim", "components"}`) or a conditional one
/// (`{"u": [{"q", "input"}]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mcx_input_from_json(json: *const c_char, out: *mut *mut McxInput) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = text(json, "json")?;
        let value: serde_json::Value = serde_json::from_str(s).map_err(Error::from)?;
        let cond = if value.get("u").is_some() {
            serde_json::from_value::<ConditionalInput>(value).map_err(Error::from)?
        } else {
            serde_json::from_value::<MixtureInput>(value).map_err(Error::from)?.into()
        };
        *out = Box::into_raw(Box::new(McxInput(cond)));
        Ok(())
    })
}

/// Equiprobable `±1` per coordinate, independent across `dim` coordinates.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mcx_input_bpsk(dim: usize, out: *mut *mut McxInput) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err(Fail(MCX_ERR_INVALID, "dimension must be positive".into()));
        }
        let m = if dim == 1 { MixtureInput::bpsk() } else { MixtureInput::qpsk_parallel(dim) };
        *out = Box::into_raw(Box::new(McxInput(m.into())));
        Ok(())
    })
}

/// # Safety
/// `input` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn mcx_input_free(input: *mut McxInput) {
    if !input.is_null() {
        drop(Box::from_raw(input));
    }
}

/// # Safety
/// `input` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcx_input_dim(input: *const McxInput) -> usize {
    input.as_ref().map_or(0, |i| i.0.dim())
}

/// Writes the overall covariance, row-major, into `out` (`dim²` entries).
///
/// # Safety
/// `input` must be a live handle and `out` must hold `dim²` doubles.
#[no_mangle]
pub unsafe extern "C" fn mcx_input_covariance(input: *const McxInput, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let input = handle(input, "input")?;
        let n = input.0.dim();
        if len < n * n {
            return Err(Fail(MCX_ERR_RANGE, format!("buffer holds {len} values, need {}", n * n)));
        }
        let dst = slice_mut(out, n * n, "out")?;
        let cov = input.0.overall_covariance();
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = cov.get(i, j);
            }
        }
        Ok(())
    })
}

/// Scalar path `H(t) = √t·I` for `t ∈ [0, snr_max]`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mcx_path_snr(dim: usize, snr_max: f64, out: *mut *mut McxPath) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = snr_path(dim, snr_max)?;
        *out = Box::into_raw(Box::new(McxPath(p)));
        Ok(())
    })
}

/// Path from a document `{"dim", "snr_max"}` or `{"dim", "anchors": [{"t", "gains"}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mcx_path_from_json(json: *const c_char, out: *mut *mut McxPath) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p: ChannelPath = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(McxPath(p)));
        Ok(())
    })
}

/// # Safety
/// `path` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn mcx_path_free(path: *mut McxPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Diagonal gains of `H(t)`.
///
/// # Safety
/// `path` must be a live handle and `out` must hold `len ≥ dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mcx_path_gains(path: *const McxPath, t: f64, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let path = handle(path, "path")?;
        let g = path.0.gains(t);
        if len < g.gains.len() {
            return Err(Fail(MCX_ERR_RANGE, format!("buffer holds {len} values, need {}", g.gains.len())));
        }
        slice_mut(out, g.gains.len(), "out")?.copy_from_slice(&g.gains);
        Ok(())
    })
}

/// Monte-Carlo MMSE matrix of the input behind the diagonal channel `gains`.
/// Values and standard errors are written row-major (`dim²` each).
///
/// # Safety
/// `gains` must hold `dim` doubles, `values` and `errs` `dim²` each.
#[no_mangle]
pub unsafe extern "C" fn mcx_mmse_matrix(
    input: *const McxInput,
    gains: *const f64,
    samples: u64,
    seed: u64,
    values: *mut f64,
    errs: *mut f64,
) -> i32 {
    guard(|| {
        let input = handle(input, "input")?;
        let n = input.0.dim();
        let g = slice(gains, n, "gains")?;
        let h = DiagonalChannel::new(g.to_vec())?.matrix();
        let est = conditional_mmse(&input.0, &h, &estimator(samples, seed))?;
        let v = slice_mut(values, n * n, "values")?;
        let e = slice_mut(errs, n * n, "errs")?;
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = est.matrix.get(i, j);
                e[i * n + j] = est.std_err.get(i, j);
            }
        }
        Ok(())
    })
}

/// `Q(t) = E_G(t) − E(t)` against a Gaussian reference with covariance
/// `gauss_cov` (row-major, `dim²`). Outputs are row-major.
///
/// # Safety
/// Pointers must reference buffers of the sizes given above.
#[no_mangle]
pub unsafe extern "C" fn mcx_q_matrix(
    input: *const McxInput,
    gauss_cov: *const f64,
    path: *const McxPath,
    t: f64,
    samples: u64,
    seed: u64,
    values: *mut f64,
    errs: *mut f64,
) -> i32 {
    guard(|| {
        let input = handle(input, "input")?;
        let path = handle(path, "path")?;
        let n = input.0.dim();
        let c = slice(gauss_cov, n * n, "gauss_cov")?;
        let rows: Vec<Vec<f64>> = c.chunks(n).map(<[f64]>::to_vec).collect();
        let g = GaussianInput::new(SymMatrix::from_rows(&rows)?)?;
        let q = q_matrix(&input.0, &g, &path.0, t, &estimator(samples, seed))?;
        let v = slice_mut(values, n * n, "values")?;
        let e = slice_mut(errs, n * n, "errs")?;
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = q.value.get(i, j);
                e[i * n + j] = q.err.get(i, j);
            }
        }
        Ok(())
    })
}

/// Mutual information (nats) at the end of the path, computed twice:
/// directly and by integrating the MMSE along the path. Any of the output
/// pointers may be null.
///
/// # Safety
/// `input` and `path` must be live handles; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcx_mutual_information(
    input: *const McxInput,
    path: *const McxPath,
    t_end: f64,
    samples: u64,
    seed: u64,
    direct: *mut f64,
    direct_err: *mut f64,
    integral: *mut f64,
    integral_err: *mut f64,
) -> i32 {
    guard(|| {
        let input = handle(input, "input")?;
        let path = handle(path, "path")?;
        let cfg = estimator(samples, seed);
        let h = path.0.gains(t_end).matrix();
        let d = mi_direct(&input.0, &h, &cfg)?;
        let i = mi_immse(&input.0, &path.0, t_end, &cfg, &IntegrationConfig::default())?;
        for (p, v) in [(direct, d.value), (direct_err, d.std_err), (integral, i.value), (integral_err, i.std_err)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Runs a scenario document. `base_dir` (may be null) resolves a relative
/// `input_file`. `format` is `MCX_FORMAT_CSV` or `MCX_FORMAT_JSON`.
///
/// # Safety
/// `config` must be a NUL-terminated string, `base_dir` null or one, and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mcx_scenario_run(
    config: *const c_char,
    base_dir: *const c_char,
    format: i32,
    out: *mut *mut McxOutcome,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = text(config, "config")?;
        let base = if base_dir.is_null() { "." } else { text(base_dir, "base_dir")? };
        let format = match format {
            MCX_FORMAT_CSV => Format::Csv,
            MCX_FORMAT_JSON => Format::Json,
            other => return Err(Fail(MCX_ERR_INVALID, format!("unknown format {other}"))),
        };
        let (s, canonical) = Scenario::parse(cfg, Path::new(base))?;
        let inner = run(&s, &canonical, format)?;
        let c = |s: &str| CString::new(s.replace('\0', " ")).unwrap_or_default();
        let names = inner.artifacts.iter().map(|a| c(&a.name)).collect();
        let contents = inner.artifacts.iter().map(|a| c(&a.contents)).collect();
        *out = Box::into_raw(Box::new(McxOutcome { inner, names, contents }));
        Ok(())
    })
}

/// # Safety
/// `outcome` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn mcx_outcome_free(outcome: *mut McxOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcx_outcome_artifact_count(outcome: *const McxOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.names.len())
}

/// Artifact file name, or null when `index` is out of range. Owned by the outcome.
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcx_outcome_artifact_name(outcome: *const McxOutcome, index: usize) -> *const c_char {
    outcome
        .as_ref()
        .and_then(|o| o.names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Artifact body, or null when `index` is out of range. Owned by the outcome.
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcx_outcome_artifact_contents(outcome: *const McxOutcome, index: usize) -> *const c_char {
    outcome
        .as_ref()
        .and_then(|o| o.contents.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// `1` when a checked property failed, `0` otherwise.
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcx_outcome_violation(outcome: *const McxOutcome) -> i32 {
    outcome.as_ref().map_or(0, |o| o.inner.violation as i32)
}
