//! C ABI over `marsm-core`.
//!
//! Matrices and optimizer states are opaque handles created and destroyed
//! through this API. Every fallible function returns a [`MarsmStatus`];
//! on failure, [`marsm_last_error`] describes the most recent error on the
//! calling thread. Output pointers are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use marsm_core::bench::{self, BenchError, RunConfig, VerifyOptions};
use marsm_core::optim::{clip_fro, mars_m_step, MarsMConfig, MarsMState, MarsMode, OptimError, Schedule, UpdateScale};
use marsm_core::{exact_polar, fro_norm, newton_schulz, LinalgError, Mat, NsScheme, NsVariant, PolarMethod};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NonFinite = 4,
    NoConvergence = 5,
    Degenerate = 6,
    Config = 7,
    Numerical = 8,
    Io = 9,
    VerificationFailed = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarsmNsVariant {
    Cubic = 0,
    Quintic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarsmMode {
    Approximate = 0,
    Exact = 1,
}

/// Opaque dense row-major matrix.
pub struct MarsmMat(Mat);

/// Opaque MARS-M optimizer: configuration plus state for one parameter.
pub struct MarsmMarsM {
    cfg: MarsMConfig,
    state: MarsMState,
}

/// Plain-data MARS-M configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarsmMarsMConfig {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Constant learning rate; ignored when `theory_s > 0`.
    pub lr: f64,
    /// Uses `η_t = (s + t)^(-2/3)` with its paired momentum when positive.
    pub theory_s: f64,
    /// Frobenius clip threshold; non-positive disables clipping.
    pub clip: f64,
    pub mode: MarsmMode,
    /// Quintic Newton–Schulz steps; 0 selects the exact SVD polar factor.
    pub ns_steps: usize,
    /// Update scale `rms_scale·√max(m, n)`; non-positive means unit scale.
    pub rms_scale: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: MarsmStatus, msg: impl Into<String>) -> MarsmStatus {
    set_error(msg);
    status
}

fn linalg_status(e: &LinalgError) -> MarsmStatus {
    match e {
        LinalgError::ShapeMismatch { .. } => MarsmStatus::ShapeMismatch,
        LinalgError::NonFinite { .. } => MarsmStatus::NonFinite,
        LinalgError::NoConvergence { .. } => MarsmStatus::NoConvergence,
        LinalgError::Degenerate(_) => MarsmStatus::Degenerate,
        _ => MarsmStatus::InvalidArgument,
    }
}

fn linalg_fail(e: LinalgError) -> MarsmStatus {
    fail(linalg_status(&e), e.to_string())
}

fn optim_fail(e: OptimError) -> MarsmStatus {
    let status = match &e {
        OptimError::Linalg(l) => linalg_status(l),
        _ => MarsmStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn bench_fail(e: BenchError) -> MarsmStatus {
    let status = match e.exit_code() {
        1 => MarsmStatus::VerificationFailed,
        3 => MarsmStatus::Numerical,
        _ => match &e {
            BenchError::Io { .. } => MarsmStatus::Io,
            _ => MarsmStatus::Config,
        },
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics into [`MarsmStatus::Panic`].
fn guard(f: impl FnOnce() -> MarsmStatus) -> MarsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(MarsmStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, MarsmStatus> {
    p.as_ref()
        .ok_or_else(|| fail(MarsmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, MarsmStatus> {
    if p.is_null() {
        return Err(fail(MarsmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MarsmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn emit_mat(out: *mut *mut MarsmMat, m: Mat) -> MarsmStatus {
    *out = Box::into_raw(Box::new(MarsmMat(m)));
    MarsmStatus::Ok
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message for the last failure on this thread. Valid until the next call
/// into this library from the same thread. Never null.
#[no_mangle]
pub extern "C" fn marsm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn marsm_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Creates a `rows × cols` matrix from `rows·cols` row-major values.
#[no_mangle]
pub unsafe extern "C" fn marsm_mat_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut MarsmMat,
) -> MarsmStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(MarsmStatus::NullPointer, "data and out must be non-null");
        }
        let Some(len) = rows.checked_mul(cols) else {
            return fail(MarsmStatus::InvalidArgument, "dimensions overflow");
        };
        let values = std::slice::from_raw_parts(data, len).to_vec();
        match Mat::new(rows, cols, values) {
            Ok(m) => emit_mat(out, m),
            Err(e) => linalg_fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn marsm_mat_zeros(rows: usize, cols: usize, out: *mut *mut MarsmMat) -> MarsmStatus {
    guard(|| {
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        if rows == 0 || cols == 0 {
            return fail(MarsmStatus::InvalidArgument, "dimensions must be positive");
        }
        emit_mat(out, Mat::zeros(rows, cols))
    })
}

/// Releases a matrix. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn marsm_mat_free(m: *mut MarsmMat) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Row count, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn marsm_mat_rows(m: *const MarsmMat) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// Column count, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn marsm_mat_cols(m: *const MarsmMat) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the row-major entries into `buf`, which must hold `len ≥ rows·cols` values.
#[no_mangle]
pub unsafe extern "C" fn marsm_mat_copy_to(m: *const MarsmMat, buf: *mut f64, len: usize) -> MarsmStatus {
    guard(|| {
        let m = try_status!(deref(m, "matrix"));
        if buf.is_null() {
            return fail(MarsmStatus::NullPointer, "buf is null");
        }
        let src = m.0.as_slice();
        if len < src.len() {
            return fail(
                MarsmStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", src.len()),
            );
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        MarsmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn marsm_fro_norm(m: *const MarsmMat, out: *mut f64) -> MarsmStatus {
    guard(|| {
        let m = try_status!(deref(m, "matrix"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        *out = fro_norm(&m.0);
        MarsmStatus::Ok
    })
}

/// Newton–Schulz polar approximation; zero input yields zero.
#[no_mangle]
pub unsafe extern "C" fn marsm_newton_schulz(
    m: *const MarsmMat,
    variant: MarsmNsVariant,
    steps: usize,
    out: *mut *mut MarsmMat,
) -> MarsmStatus {
    guard(|| {
        let m = try_status!(deref(m, "matrix"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        let mut scheme = NsScheme::quintic(steps);
        scheme.variant = match variant {
            MarsmNsVariant::Cubic => NsVariant::Cubic,
            MarsmNsVariant::Quintic => NsVariant::Quintic,
        };
        emit_mat(out, newton_schulz(&m.0, &scheme))
    })
}

/// Exact polar factor `U·Vᵀ`; fails with `DEGENERATE` on the zero matrix.
#[no_mangle]
pub unsafe extern "C" fn marsm_exact_polar(m: *const MarsmMat, out: *mut *mut MarsmMat) -> MarsmStatus {
    guard(|| {
        let m = try_status!(deref(m, "matrix"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        match exact_polar(&m.0) {
            Ok(p) => emit_mat(out, p),
            Err(e) => linalg_fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn marsm_clip_fro(m: *const MarsmMat, threshold: f64, out: *mut *mut MarsmMat) -> MarsmStatus {
    guard(|| {
        let m = try_status!(deref(m, "matrix"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        if !(threshold > 0.0) {
            return fail(MarsmStatus::InvalidArgument, "threshold must be positive");
        }
        emit_mat(out, clip_fro(&m.0, threshold))
    })
}

/// Library defaults: β 0.95, γ 0.025, λ 0.1, lr 0.01, clip 1, approximate
/// mode, 5 quintic steps, RMS scale 0.2.
#[no_mangle]
pub extern "C" fn marsm_mars_m_default_config() -> MarsmMarsMConfig {
    MarsmMarsMConfig {
        beta: 0.95,
        gamma: 0.025,
        lambda: 0.1,
        lr: 0.01,
        theory_s: 0.0,
        clip: 1.0,
        mode: MarsmMode::Approximate,
        ns_steps: 5,
        rms_scale: 0.2,
    }
}

fn to_core(c: &MarsmMarsMConfig) -> MarsMConfig {
    MarsMConfig {
        beta: c.beta,
        gamma: c.gamma,
        gamma_schedule: None,
        lambda: c.lambda,
        lr: if c.theory_s > 0.0 {
            Schedule::Theory { s: c.theory_s }
        } else {
            Schedule::Constant { lr: c.lr }
        },
        polar: if c.ns_steps == 0 {
            PolarMethod::Svd
        } else {
            PolarMethod::NewtonSchulz(NsScheme::quintic(c.ns_steps))
        },
        scale: if c.rms_scale > 0.0 {
            UpdateScale::Rms(c.rms_scale)
        } else {
            UpdateScale::Unit
        },
        clip: (c.clip > 0.0).then_some(c.clip),
        mode: match c.mode {
            MarsmMode::Approximate => MarsMode::Approximate,
            MarsmMode::Exact => MarsMode::Exact,
        },
    }
}

/// Creates an optimizer for one `rows × cols` parameter.
#[no_mangle]
pub unsafe extern "C" fn marsm_mars_m_new(
    rows: usize,
    cols: usize,
    config: *const MarsmMarsMConfig,
    out: *mut *mut MarsmMarsM,
) -> MarsmStatus {
    guard(|| {
        let c = try_status!(deref(config, "config"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        if rows == 0 || cols == 0 {
            return fail(MarsmStatus::InvalidArgument, "dimensions must be positive");
        }
        let cfg = to_core(c);
        if let Err(e) = cfg.validate() {
            return optim_fail(e);
        }
        let state = MarsMState::new(rows, cols, cfg.mode);
        *out = Box::into_raw(Box::new(MarsmMarsM { cfg, state }));
        MarsmStatus::Ok
    })
}

/// Releases an optimizer. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn marsm_mars_m_free(opt: *mut MarsmMarsM) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Point at which an exact-mode caller evaluates the reference gradient
/// under the current sample (a copy of `x` on the first step).
#[no_mangle]
pub unsafe extern "C" fn marsm_mars_m_prev_point(
    opt: *const MarsmMarsM,
    x: *const MarsmMat,
    out: *mut *mut MarsmMat,
) -> MarsmStatus {
    guard(|| {
        let opt = try_status!(deref(opt, "optimizer"));
        let x = try_status!(deref(x, "x"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        emit_mat(out, opt.state.prev_point(&x.0).clone())
    })
}

/// One MARS-M step. `g_prev_same_sample` must be non-null in exact mode and
/// null in approximate mode. Writes the new parameters to `params_out` and,
/// if `update_rms_out` is non-null, the RMS of the pre-lr update.
#[no_mangle]
pub unsafe extern "C" fn marsm_mars_m_step(
    opt: *mut MarsmMarsM,
    x: *const MarsmMat,
    g: *const MarsmMat,
    g_prev_same_sample: *const MarsmMat,
    params_out: *mut *mut MarsmMat,
    update_rms_out: *mut f64,
) -> MarsmStatus {
    guard(|| {
        let Some(opt) = opt.as_mut() else {
            return fail(MarsmStatus::NullPointer, "optimizer is null");
        };
        let x = try_status!(deref(x, "x"));
        let g = try_status!(deref(g, "g"));
        if params_out.is_null() {
            return fail(MarsmStatus::NullPointer, "params_out is null");
        }
        let g_ref = g_prev_same_sample.as_ref().map(|m| &m.0);
        match mars_m_step(&mut opt.state, &x.0, &g.0, g_ref, &opt.cfg) {
            Ok(step) => {
                if !update_rms_out.is_null() {
                    *update_rms_out = step.direction.rms();
                }
                emit_mat(params_out, step.params)
            }
            Err(e) => optim_fail(e),
        }
    })
}

/// Steps taken so far, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn marsm_mars_m_steps_taken(opt: *const MarsmMarsM) -> u64 {
    opt.as_ref().map_or(0, |o| o.state.t - 1)
}

/// Runs a config file. `out_dir` and `seed` may be null to keep the
/// config's values.
#[no_mangle]
pub unsafe extern "C" fn marsm_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: *const u64,
) -> MarsmStatus {
    guard(|| {
        let path = try_status!(c_str(config_path, "config_path"));
        let mut cfg = match RunConfig::from_file(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return bench_fail(e.into()),
        };
        if let Some(&s) = seed.as_ref() {
            cfg.set_seed(s);
        }
        if !out_dir.is_null() {
            let dir = try_status!(c_str(out_dir, "out_dir"));
            cfg.set_out(Path::new(dir));
        }
        let dir = cfg.out.clone();
        match bench::run(&cfg, &dir) {
            Ok(_) => MarsmStatus::Ok,
            Err(e) => bench_fail(e),
        }
    })
}

/// Log-log slope of the running mean of `column` in a run CSV.
#[no_mangle]
pub unsafe extern "C" fn marsm_fit_slope(
    csv_path: *const c_char,
    column: *const c_char,
    burn_in: f64,
    out: *mut f64,
) -> MarsmStatus {
    guard(|| {
        let path = try_status!(c_str(csv_path, "csv_path"));
        let column = try_status!(c_str(column, "column"));
        if out.is_null() {
            return fail(MarsmStatus::NullPointer, "out is null");
        }
        match bench::fit_slope(Path::new(path), column, burn_in) {
            Ok(s) => {
                *out = s;
                MarsmStatus::Ok
            }
            Err(e) => bench_fail(e.into()),
        }
    })
}

/// Runs the self-check suite with default options. `failed_out`, if
/// non-null, receives the number of failed checks; the status is
/// `VERIFICATION_FAILED` when any check fails.
#[no_mangle]
pub unsafe extern "C" fn marsm_verify(failed_out: *mut usize) -> MarsmStatus {
    guard(|| {
        let checks = bench::verify(&VerifyOptions::default());
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.to_string()).collect();
        if !failed_out.is_null() {
            *failed_out = failed.len();
        }
        if failed.is_empty() {
            MarsmStatus::Ok
        } else {
            fail(MarsmStatus::VerificationFailed, failed.join("\n"))
        }
    })
}
