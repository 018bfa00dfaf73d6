//! C ABI over the `taildep` library.
//!
//! Every fallible function returns a `TaildepStatus` and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with `taildep_last_error_message`. Models are opaque handles created
//! by `taildep_model_*` constructors and released with `taildep_model_free`.
//! Index arguments are zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use taildep::estimators::{self, EstimatorError};
use taildep::model::{CorrelationMatrix, EllipticalModel, ModelError, ModelSpec};
use taildep::oracle::{self, OracleError};
use taildep::qp::{self, QpError};
use taildep::sampling;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaildepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ModelError = 3,
    QpError = 4,
    OracleError = 5,
    /// The log-probability is below the representable floor.
    Underflow = 6,
    EstimatorError = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque elliptical model.
pub struct TaildepModel {
    inner: EllipticalModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(TaildepStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(TaildepStatus::ModelError, e.to_string())
    }
}

impl From<QpError> for Failure {
    fn from(e: QpError) -> Self {
        Failure(TaildepStatus::QpError, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let status = match e {
            OracleError::Underflow { .. } => TaildepStatus::Underflow,
            _ => TaildepStatus::OracleError,
        };
        Failure(status, e.to_string())
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        Failure(TaildepStatus::EstimatorError, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(TaildepStatus::InvalidArgument, msg.to_string())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> TaildepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TaildepStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TaildepStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return Err(Failure(TaildepStatus::NullPointer, concat!("null pointer: ", stringify!($p)).into()));
        })+
    };
}

unsafe fn matrix_rows(corr: *const f64, k: usize) -> Result<Vec<Vec<f64>>, Failure> {
    non_null!(corr);
    if k < 2 {
        return Err(invalid("dimension must be at least 2"));
    }
    let flat = slice::from_raw_parts(corr, k * k);
    Ok(flat.chunks(k).map(<[f64]>::to_vec).collect())
}

/// Message for the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn taildep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn taildep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from a JSON document with keys `correlation` and `radial`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taildep_model_from_json(json: *const c_char, out: *mut *mut TaildepModel) -> TaildepStatus {
    guard(|| {
        non_null!(json, out);
        let text = CStr::from_ptr(json).to_str().map_err(|_| invalid("model JSON is not UTF-8"))?;
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| invalid(&e.to_string()))?;
        let inner = spec.build()?;
        *out = Box::into_raw(Box::new(TaildepModel { inner }));
        Ok(())
    })
}

/// Builds a Gaussian model from a row-major `k × k` correlation matrix.
///
/// # Safety
/// `corr` must point to `k*k` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn taildep_model_gaussian(corr: *const f64, k: usize, out: *mut *mut TaildepModel) -> TaildepStatus {
    guard(|| {
        non_null!(out);
        let sigma = CorrelationMatrix::new(&matrix_rows(corr, k)?)?;
        *out = Box::into_raw(Box::new(TaildepModel { inner: EllipticalModel::gaussian(sigma) }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from a `taildep_model_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn taildep_model_free(model: *mut TaildepModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of a model, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn taildep_model_dim(model: *const TaildepModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Solves the constrained quadratic program on the index set. Writes `q` and
/// the active set (zero-based, ascending) into `active`, which must hold `m`
/// entries; `active_len` receives its length.
///
/// # Safety
/// `corr` must point to `k*k` doubles, `index_set` and `active` to `m` entries.
#[no_mangle]
pub unsafe extern "C" fn taildep_solve_alpha(
    corr: *const f64,
    k: usize,
    index_set: *const usize,
    m: usize,
    q: *mut f64,
    active: *mut usize,
    active_len: *mut usize,
) -> TaildepStatus {
    guard(|| {
        non_null!(index_set, q, active, active_len);
        let sigma = CorrelationMatrix::new(&matrix_rows(corr, k)?)?;
        let idx = slice::from_raw_parts(index_set, m);
        let sol = qp::solve_alpha(&sigma, idx)?;
        *q = sol.q;
        slice::from_raw_parts_mut(active, m)[..sol.active_set.len()].copy_from_slice(&sol.active_set);
        *active_len = sol.active_set.len();
        Ok(())
    })
}

/// `ln P{X_j > a_j for all j}` for a model of dimension 2 or 3; `a` holds one
/// positive threshold per coordinate.
///
/// # Safety
/// `model` must be live, `a` must hold `dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn taildep_joint_log_survival(
    model: *const TaildepModel,
    a: *const f64,
    out: *mut f64,
) -> TaildepStatus {
    guard(|| {
        non_null!(model, a, out);
        let m = &(*model).inner;
        let cons: Vec<(usize, f64)> = slice::from_raw_parts(a, m.dim()).iter().copied().enumerate().collect();
        *out = oracle::joint_survival(m, &cons)?;
        Ok(())
    })
}

/// `ln S̃_u(x)` on an index set of size 2 or 3.
///
/// # Safety
/// `index_set` and `x` must hold `m` entries; `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn taildep_log_s_tilde(
    model: *const TaildepModel,
    index_set: *const usize,
    x: *const f64,
    m: usize,
    u: f64,
    out: *mut f64,
) -> TaildepStatus {
    guard(|| {
        non_null!(model, index_set, x, out);
        let idx = slice::from_raw_parts(index_set, m);
        if idx.iter().any(|&i| i >= (*model).inner.dim()) {
            return Err(invalid("index outside the model dimension"));
        }
        *out = oracle::s_tilde(&(*model).inner, idx, slice::from_raw_parts(x, m), u)?;
        Ok(())
    })
}

/// Draws `n` rows into `out` (row-major, `n*dim` doubles, `capacity` entries available).
///
/// # Safety
/// `out` must hold `capacity` doubles; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn taildep_simulate(
    model: *const TaildepModel,
    n: usize,
    seed: u64,
    out: *mut f64,
    capacity: usize,
) -> TaildepStatus {
    guard(|| {
        non_null!(model, out);
        let m = &(*model).inner;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        if capacity < n * m.dim() {
            return Err(Failure(TaildepStatus::BufferTooSmall, format!("need {} doubles", n * m.dim())));
        }
        let s = sampling::sample_elliptical(m, n, seed)?;
        slice::from_raw_parts_mut(out, s.data.len()).copy_from_slice(&s.data);
        Ok(())
    })
}

/// Kendall's tau of two samples of length `n`.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn taildep_kendall_tau(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> TaildepStatus {
    guard(|| {
        non_null!(x, y, out);
        *out = estimators::kendall_tau(slice::from_raw_parts(x, n), slice::from_raw_parts(y, n))?;
        Ok(())
    })
}

/// Weibull tail coefficient estimate from the `kn` largest positive observations.
///
/// # Safety
/// `x` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn taildep_theta_hat(x: *const f64, n: usize, kn: usize, out: *mut f64) -> TaildepStatus {
    guard(|| {
        non_null!(x, out);
        *out = estimators::theta_hat(slice::from_raw_parts(x, n), kn)?;
        Ok(())
    })
}
