//! C interface to `advbound`.
//!
//! Models and certificates are opaque handles created and freed through
//! this API. Every fallible function returns an [`AbStatus`]; on failure
//! [`ab_last_error_message`] describes the error for the calling thread.
//! Panics are caught at the boundary and reported as `AB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use advbound::bound::{certify, CertificateResult, CertifyConfig, EnhanceConfig, MinInputs};
use advbound::gp::{
    compute_thresholds, fit_laplace, fit_sparse_dtc, latent_gradient, predict_latent, read_model,
    regression_weights, write_model, LabeledDataset, LatentModel, OptimizerConfig, ThresholdPair,
    DEFAULT_LAPLACE_MAX_ITER, DEFAULT_LAPLACE_TOL,
};
use advbound::kernel::{KernelSpec, PointSet};
use advbound::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Factorization failure, non-convergence or a non-finite value.
    Numerical = 4,
    BudgetExceeded = 5,
    Io = 6,
    Format = 7,
    Dataset = 8,
    Config = 9,
    Panic = 10,
}

/// A fitted latent model: weighted EQ kernels over a set of centres.
pub struct AbModel(LatentModel);

/// Per-input bounds and the minimum-input certificate.
pub struct AbCertificate(CertificateResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AbStatus {
    match e {
        Error::DimensionMismatch { .. } => AbStatus::DimensionMismatch,
        Error::InvalidArgument(_) => AbStatus::InvalidArgument,
        Error::NotPositiveDefinite { .. } | Error::NonConvergence { .. } | Error::NonFinite(_) => {
            AbStatus::Numerical
        }
        Error::BudgetExceeded { .. } => AbStatus::BudgetExceeded,
        Error::Io { .. } => AbStatus::Io,
        Error::Format { .. } => AbStatus::Format,
        Error::Dataset(_) => AbStatus::Dataset,
        Error::Config(_) => AbStatus::Config,
    }
}

struct Fail(AbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for `ab_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("panic: {msg}"));
            AbStatus::Panic
        }
    }
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
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn model_ref<'a>(m: *const AbModel) -> Result<&'a LatentModel, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn cert_ref<'a>(c: *const AbCertificate) -> Result<&'a CertificateResult, Fail> {
    c.as_ref().map(|c| &c.0).ok_or_else(|| null("certificate"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(AbStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn points(p: *const f64, rows: usize, dims: usize, what: &str) -> Result<PointSet, Fail> {
    let len = rows
        .checked_mul(dims)
        .ok_or_else(|| Fail(AbStatus::InvalidArgument, format!("{what} size overflows")))?;
    Ok(PointSet::new(rows, dims, slice(p, len, what)?.to_vec())?)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null when none has
/// failed. The pointer stays valid until the next failing call on the same
/// thread.
#[no_mangle]
pub extern "C" fn ab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from row-major `m x d` centres and `m` weights.
///
/// # Safety
/// `centers` must point to `m * d` doubles, `alpha` to `m` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ab_model_from_parts(
    centers: *const f64,
    m: usize,
    d: usize,
    alpha: *const f64,
    variance: f64,
    lengthscale: f64,
    noise_variance: f64,
    out: *mut *mut AbModel,
) -> AbStatus {
    guard(|| {
        let c = points(centers, m, d, "centers")?;
        let a = slice(alpha, m, "alpha")?.to_vec();
        let model = LatentModel::new(c, a, KernelSpec::new(variance, lengthscale)?, noise_variance)?;
        write_out(out, Box::into_raw(Box::new(AbModel(model))))
    })
}

/// Fits a Laplace GP classifier on row-major `n x d` inputs in [0, 1] and
/// labels of +1 or -1. With `inducing > 0` the model is compressed to that
/// many DTC inducing inputs.
///
/// # Safety
/// `x` must point to `n * d` doubles, `y` to `n` doubles and `out` to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ab_model_fit_gpc(
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    variance: f64,
    lengthscale: f64,
    noise_variance: f64,
    inducing: usize,
    out: *mut *mut AbModel,
) -> AbStatus {
    guard(|| {
        let data = LabeledDataset::new(points(x, n, d, "x")?, slice(y, n, "y")?.to_vec())?;
        let kernel = KernelSpec::new(variance, lengthscale)?;
        let fit = fit_laplace(&data, &kernel, DEFAULT_LAPLACE_TOL, DEFAULT_LAPLACE_MAX_ITER)?;
        let model = if inducing == 0 {
            regression_weights(&data.x, &fit.f_hat, &kernel, noise_variance)?
        } else {
            fit_sparse_dtc(&data.x, &fit.f_hat, &kernel, noise_variance, inducing, &OptimizerConfig::default())?.model
        };
        write_out(out, Box::into_raw(Box::new(AbModel(model))))
    })
}

/// Reads a model written by `ab_model_save` or the command-line `fit`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_model_load(path: *const c_char, out: *mut *mut AbModel) -> AbStatus {
    guard(|| {
        let model = read_model(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(AbModel(model))))
    })
}

/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ab_model_save(model: *const AbModel, path: *const c_char) -> AbStatus {
    guard(|| Ok(write_model(model_ref(model)?, path_arg(path)?)?))
}

/// Frees a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ab_model_free(model: *mut AbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_model_dims(model: *const AbModel, out: *mut usize) -> AbStatus {
    guard(|| write_out(out, model_ref(model)?.dims()))
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_model_num_centers(model: *const AbModel, out: *mut usize) -> AbStatus {
    guard(|| write_out(out, model_ref(model)?.num_centers()))
}

/// Latent mean at `n` row-major points of the model's dimension.
///
/// # Safety
/// `x` must point to `n * dims` doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_predict_latent(
    model: *const AbModel,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = predict_latent(m, &points(x, n, m.dims(), "x")?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&f);
        Ok(())
    })
}

/// Gradient of the latent mean at one point.
///
/// # Safety
/// `x` must point to `dims` doubles and `out` to `dims` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_latent_gradient(model: *const AbModel, x: *const f64, out: *mut f64) -> AbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let g = latent_gradient(m, slice(x, m.dims(), "x")?)?;
        slice_mut(out, m.dims(), "out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// 5th and 95th percentile latents over `n` training points.
///
/// # Safety
/// `xtrain` must point to `n * dims` doubles; `f05` and `f95` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_thresholds(
    model: *const AbModel,
    xtrain: *const f64,
    n: usize,
    f05: *mut f64,
    f95: *mut f64,
) -> AbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let t = compute_thresholds(m, &points(xtrain, n, m.dims(), "xtrain")?)?;
        write_out(f05, t.f05)?;
        write_out(f95, t.f95)
    })
}

/// Bounds every input with `slices` slices per axis. `enhance_top_k = 0`
/// disables enhancement; otherwise the top sequences are refined to
/// `enhance_fine_slices` slices.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_certify(
    model: *const AbModel,
    f05: f64,
    f95: f64,
    slices: usize,
    enhance_top_k: usize,
    enhance_fine_slices: usize,
    out: *mut *mut AbCertificate,
) -> AbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let cfg = CertifyConfig {
            slices,
            enhance: (enhance_top_k > 0).then_some(EnhanceConfig {
                top_k: enhance_top_k,
                fine_slices: enhance_fine_slices,
            }),
            ..CertifyConfig::default()
        };
        let cert = certify(m, &ThresholdPair::new(f05, f95)?, &cfg)?;
        write_out(out, Box::into_raw(Box::new(AbCertificate(cert))))
    })
}

/// Frees a certificate handle. Null is ignored.
///
/// # Safety
/// `cert` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ab_certificate_free(cert: *mut AbCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Number of per-input bounds.
///
/// # Safety
/// `cert` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ab_certificate_dims(cert: *const AbCertificate, out: *mut usize) -> AbStatus {
    guard(|| write_out(out, cert_ref(cert)?.per_dim_bounds.len()))
}

/// Copies the per-input bounds; `len` must equal `ab_certificate_dims`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_certificate_bounds(cert: *const AbCertificate, out: *mut f64, len: usize) -> AbStatus {
    guard(|| {
        let b = &cert_ref(cert)?.per_dim_bounds;
        if len != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                got: len,
            }
            .into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(b);
        Ok(())
    })
}

/// Fewest inputs an attacker must change. `unbounded_safe` is set to 1
/// when no number of inputs suffices, and `count` is then 0.
///
/// # Safety
/// `count` and `unbounded_safe` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ab_certificate_min_inputs(
    cert: *const AbCertificate,
    count: *mut usize,
    unbounded_safe: *mut u8,
) -> AbStatus {
    guard(|| {
        let (n, safe) = match cert_ref(cert)?.certified_min_inputs {
            MinInputs::Count(n) => (n, 0),
            MinInputs::UnboundedSafe => (0, 1),
        };
        write_out(count, n)?;
        write_out(unbounded_safe, safe)
    })
}
