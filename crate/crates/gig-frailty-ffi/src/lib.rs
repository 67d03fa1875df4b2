//! C ABI for the gig-frailty library: opaque handles, integer status
//! codes, and a thread-local last-error message. The matching header is
//! generated into `include/gig_frailty.h` by the build script.

use gig_frailty::distributions::FrailtyLaw;
use gig_frailty::em::{fit_em, EmConfig, FitResult};
use gig_frailty::inference::rfv;
use gig_frailty::special::log_bessel_k;
use gig_frailty::{Dataset, Error};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};

/// Status code returned by every fallible function of this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GigStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    NumericalError = 4,
    NonConvergence = 5,
    IoError = 6,
}

/// Opaque clustered survival dataset.
pub struct GigDataset(Dataset);

/// Opaque fit result.
pub struct GigFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GigStatus {
    match err {
        Error::Domain { .. } => GigStatus::DomainError,
        Error::InvalidData(_)
        | Error::DimensionMismatch { .. }
        | Error::TooFewFailures { .. }
        | Error::Csv { .. } => GigStatus::InvalidArgument,
        Error::Numerical { .. } | Error::Bracketing { .. } => GigStatus::NumericalError,
        Error::OptimFailure { .. } | Error::AllReplicatesFailed(_) => GigStatus::NonConvergence,
        Error::Io(_) => GigStatus::IoError,
    }
}

fn fail(err: Error) -> GigStatus {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

/// Message of the most recent error on this thread, or NULL if none.
/// The pointer is valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gig_last_error() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Read a dataset from a CSV file with header
/// `cluster_id,time,status,<covariates...>`. On success stores a handle in
/// `*out`; release it with `gig_dataset_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gig_dataset_from_csv(
    path: *const c_char,
    out: *mut *mut GigDataset,
) -> GigStatus {
    if path.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            return GigStatus::InvalidArgument;
        }
    };
    match Dataset::read_csv_path(std::path::Path::new(path)) {
        Ok(d) => {
            *out = Box::into_raw(Box::new(GigDataset(d)));
            GigStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a dataset handle (NULL is a no-op).
///
/// # Safety
/// `ds` must be a pointer from `gig_dataset_from_csv`, released once.
#[no_mangle]
pub unsafe extern "C" fn gig_dataset_free(ds: *mut GigDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of clusters in the dataset.
///
/// # Safety
/// `ds` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gig_dataset_n_clusters(ds: *const GigDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.n_clusters()
}

/// Number of covariate columns in the dataset.
///
/// # Safety
/// `ds` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gig_dataset_n_covariates(ds: *const GigDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.n_covariates()
}

/// Fit the piecewise-exponential GIG frailty model by EM. `lambda` is the
/// fixed GIG index, `k_cuts` the number of interior cut points (failure
/// quantiles), `tol` the convergence tolerance and `max_iter` the
/// iteration cap (pass 0 for the defaults 1e-6 and 500). On success stores
/// a handle in `*out`; release it with `gig_fit_free`. Returns
/// `NonConvergence` (with the handle still stored) when the iteration cap
/// is reached.
///
/// # Safety
/// `ds` must be a valid dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_em(
    ds: *const GigDataset,
    lambda: f64,
    k_cuts: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GigFit,
) -> GigStatus {
    if ds.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    let cfg = EmConfig {
        lambda,
        k_cuts,
        tol: if tol > 0.0 { tol } else { 1e-6 },
        max_iter: if max_iter > 0 { max_iter } else { 500 },
        ..EmConfig::default()
    };
    match fit_em(&(*ds).0, &cfg) {
        Ok(fit) => {
            let converged = fit.converged;
            *out = Box::into_raw(Box::new(GigFit(fit)));
            if converged {
                GigStatus::Ok
            } else {
                set_error("EM reached the iteration cap without converging".into());
                GigStatus::NonConvergence
            }
        }
        Err(e) => fail(e),
    }
}

/// Release a fit handle (NULL is a no-op).
///
/// # Safety
/// `fit` must be a pointer from `gig_fit_em`, released once.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_free(fit: *mut GigFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Maximized observed-data log-likelihood of a fit.
///
/// # Safety
/// `fit` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_loglik(fit: *const GigFit, out: *mut f64) -> GigStatus {
    if fit.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    *out = (*fit).0.loglik;
    GigStatus::Ok
}

/// 1 if the fit converged, 0 otherwise.
///
/// # Safety
/// `fit` must be a valid fit handle.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_converged(fit: *const GigFit) -> c_int {
    if fit.is_null() {
        return 0;
    }
    (*fit).0.converged as c_int
}

/// Estimated frailty parameter alpha.
///
/// # Safety
/// `fit` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_alpha(fit: *const GigFit, out: *mut f64) -> GigStatus {
    if fit.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    *out = (*fit).0.params.alpha;
    GigStatus::Ok
}

/// Standardized frailty variance `Var(Z)/E(Z)^2` of the fitted law.
///
/// # Safety
/// `fit` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_frailty_variance(
    fit: *const GigFit,
    out: *mut f64,
) -> GigStatus {
    if fit.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    *out = (*fit).0.standardized_frailty_variance;
    GigStatus::Ok
}

/// Number of regression coefficients.
///
/// # Safety
/// `fit` must be a valid fit handle.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_n_beta(fit: *const GigFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).0.params.beta.len()
}

/// Regression coefficient by index.
///
/// # Safety
/// `fit` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gig_fit_beta(
    fit: *const GigFit,
    index: usize,
    out: *mut f64,
) -> GigStatus {
    if fit.is_null() || out.is_null() {
        return GigStatus::NullPointer;
    }
    match (&(*fit).0.params.beta).get(index) {
        Some(&b) => {
            *out = b;
            GigStatus::Ok
        }
        None => {
            set_error(format!("beta index {index} out of range"));
            GigStatus::InvalidArgument
        }
    }
}

/// Natural log of the modified Bessel function of the third kind,
/// `ln K_nu(x)` for `x > 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gig_log_bessel_k(nu: f64, x: f64, out: *mut f64) -> GigStatus {
    if out.is_null() {
        return GigStatus::NullPointer;
    }
    match log_bessel_k(nu, x) {
        Ok(v) => {
            *out = v;
            GigStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Relative frailty variance of the GIG law with parameters
/// `(alpha, lambda)` at `s >= 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gig_rfv(alpha: f64, lambda: f64, s: f64, out: *mut f64) -> GigStatus {
    if out.is_null() {
        return GigStatus::NullPointer;
    }
    match rfv(&FrailtyLaw::Gig { alpha, lambda }, s) {
        Ok(v) => {
            *out = v;
            GigStatus::Ok
        }
        Err(e) => fail(e),
    }
}
