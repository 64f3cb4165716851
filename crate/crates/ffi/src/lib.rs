//! C interface to `gtreg`.
//!
//! Models are opaque handles created by [`gtreg_fit`] and released with
//! [`gtreg_model_free`]. Every function returns a [`GtregStatus`]; on
//! failure [`gtreg_last_error`] describes the problem. Covariate vectors
//! and data are in raw units; `x` data matrices are row-major `n × p`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gtreg::cli::parse_preset;
use gtreg::dictionary::{build_dictionary, Sample};
use gtreg::drf::{default_u_grid, default_x_grid, DrfEvaluator, Estimate};
use gtreg::duality::recover_dual;
use gtreg::error::GtrError;
use gtreg::inference::sandwich;
use gtreg::solver::{fit_ml, fit_ml_with_repair, RepairConfig, SolverConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NotConverged = 4,
    QgmFailed = 5,
    /// A level or point where the fitted distribution is undefined.
    DomainError = 6,
    MissingCovariance = 7,
    Panic = 99,
}

/// Fit statistics of a model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtregFitSummary {
    pub n: usize,
    pub num_covariates: usize,
    pub num_coefficients: usize,
    pub converged: c_int,
    pub qgm_passed: c_int,
    pub repair_rounds: usize,
    pub score_norm: f64,
    /// Log-likelihood in raw outcome units.
    pub loglik: f64,
    pub duality_gap: f64,
    pub dual_residual: f64,
}

/// A fitted model. Opaque to C.
pub struct GtregModel {
    eval: DrfEvaluator,
    summary: GtregFitSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &GtrError) -> GtregStatus {
    match e {
        GtrError::EmptyData | GtrError::NonFiniteData { .. } | GtrError::DimensionMismatch { .. } => GtregStatus::DataError,
        GtrError::FirstStepNotConverged => GtregStatus::NotConverged,
        GtrError::LevelUnattainable { .. } | GtrError::DomainViolation { .. } => GtregStatus::DomainError,
        GtrError::MissingCovariance => GtregStatus::MissingCovariance,
        GtrError::NoAdmissibleLambda(_) => GtregStatus::QgmFailed,
        _ => GtregStatus::InvalidArgument,
    }
}

fn fail(e: GtrError) -> GtregStatus {
    set_error(e.to_string());
    status_of(&e)
}

/// Runs `f`, turning panics into [`GtregStatus::Panic`].
fn guard(f: impl FnOnce() -> GtregStatus) -> GtregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            GtregStatus::Panic
        }
    }
}

/// Message for the last failing call on this thread. Valid until the next
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn gtreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fits a GT regression by maximum likelihood.
///
/// `spec` is a dictionary preset such as `"linear-linear"` or
/// `"spline-spline:7,5,2"`; null means linear-linear. With `repair` nonzero,
/// QGM violations trigger constrained refits.
///
/// On `Ok`, `NotConverged` from the solver's iteration limit, and
/// `QgmFailed`, `*out` receives a model that must be freed; otherwise it is
/// set to null. A non-converged model carries no covariance.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n * p` doubles (may be null when
/// `p == 0`), `spec` to a NUL-terminated string or null, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gtreg_fit(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    spec: *const c_char,
    repair: c_int,
    out: *mut *mut GtregModel,
) -> GtregStatus {
    guard(|| {
        if out.is_null() || y.is_null() || (x.is_null() && p > 0) {
            set_error("null pointer argument");
            return GtregStatus::NullPointer;
        }
        *out = ptr::null_mut();
        if n == 0 {
            return fail(GtrError::EmptyData);
        }
        let y = std::slice::from_raw_parts(y, n).to_vec();
        let xs: Vec<Vec<f64>> = if p == 0 {
            vec![Vec::new(); n]
        } else {
            std::slice::from_raw_parts(x, n * p).chunks(p).map(<[f64]>::to_vec).collect()
        };
        let spec_str = if spec.is_null() {
            "linear-linear".to_string()
        } else {
            match CStr::from_ptr(spec).to_str() {
                Ok(s) => s.to_string(),
                Err(_) => {
                    set_error("spec is not valid UTF-8");
                    return GtregStatus::InvalidArgument;
                }
            }
        };
        let specs = match parse_preset(&spec_str) {
            Ok(v) if v.len() == 1 => v,
            Ok(_) => {
                set_error("spec must name a single dictionary");
                return GtregStatus::InvalidArgument;
            }
            Err(e) => {
                set_error(e.to_string());
                return GtregStatus::InvalidArgument;
            }
        };
        match fit_model(y, xs, &specs[0], repair != 0) {
            Ok((model, status)) => {
                *out = Box::into_raw(Box::new(model));
                if status != GtregStatus::Ok {
                    set_error(if status == GtregStatus::NotConverged {
                        "solver stopped before convergence"
                    } else {
                        "fitted model violates the QGM property"
                    });
                }
                status
            }
            Err(e) => fail(e),
        }
    })
}

fn fit_model(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    spec: &gtreg::dictionary::DictionarySpec,
    repair: bool,
) -> Result<(GtregModel, GtregStatus), GtrError> {
    let sample = Sample::new(y, x)?;
    let (dict, d) = build_dictionary(spec, &sample)?;
    let cfg = SolverConfig::default();
    let x_grid = default_x_grid(&dict, &d, 201);
    let u_grid = default_u_grid();
    let (fit, qgm, rounds) = if repair {
        let o = fit_ml_with_repair(&dict, &d, &cfg, &RepairConfig::default(), &x_grid, &u_grid)?;
        (o.fit, o.qgm, o.rounds)
    } else {
        let f = fit_ml(&dict, &d, &cfg)?;
        let q = DrfEvaluator::new(dict.clone(), f.b_hat.clone(), None)?.qgm_check(&x_grid, &u_grid)?;
        (f, q, 0)
    };
    let cov = if fit.converged { Some(sandwich(&fit, &d)?.cov) } else { None };
    let cert = recover_dual(&fit.b_hat, &d)?;
    let summary = GtregFitSummary {
        n: d.n(),
        num_covariates: dict.num_covariates(),
        num_coefficients: dict.jk(),
        converged: c_int::from(fit.converged),
        qgm_passed: c_int::from(qgm.passed),
        repair_rounds: rounds,
        score_norm: fit.score_norm,
        loglik: d.raw_loglik(fit.value),
        duality_gap: cert.gap,
        dual_residual: cert.constraint_residual,
    };
    let status = if !fit.converged {
        GtregStatus::NotConverged
    } else if !qgm.passed {
        GtregStatus::QgmFailed
    } else {
        GtregStatus::Ok
    };
    Ok((GtregModel { eval: DrfEvaluator::new(dict, fit.b_hat, cov)?, summary }, status))
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`gtreg_fit`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gtreg_model_free(model: *mut GtregModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gtreg_fit_summary(model: *const GtregModel, out: *mut GtregFitSummary) -> GtregStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GtregStatus::NullPointer;
        }
        *out = (*model).summary;
        GtregStatus::Ok
    })
}

/// Copies the `len` coefficients into `out`: raw-unit coefficients when
/// `raw` is nonzero, standardized ones otherwise.
///
/// # Safety
/// `model` must be valid and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gtreg_coefficients(model: *const GtregModel, raw: c_int, out: *mut f64, len: usize) -> GtregStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GtregStatus::NullPointer;
        }
        let m = &*model;
        let b = if raw != 0 {
            m.eval.dictionary().to_raw_coefficients(m.eval.coefficients())
        } else {
            m.eval.coefficients().clone()
        };
        if len != b.len() {
            return fail(GtrError::DimensionMismatch { expected: b.len(), got: len });
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(b.as_slice());
        GtregStatus::Ok
    })
}

type EvalFn = fn(&DrfEvaluator, &[f64], f64) -> gtreg::error::Result<Estimate>;

unsafe fn evaluate(
    model: *const GtregModel,
    x: *const f64,
    p: usize,
    at: f64,
    value: *mut f64,
    se: *mut f64,
    f: EvalFn,
) -> GtregStatus {
    guard(|| {
        if model.is_null() || value.is_null() || (x.is_null() && p > 0) {
            set_error("null pointer argument");
            return GtregStatus::NullPointer;
        }
        let m = &*model;
        let xs = if p == 0 { &[][..] } else { std::slice::from_raw_parts(x, p) };
        match f(&m.eval, xs, at) {
            Ok(est) => {
                *value = est.value;
                if !se.is_null() {
                    *se = est.se.unwrap_or(f64::NAN);
                }
                GtregStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// `F(y | x)`. `se` (may be null) receives the delta-method standard error,
/// NaN when the model has no covariance.
///
/// # Safety
/// `x` must point to `p` doubles; `value` must be writable; `se` writable or null.
#[no_mangle]
pub unsafe extern "C" fn gtreg_cdf(model: *const GtregModel, x: *const f64, p: usize, y: f64, value: *mut f64, se: *mut f64) -> GtregStatus {
    evaluate(model, x, p, y, value, se, DrfEvaluator::cdf)
}

/// `f(y | x)`; see [`gtreg_cdf`].
///
/// # Safety
/// As for [`gtreg_cdf`].
#[no_mangle]
pub unsafe extern "C" fn gtreg_pdf(model: *const GtregModel, x: *const f64, p: usize, y: f64, value: *mut f64, se: *mut f64) -> GtregStatus {
    evaluate(model, x, p, y, value, se, DrfEvaluator::pdf)
}

/// `Q(u | x)` for `u` in (0, 1); see [`gtreg_cdf`].
///
/// # Safety
/// As for [`gtreg_cdf`].
#[no_mangle]
pub unsafe extern "C" fn gtreg_quantile(model: *const GtregModel, x: *const f64, p: usize, u: f64, value: *mut f64, se: *mut f64) -> GtregStatus {
    evaluate(model, x, p, u, value, se, DrfEvaluator::quantile)
}
