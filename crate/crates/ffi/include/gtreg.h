#ifndef GTREG_H
#define GTREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GTREG_STATUS_OK = 0,
  GTREG_STATUS_NULL_POINTER = 1,
  GTREG_STATUS_INVALID_ARGUMENT = 2,
  GTREG_STATUS_DATA_ERROR = 3,
  GTREG_STATUS_NOT_CONVERGED = 4,
  GTREG_STATUS_QGM_FAILED = 5,
  /**
   * A level or point where the fitted distribution is undefined.
   */
  GTREG_STATUS_DOMAIN_ERROR = 6,
  GTREG_STATUS_MISSING_COVARIANCE = 7,
  GTREG_STATUS_PANIC = 99,
} GtregStatus;

/**
 * A fitted model. Opaque to C.
 */
typedef struct GtregModel GtregModel;

/**
 * Fit statistics of a model.
 */
typedef struct {
  size_t n;
  size_t num_covariates;
  size_t num_coefficients;
  int converged;
  int qgm_passed;
  size_t repair_rounds;
  double score_norm;
  /**
   * Log-likelihood in raw outcome units.
   */
  double loglik;
  double duality_gap;
  double dual_residual;
} GtregFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread. Valid until the next
 * call on the same thread; never null.
 */
const char *gtreg_last_error(void);

/**
 * Fits a GT regression by maximum likelihood.
 *
 * `spec` is a dictionary preset such as `"linear-linear"` or
 * `"spline-spline:7,5,2"`; null means linear-linear. With `repair` nonzero,
 * QGM violations trigger constrained refits.
 *
 * On `Ok`, `NotConverged` from the solver's iteration limit, and
 * `QgmFailed`, `*out` receives a model that must be freed; otherwise it is
 * set to null. A non-converged model carries no covariance.
 *
 * # Safety
 * `y` must point to `n` doubles, `x` to `n * p` doubles (may be null when
 * `p == 0`), `spec` to a NUL-terminated string or null, `out` to writable storage.
 */
GtregStatus gtreg_fit(const double *y,
                      const double *x,
                      size_t n,
                      size_t p,
                      const char *spec,
                      int repair,
                      GtregModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`gtreg_fit`] and not have been freed.
 */
void gtreg_model_free(GtregModel *model);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
GtregStatus gtreg_fit_summary(const GtregModel *model, GtregFitSummary *out);

/**
 * Copies the `len` coefficients into `out`: raw-unit coefficients when
 * `raw` is nonzero, standardized ones otherwise.
 *
 * # Safety
 * `model` must be valid and `out` must point to `len` writable doubles.
 */
GtregStatus gtreg_coefficients(const GtregModel *model, int raw, double *out, size_t len);

/**
 * `F(y | x)`. `se` (may be null) receives the delta-method standard error,
 * NaN when the model has no covariance.
 *
 * # Safety
 * `x` must point to `p` doubles; `value` must be writable; `se` writable or null.
 */
GtregStatus gtreg_cdf(const GtregModel *model,
                      const double *x,
                      size_t p,
                      double y,
                      double *value,
                      double *se);

/**
 * `f(y | x)`; see [`gtreg_cdf`].
 *
 * # Safety
 * As for [`gtreg_cdf`].
 */
GtregStatus gtreg_pdf(const GtregModel *model,
                      const double *x,
                      size_t p,
                      double y,
                      double *value,
                      double *se);

/**
 * `Q(u | x)` for `u` in (0, 1); see [`gtreg_cdf`].
 *
 * # Safety
 * As for [`gtreg_cdf`].
 */
GtregStatus gtreg_quantile(const GtregModel *model,
                           const double *x,
                           size_t p,
                           double u,
                           double *value,
                           double *se);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GTREG_H */
