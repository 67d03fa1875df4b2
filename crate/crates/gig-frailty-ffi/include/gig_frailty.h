/* C API for the gig-frailty library. */

#ifndef GIG_FRAILTY_H
#define GIG_FRAILTY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function of this API.
 */
typedef enum GigStatus {
  GigStatus_Ok = 0,
  GigStatus_NullPointer = 1,
  GigStatus_InvalidArgument = 2,
  GigStatus_DomainError = 3,
  GigStatus_NumericalError = 4,
  GigStatus_NonConvergence = 5,
  GigStatus_IoError = 6,
} GigStatus;

/**
 * Opaque clustered survival dataset.
 */
typedef struct GigDataset GigDataset;

/**
 * Opaque fit result.
 */
typedef struct GigFit GigFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread, or NULL if none.
 * The pointer is valid until the next failing call on the same thread.
 */
const char *gig_last_error(void);

/**
 * Read a dataset from a CSV file with header
 * `cluster_id,time,status,<covariates...>`. On success stores a handle in
 * `*out`; release it with `gig_dataset_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum GigStatus gig_dataset_from_csv(const char *path, struct GigDataset **out);

/**
 * Release a dataset handle (NULL is a no-op).
 *
 * # Safety
 * `ds` must be a pointer from `gig_dataset_from_csv`, released once.
 */
void gig_dataset_free(struct GigDataset *ds);

/**
 * Number of clusters in the dataset.
 *
 * # Safety
 * `ds` must be a valid dataset handle.
 */
uintptr_t gig_dataset_n_clusters(const struct GigDataset *ds);

/**
 * Number of covariate columns in the dataset.
 *
 * # Safety
 * `ds` must be a valid dataset handle.
 */
uintptr_t gig_dataset_n_covariates(const struct GigDataset *ds);

/**
 * Fit the piecewise-exponential GIG frailty model by EM. `lambda` is the
 * fixed GIG index, `k_cuts` the number of interior cut points (failure
 * quantiles), `tol` the convergence tolerance and `max_iter` the
 * iteration cap (pass 0 for the defaults 1e-6 and 500). On success stores
 * a handle in `*out`; release it with `gig_fit_free`. Returns
 * `NonConvergence` (with the handle still stored) when the iteration cap
 * is reached.
 *
 * # Safety
 * `ds` must be a valid dataset handle and `out` a valid pointer.
 */
enum GigStatus gig_fit_em(const struct GigDataset *ds,
                          double lambda,
                          uintptr_t k_cuts,
                          double tol,
                          uintptr_t max_iter,
                          struct GigFit **out);

/**
 * Release a fit handle (NULL is a no-op).
 *
 * # Safety
 * `fit` must be a pointer from `gig_fit_em`, released once.
 */
void gig_fit_free(struct GigFit *fit);

/**
 * Maximized observed-data log-likelihood of a fit.
 *
 * # Safety
 * `fit` and `out` must be valid pointers.
 */
enum GigStatus gig_fit_loglik(const struct GigFit *fit, double *out);

/**
 * 1 if the fit converged, 0 otherwise.
 *
 * # Safety
 * `fit` must be a valid fit handle.
 */
int gig_fit_converged(const struct GigFit *fit);

/**
 * Estimated frailty parameter alpha.
 *
 * # Safety
 * `fit` and `out` must be valid pointers.
 */
enum GigStatus gig_fit_alpha(const struct GigFit *fit, double *out);

/**
 * Standardized frailty variance `Var(Z)/E(Z)^2` of the fitted law.
 *
 * # Safety
 * `fit` and `out` must be valid pointers.
 */
enum GigStatus gig_fit_frailty_variance(const struct GigFit *fit, double *out);

/**
 * Number of regression coefficients.
 *
 * # Safety
 * `fit` must be a valid fit handle.
 */
uintptr_t gig_fit_n_beta(const struct GigFit *fit);

/**
 * Regression coefficient by index.
 *
 * # Safety
 * `fit` and `out` must be valid pointers.
 */
enum GigStatus gig_fit_beta(const struct GigFit *fit, uintptr_t index, double *out);

/**
 * Natural log of the modified Bessel function of the third kind,
 * `ln K_nu(x)` for `x > 0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GigStatus gig_log_bessel_k(double nu, double x, double *out);

/**
 * Relative frailty variance of the GIG law with parameters
 * `(alpha, lambda)` at `s >= 0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GigStatus gig_rfv(double alpha, double lambda, double s, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIG_FRAILTY_H */
