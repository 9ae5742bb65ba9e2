#ifndef GMC_H
#define GMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every exported function.
 */
typedef enum GmcStatus {
  GMC_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  GMC_STATUS_NULL_POINTER = 1,
  /*
   Invalid input data, configuration or hyperparameters.
   */
  GMC_STATUS_VALIDATION = 2,
  /*
   Numerical or sampling failure.
   */
  GMC_STATUS_RUNTIME = 3,
  /*
   The fit handle does not support the request, e.g. a survival curve
   of a regression fit.
   */
  GMC_STATUS_WRONG_KIND = 4,
  /*
   An output buffer is too small.
   */
  GMC_STATUS_BUFFER_TOO_SMALL = 5,
  /*
   Internal panic caught at the boundary.
   */
  GMC_STATUS_PANIC = 6,
} GmcStatus;

/*
 Curve of a regression fit.
 */
typedef enum GmcCurve {
  GMC_CURVE_PRIMARY = 0,
  GMC_CURVE_SUPPLEMENTAL = 1,
} GmcCurve;

/*
 Posterior draws of one fit.
 */
typedef struct GmcFit GmcFit;

/*
 Sampler settings; see [`gmc_sampler_regression_default`].
 */
typedef struct GmcSampler {
  size_t chains;
  size_t burn_in;
  size_t iterations;
  size_t thin;
  uint64_t seed;
} GmcSampler;

/*
 Two-source regression hyperparameters.
 */
typedef struct GmcRegressionHyper {
  double s_l;
  double s_u;
  double r;
  double p0;
  double a1;
  double a2;
} GmcRegressionHyper;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 NUL-terminated description of the last error on this thread; empty when
 none. Valid until the next failing call on the same thread.
 */
const char *gmc_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gmc_version(void);

/*
 2 chains, 1000 burn-in, 5000 kept.
 */
struct GmcSampler gmc_sampler_regression_default(uint64_t seed);

/*
 2 chains, 2000 burn-in, 10,000 kept.
 */
struct GmcSampler gmc_sampler_survival_default(uint64_t seed);

struct GmcRegressionHyper gmc_regression_hyper_default(void);

/*
 Conventional spline fit of `(y, t)` with `intervals` equal-width
 intervals on `[0, 1]`.

 # Safety
 `y` and `t` must point to `n` doubles, `sampler` to a `GmcSampler` and
 `out` to writable storage for one pointer.
 */
enum GmcStatus gmc_fit_regression(const double *y,
                                  const double *t,
                                  size_t n,
                                  size_t intervals,
                                  const struct GmcSampler *sampler_cfg,
                                  struct GmcFit **out);

/*
 Two-source GMC spline fit. `hyper` may be null for the defaults.

 # Safety
 Array arguments must point to `n` or `n0` doubles; see
 [`gmc_fit_regression`].
 */
enum GmcStatus gmc_fit_regression_gmc(const double *y,
                                      const double *t,
                                      size_t n,
                                      const double *y0,
                                      const double *t0,
                                      size_t n0,
                                      size_t intervals,
                                      const struct GmcRegressionHyper *hyper,
                                      const struct GmcSampler *sampler_cfg,
                                      struct GmcFit **out);

/*
 Conventional piecewise-exponential fit. Times are on the rescaled axis
 `(0, 1]`; `event` holds 0 or 1.

 # Safety
 `time` and `event` must point to `n` elements; see
 [`gmc_fit_regression`].
 */
enum GmcStatus gmc_fit_survival(const double *time,
                                const uint8_t *event,
                                size_t n,
                                size_t intervals,
                                const struct GmcSampler *sampler_cfg,
                                struct GmcFit **out);

/*
 Two-source GMC piecewise-exponential fit with spike precision `r_gamma`
 and `nu_gamma ~ Beta(a1, a2)`.

 # Safety
 Array arguments must point to `n` or `n0` elements; see
 [`gmc_fit_regression`].
 */
enum GmcStatus gmc_fit_survival_gmc(const double *time,
                                    const uint8_t *event,
                                    size_t n,
                                    const double *time0,
                                    const uint8_t *event0,
                                    size_t n0,
                                    size_t intervals,
                                    double r_gamma,
                                    double a1,
                                    double a2,
                                    const struct GmcSampler *sampler_cfg,
                                    struct GmcFit **out);

/*
 Releases a fit. Null is ignored.

 # Safety
 `fit` must come from a `gmc_fit_*` call and not be freed twice.
 */
void gmc_fit_free(struct GmcFit *fit);

/*
 Number of sampled parameters.

 # Safety
 `fit` must be a live handle; `out` writable.
 */
enum GmcStatus gmc_fit_n_params(const struct GmcFit *fit, size_t *out);

/*
 Stored draws per parameter, pooled over chains.

 # Safety
 `fit` must be a live handle; `out` writable.
 */
enum GmcStatus gmc_fit_n_draws(const struct GmcFit *fit, size_t *out);

/*
 Copies the NUL-terminated name of parameter `index` into `buf`. With
 `len` too small (or `buf` null) returns `BufferTooSmall`; `needed`, if
 non-null, always receives the required size including the NUL.

 # Safety
 `buf` must be valid for `len` bytes.
 */
enum GmcStatus gmc_fit_param_name(const struct GmcFit *fit,
                                  size_t index,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

/*
 Index of the parameter called `name`.

 # Safety
 `name` must be NUL-terminated; `out` writable.
 */
enum GmcStatus gmc_fit_param_index(const struct GmcFit *fit, const char *name, size_t *out);

/*
 Pooled draws of parameter `index` (chain by chain) into `buf[0..len]`;
 `len` must equal [`gmc_fit_n_draws`].

 # Safety
 `buf` must be valid for `len` writes.
 */
enum GmcStatus gmc_fit_draws(const struct GmcFit *fit, size_t index, double *buf, size_t len);

/*
 Posterior mean of parameter `index`.

 # Safety
 `out` writable.
 */
enum GmcStatus gmc_fit_posterior_mean(const struct GmcFit *fit, size_t index, double *out);

/*
 Posterior mean and equal-tailed `level` interval of a regression curve
 on `grid[0..m]`.

 # Safety
 `grid`, `mean`, `lower` and `upper` must be valid for `m` elements.
 */
enum GmcStatus gmc_fit_curve(const struct GmcFit *fit,
                             enum GmcCurve curve,
                             const double *grid,
                             size_t m,
                             double level,
                             double *mean,
                             double *lower,
                             double *upper);

/*
 Survival curve of the primary source on the rescaled axis.

 # Safety
 `grid`, `mean`, `lower` and `upper` must be valid for `m` elements.
 */
enum GmcStatus gmc_fit_survival_curve(const struct GmcFit *fit,
                                      const double *grid,
                                      size_t m,
                                      double level,
                                      double *mean,
                                      double *lower,
                                      double *upper);

/*
 Posterior median survival in days over a `horizon`-day follow-up.
 `out` receives `(median, lower, upper)`.

 # Safety
 `out` must be valid for 3 writes.
 */
enum GmcStatus gmc_fit_median_survival(const struct GmcFit *fit,
                                       double horizon,
                                       double level,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GMC_H */
