#ifndef RANKSHRINK_H
#define RANKSHRINK_H

/* Generated from src/lib.rs by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call. The non-zero values match the CLI exit codes where
 they overlap.
 */
typedef enum RksStatus {
  RKS_STATUS_OK = 0,
  /*
   Null pointer, out-of-range code, bad UTF-8 or a too-small buffer.
   */
  RKS_STATUS_INVALID_ARGUMENT = 1,
  RKS_STATUS_CONFIG = 2,
  RKS_STATUS_DATA = 3,
  RKS_STATUS_NUMERICAL = 4,
  /*
   A Rust panic was caught at the boundary.
   */
  RKS_STATUS_INTERNAL = 5,
} RksStatus;

typedef enum RksEstimator {
  RKS_ESTIMATOR_LS = 0,
  RKS_ESTIMATOR_RIDGE = 1,
  RKS_ESTIMATOR_LIU_TYPE = 2,
  RKS_ESTIMATOR_LIU_ONE = 3,
  RKS_ESTIMATOR_MIXED = 4,
  RKS_ESTIMATOR_MIXED_LIU = 5,
  RKS_ESTIMATOR_SRL = 6,
  RKS_ESTIMATOR_MIXED_RIDGE = 7,
  RKS_ESTIMATOR_SRR = 8,
  RKS_ESTIMATOR_ML = 9,
} RksEstimator;

typedef enum RksScheme {
  RKS_SCHEME_SRS = 0,
  RKS_SCHEME_RSS = 1,
  RKS_SCHEME_MRS = 2,
  RKS_SCHEME_MMRS = 3,
  RKS_SCHEME_MMRM = 4,
} RksScheme;

typedef enum RksFormat {
  RKS_FORMAT_CSV = 0,
  RKS_FORMAT_MARKDOWN = 1,
  RKS_FORMAT_JSON_LINES = 2,
} RksFormat;

typedef struct RksDataset RksDataset;

typedef struct RksFit RksFit;

typedef struct RksPopulation RksPopulation;

typedef struct RksReport RksReport;

typedef struct RksRestriction RksRestriction;

typedef struct RksSample RksSample;

/*
 One (scheme, estimator) cell of a study report. Undefined reals are NaN.
 */
typedef struct RksReportRow {
  /*
   An [`RksScheme`] value.
   */
  uint32_t scheme;
  /*
   An [`RksEstimator`] value.
   */
  uint32_t estimator;
  size_t replications;
  size_t failures;
  double mse;
  double median_sse;
  double re;
  double ci_lo;
  double ci_hi;
} RksReportRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *rks_version(void);

/*
 Copy the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `len`). Returns the buffer size the whole message needs.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t rks_last_error(char *buf, size_t len);

/*
 Build a dataset from an `n x p` row-major design and `n` responses.
 With `binary` set the responses must be 0 or 1.

 # Safety
 `x` must hold `n * p` values and `y` `n` values.
 */
enum RksStatus rks_dataset_new(const double *x,
                               const double *y,
                               size_t n,
                               size_t p,
                               bool binary,
                               struct RksDataset **out);

/*
 New dataset with a leading column of ones. Logistic selection rules then
 leave that column out of their predictor count.

 # Safety
 `dataset` must be a live handle.
 */
enum RksStatus rks_dataset_with_intercept(const struct RksDataset *dataset,
                                          struct RksDataset **out);

/*
 # Safety
 `dataset` must be null or a handle not yet freed.
 */
void rks_dataset_free(struct RksDataset *dataset);

/*
 Stochastic restriction `r = R beta + e`, `Cov(e) = sigma^2 Omega / v`,
 with `R` of size `q x p`.

 # Safety
 `r_matrix` must hold `q * p` values, `r` `q` values and `omega` `q * q`.
 */
enum RksStatus rks_restriction_new(const double *r_matrix,
                                   const double *r,
                                   const double *omega,
                                   size_t q,
                                   size_t p,
                                   double v,
                                   struct RksRestriction **out);

/*
 # Safety
 `restriction` must be null or a handle not yet freed.
 */
void rks_restriction_free(struct RksRestriction *restriction);

/*
 Fit one estimator. Pass NaN for `k` or `d` to use the estimator's
 selection rule. A binary dataset takes `ML`, `RIDGE` or `LIU_TYPE` (the
 logistic versions); the restricted estimators need `restriction`, which
 may otherwise be null.

 # Safety
 Handles must be live; `restriction` may be null.
 */
enum RksStatus rks_fit(const struct RksDataset *dataset,
                       uint32_t estimator,
                       double k,
                       double d,
                       const struct RksRestriction *restriction,
                       struct RksFit **out);

/*
 Number of coefficients in a fit.

 # Safety
 `fit` must be a live handle.
 */
enum RksStatus rks_fit_len(const struct RksFit *fit, size_t *out);

/*
 Copy the coefficients into `buf`, which must hold at least `rks_fit_len` values.

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum RksStatus rks_fit_coefficients(const struct RksFit *fit, double *buf, size_t len);

/*
 Shrinkage parameters used by the fit; NaN when the estimator has none.

 # Safety
 `fit` must be a live handle; `k` and `d` may be null.
 */
enum RksStatus rks_fit_params(const struct RksFit *fit, double *k, double *d);

/*
 # Safety
 `fit` must be null or a handle not yet freed.
 */
void rks_fit_free(struct RksFit *fit);

/*
 Finite population of `n` units: responses, an `n x p` predictor matrix and
 an `n x k` matrix of observer scores (both row-major).

 # Safety
 Buffers must hold the stated number of values.
 */
enum RksStatus rks_population_new(const double *y,
                                  const double *x,
                                  const double *scores,
                                  size_t n,
                                  size_t p,
                                  size_t k,
                                  bool binary,
                                  struct RksPopulation **out);

/*
 # Safety
 `population` must be null or a handle not yet freed.
 */
void rks_population_free(struct RksPopulation *population);

/*
 Draw `cycles * set_size` units with the given scheme. `rhos` holds one
 ranking correlation per observer (RSS and MMRS use the first only).

 # Safety
 `population` must be live; `rhos` must hold `n_rhos` values.
 */
enum RksStatus rks_draw_sample(const struct RksPopulation *population,
                               uint32_t scheme,
                               size_t set_size,
                               size_t cycles,
                               double c,
                               const double *rhos,
                               size_t n_rhos,
                               uint64_t seed,
                               struct RksSample **out);

/*
 Number of measured units.

 # Safety
 `sample` must be a live handle.
 */
enum RksStatus rks_sample_len(const struct RksSample *sample, size_t *out);

/*
 0-based population indices of the measured units, in draw order.

 # Safety
 `buf` must point to `len` writable values.
 */
enum RksStatus rks_sample_units(const struct RksSample *sample, size_t *buf, size_t len);

/*
 Dataset of the measured units, ready for [`rks_fit`].

 # Safety
 `sample` must be a live handle.
 */
enum RksStatus rks_sample_dataset(const struct RksSample *sample, struct RksDataset **out);

/*
 # Safety
 `sample` must be null or a handle not yet freed.
 */
void rks_sample_free(struct RksSample *sample);

/*
 Run the Monte Carlo study described by a TOML configuration, in the same
 format the command-line tool reads. `[run] kind` must name a study and
 `[run] seed` must be set.

 # Safety
 `config_toml` must be a NUL-terminated string.
 */
enum RksStatus rks_run_study(const char *config_toml, struct RksReport **out);

/*
 Number of (scheme, estimator) rows.

 # Safety
 `report` must be a live handle.
 */
enum RksStatus rks_report_len(const struct RksReport *report, size_t *out);

/*
 # Safety
 `report` must be a live handle.
 */
enum RksStatus rks_report_row(const struct RksReport *report,
                              size_t index,
                              struct RksReportRow *out);

/*
 Render the report as a NUL-terminated string; release it with [`rks_string_free`].

 # Safety
 `report` must be a live handle.
 */
enum RksStatus rks_report_render(const struct RksReport *report, uint32_t format, char **out);

/*
 # Safety
 `report` must be null or a handle not yet freed.
 */
void rks_report_free(struct RksReport *report);

/*
 # Safety
 `s` must be null or a string returned by this library, freed once.
 */
void rks_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKSHRINK_H */
