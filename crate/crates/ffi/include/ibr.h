#ifndef IBR_H
#define IBR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IbrSmootherKind {
  IBR_SMOOTHER_KIND_KERNEL = 0,
  IBR_SMOOTHER_KIND_THIN_PLATE = 1,
} IbrSmootherKind;

typedef enum IbrCriterion {
  IBR_CRITERION_GCV = 0,
  IBR_CRITERION_AIC = 1,
  IBR_CRITERION_AICC = 2,
  IBR_CRITERION_BIC = 3,
  IBR_CRITERION_GMDL = 4,
  IBR_CRITERION_RMSE = 5,
  IBR_CRITERION_MAP = 6,
} IbrCriterion;

typedef enum IbrStatus {
  IBR_STATUS_OK = 0,
  IBR_STATUS_NULL_POINTER = 1,
  IBR_STATUS_INVALID_ARGUMENT = 2,
  IBR_STATUS_CALIBRATION = 3,
  IBR_STATUS_DECOMPOSITION = 4,
  IBR_STATUS_NON_INTEGER_K = 5,
  IBR_STATUS_BREAKDOWN = 6,
  IBR_STATUS_NO_ADMISSIBLE_K = 7,
  IBR_STATUS_OUTSIDE_SUPPORT = 8,
  IBR_STATUS_DATA = 9,
  IBR_STATUS_MODEL = 10,
  IBR_STATUS_IO = 11,
  IBR_STATUS_PANIC = 12,
} IbrStatus;

/**
 * Fitted model handle.
 */
typedef struct IbrModel IbrModel;

/**
 * Fit settings. Obtain defaults from [`ibr_fit_options_default`].
 */
typedef struct IbrFitOptions {
  enum IbrSmootherKind smoother;
  /**
   * Kernel tag: 'g', 't', 'q', 'e' or 'u'.
   */
  char kernel;
  /**
   * Per-variable trace (kernel) or null-space multiplier (spline).
   */
  double df;
  /**
   * Nonzero: `df` is the total trace of the kernel smoother.
   */
  int32_t df_total;
  /**
   * Spline order; 0 selects the smallest valid one.
   */
  uint32_t tps_order;
  enum IbrCriterion criterion;
  /**
   * Nonzero: exhaustive integer search.
   */
  int32_t exhaustive;
  /**
   * Nonzero: use exactly this many iterations.
   */
  uint64_t fixed_iterations;
  double kmin;
  double kmax;
  /**
   * Df ceiling; non-positive selects 2n/3.
   */
  double dfmaxi;
  /**
   * Folds for rmse/map; 0 uses repeated random splits instead.
   */
  uint32_t cv_folds;
  uint64_t seed;
} IbrFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default settings: Gaussian kernel, df 1.1, GCV, numeric search.
 */
struct IbrFitOptions ibr_fit_options_default(void);

/**
 * Fits a model to `n` observations of `d` covariates (`x` row-major, n*d)
 * and response `y` (length n). On success `*out` owns a new handle.
 *
 * # Safety
 * `x` and `y` must point to `n*d` and `n` readable doubles; `out` must be writable.
 */
enum IbrStatus ibr_fit(const double *x,
                       size_t n,
                       size_t d,
                       const double *y,
                       const struct IbrFitOptions *options,
                       struct IbrModel **out);

/**
 * Predicts at `m` new points (`x_new` row-major, m*d) into `out` (length m).
 *
 * # Safety
 * Pointers must reference arrays of the stated sizes.
 */
enum IbrStatus ibr_model_predict(const struct IbrModel *model,
                                 const double *x_new,
                                 size_t m,
                                 size_t d,
                                 double *out);

/**
 * Unrounded optimum of the iteration-count search.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_k(const struct IbrModel *model, double *out);

/**
 * Iteration count used by the fit (the optimum truncated).
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_iterations(const struct IbrModel *model, uint64_t *out);

/**
 * Trace of the base smoother.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_initial_df(const struct IbrModel *model, double *out);

/**
 * Trace of the iterated smoother.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_final_df(const struct IbrModel *model, double *out);

/**
 * Criterion value at the selected `k`; NaN when unavailable.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_criterion_value(const struct IbrModel *model, double *out);

/**
 * Number of training observations.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_n(const struct IbrModel *model, size_t *out);

/**
 * Number of covariates.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IbrStatus ibr_model_dim(const struct IbrModel *model, size_t *out);

/**
 * Copies the `n` training fitted values into `out`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum IbrStatus ibr_model_fitted(const struct IbrModel *model, double *out, size_t len);

/**
 * Writes the model as JSON.
 *
 * # Safety
 * `path` must be a nul-terminated string.
 */
enum IbrStatus ibr_model_save(const struct IbrModel *model, const char *path);

/**
 * Reads a model written by [`ibr_model_save`] or the command-line tool.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` writable.
 */
enum IbrStatus ibr_model_load(const char *path, struct IbrModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void ibr_model_free(struct IbrModel *model);

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ibr_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ibr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IBR_H */
