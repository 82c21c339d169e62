#ifndef MARSM_H
#define MARSM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MarsmStatus {
  MARSM_STATUS_OK = 0,
  MARSM_STATUS_NULL_POINTER = 1,
  MARSM_STATUS_INVALID_ARGUMENT = 2,
  MARSM_STATUS_SHAPE_MISMATCH = 3,
  MARSM_STATUS_NON_FINITE = 4,
  MARSM_STATUS_NO_CONVERGENCE = 5,
  MARSM_STATUS_DEGENERATE = 6,
  MARSM_STATUS_CONFIG = 7,
  MARSM_STATUS_NUMERICAL = 8,
  MARSM_STATUS_IO = 9,
  MARSM_STATUS_VERIFICATION_FAILED = 10,
  MARSM_STATUS_PANIC = 11,
} MarsmStatus;

typedef enum MarsmNsVariant {
  MARSM_NS_VARIANT_CUBIC = 0,
  MARSM_NS_VARIANT_QUINTIC = 1,
} MarsmNsVariant;

typedef enum MarsmMode {
  MARSM_MODE_APPROXIMATE = 0,
  MARSM_MODE_EXACT = 1,
} MarsmMode;

/**
 * Opaque MARS-M optimizer: configuration plus state for one parameter.
 */
typedef struct MarsmMarsM MarsmMarsM;

/**
 * Opaque dense row-major matrix.
 */
typedef struct MarsmMat MarsmMat;

/**
 * Plain-data MARS-M configuration.
 */
typedef struct MarsmMarsMConfig {
  double beta;
  double gamma;
  double lambda;
  /**
   * Constant learning rate; ignored when `theory_s > 0`.
   */
  double lr;
  /**
   * Uses `η_t = (s + t)^(-2/3)` with its paired momentum when positive.
   */
  double theory_s;
  /**
   * Frobenius clip threshold; non-positive disables clipping.
   */
  double clip;
  enum MarsmMode mode;
  /**
   * Quintic Newton–Schulz steps; 0 selects the exact SVD polar factor.
   */
  size_t ns_steps;
  /**
   * Update scale `rms_scale·√max(m, n)`; non-positive means unit scale.
   */
  double rms_scale;
} MarsmMarsMConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread. Valid until the next call
 * into this library from the same thread. Never null.
 */
const char *marsm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *marsm_version(void);

/**
 * Creates a `rows × cols` matrix from `rows·cols` row-major values.
 */
enum MarsmStatus marsm_mat_new(size_t rows, size_t cols, const double *data, struct MarsmMat **out);

enum MarsmStatus marsm_mat_zeros(size_t rows, size_t cols, struct MarsmMat **out);

/**
 * Releases a matrix. Null is ignored.
 */
void marsm_mat_free(struct MarsmMat *m);

/**
 * Row count, or 0 for null.
 */
size_t marsm_mat_rows(const struct MarsmMat *m);

/**
 * Column count, or 0 for null.
 */
size_t marsm_mat_cols(const struct MarsmMat *m);

/**
 * Copies the row-major entries into `buf`, which must hold `len ≥ rows·cols` values.
 */
enum MarsmStatus marsm_mat_copy_to(const struct MarsmMat *m, double *buf, size_t len);

enum MarsmStatus marsm_fro_norm(const struct MarsmMat *m, double *out);

/**
 * Newton–Schulz polar approximation; zero input yields zero.
 */
enum MarsmStatus marsm_newton_schulz(const struct MarsmMat *m,
                                     enum MarsmNsVariant variant,
                                     size_t steps,
                                     struct MarsmMat **out);

/**
 * Exact polar factor `U·Vᵀ`; fails with `DEGENERATE` on the zero matrix.
 */
enum MarsmStatus marsm_exact_polar(const struct MarsmMat *m, struct MarsmMat **out);

enum MarsmStatus marsm_clip_fro(const struct MarsmMat *m, double threshold, struct MarsmMat **out);

/**
 * Library defaults: β 0.95, γ 0.025, λ 0.1, lr 0.01, clip 1, approximate
 * mode, 5 quintic steps, RMS scale 0.2.
 */
struct MarsmMarsMConfig marsm_mars_m_default_config(void);

/**
 * Creates an optimizer for one `rows × cols` parameter.
 */
enum MarsmStatus marsm_mars_m_new(size_t rows,
                                  size_t cols,
                                  const struct MarsmMarsMConfig *config,
                                  struct MarsmMarsM **out);

/**
 * Releases an optimizer. Null is ignored.
 */
void marsm_mars_m_free(struct MarsmMarsM *opt);

/**
 * Point at which an exact-mode caller evaluates the reference gradient
 * under the current sample (a copy of `x` on the first step).
 */
enum MarsmStatus marsm_mars_m_prev_point(const struct MarsmMarsM *opt,
                                         const struct MarsmMat *x,
                                         struct MarsmMat **out);

/**
 * One MARS-M step. `g_prev_same_sample` must be non-null in exact mode and
 * null in approximate mode. Writes the new parameters to `params_out` and,
 * if `update_rms_out` is non-null, the RMS of the pre-lr update.
 */
enum MarsmStatus marsm_mars_m_step(struct MarsmMarsM *opt,
                                   const struct MarsmMat *x,
                                   const struct MarsmMat *g,
                                   const struct MarsmMat *g_prev_same_sample,
                                   struct MarsmMat **params_out,
                                   double *update_rms_out);

/**
 * Steps taken so far, or 0 for null.
 */
uint64_t marsm_mars_m_steps_taken(const struct MarsmMarsM *opt);

/**
 * Runs a config file. `out_dir` and `seed` may be null to keep the
 * config's values.
 */
enum MarsmStatus marsm_run_config(const char *config_path,
                                  const char *out_dir,
                                  const uint64_t *seed);

/**
 * Log-log slope of the running mean of `column` in a run CSV.
 */
enum MarsmStatus marsm_fit_slope(const char *csv_path,
                                 const char *column,
                                 double burn_in,
                                 double *out);

/**
 * Runs the self-check suite with default options. `failed_out`, if
 * non-null, receives the number of failed checks; the status is
 * `VERIFICATION_FAILED` when any check fails.
 */
enum MarsmStatus marsm_verify(size_t *failed_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARSM_H */
