#ifndef TAILDEP_H
#define TAILDEP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum TaildepStatus {
  TAILDEP_STATUS_OK = 0,
  TAILDEP_STATUS_NULL_POINTER = 1,
  TAILDEP_STATUS_INVALID_ARGUMENT = 2,
  TAILDEP_STATUS_MODEL_ERROR = 3,
  TAILDEP_STATUS_QP_ERROR = 4,
  TAILDEP_STATUS_ORACLE_ERROR = 5,
  /**
   * The log-probability is below the representable floor.
   */
  TAILDEP_STATUS_UNDERFLOW = 6,
  TAILDEP_STATUS_ESTIMATOR_ERROR = 7,
  TAILDEP_STATUS_BUFFER_TOO_SMALL = 8,
  TAILDEP_STATUS_PANIC = 9,
} TaildepStatus;

/**
 * Opaque elliptical model.
 */
typedef struct TaildepModel TaildepModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *taildep_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *taildep_version(void);

/**
 * Builds a model from a JSON document with keys `correlation` and `radial`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TaildepStatus taildep_model_from_json(const char *json, struct TaildepModel **out);

/**
 * Builds a Gaussian model from a row-major `k × k` correlation matrix.
 *
 * # Safety
 * `corr` must point to `k*k` doubles and `out` must be valid.
 */
enum TaildepStatus taildep_model_gaussian(const double *corr, size_t k, struct TaildepModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from a `taildep_model_*` constructor and not be used afterwards.
 */
void taildep_model_free(struct TaildepModel *model);

/**
 * Dimension of a model, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t taildep_model_dim(const struct TaildepModel *model);

/**
 * Solves the constrained quadratic program on the index set. Writes `q` and
 * the active set (zero-based, ascending) into `active`, which must hold `m`
 * entries; `active_len` receives its length.
 *
 * # Safety
 * `corr` must point to `k*k` doubles, `index_set` and `active` to `m` entries.
 */
enum TaildepStatus taildep_solve_alpha(const double *corr,
                                       size_t k,
                                       const size_t *index_set,
                                       size_t m,
                                       double *q,
                                       size_t *active,
                                       size_t *active_len);

/**
 * `ln P{X_j > a_j for all j}` for a model of dimension 2 or 3; `a` holds one
 * positive threshold per coordinate.
 *
 * # Safety
 * `model` must be live, `a` must hold `dim` doubles and `out` must be valid.
 */
enum TaildepStatus taildep_joint_log_survival(const struct TaildepModel *model,
                                              const double *a,
                                              double *out);

/**
 * `ln S̃_u(x)` on an index set of size 2 or 3.
 *
 * # Safety
 * `index_set` and `x` must hold `m` entries; `model` and `out` must be valid.
 */
enum TaildepStatus taildep_log_s_tilde(const struct TaildepModel *model,
                                       const size_t *index_set,
                                       const double *x,
                                       size_t m,
                                       double u,
                                       double *out);

/**
 * Draws `n` rows into `out` (row-major, `n*dim` doubles, `capacity` entries available).
 *
 * # Safety
 * `out` must hold `capacity` doubles; `model` must be live.
 */
enum TaildepStatus taildep_simulate(const struct TaildepModel *model,
                                    size_t n,
                                    uint64_t seed,
                                    double *out,
                                    size_t capacity);

/**
 * Kendall's tau of two samples of length `n`.
 *
 * # Safety
 * `x` and `y` must hold `n` doubles; `out` must be valid.
 */
enum TaildepStatus taildep_kendall_tau(const double *x, const double *y, size_t n, double *out);

/**
 * Weibull tail coefficient estimate from the `kn` largest positive observations.
 *
 * # Safety
 * `x` must hold `n` doubles; `out` must be valid.
 */
enum TaildepStatus taildep_theta_hat(const double *x, size_t n, size_t kn, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILDEP_H */
