#ifndef PREDOPT_H
#define PREDOPT_H

/* Generated by cbindgen from predopt-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. `PREDOPT_STATUS_OK` is zero.
 */
typedef enum PredoptStatus {
  PREDOPT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PREDOPT_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments were structurally invalid (bad instance data, unknown
   * oracle string, malformed id).
   */
  PREDOPT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A buffer length did not match the instance or model dimension.
   */
  PREDOPT_STATUS_DIMENSION_MISMATCH = 3,
  PREDOPT_STATUS_INFEASIBLE = 4,
  PREDOPT_STATUS_UNBOUNDED = 5,
  /**
   * An iteration or node limit was hit before an answer existed.
   */
  PREDOPT_STATUS_LIMIT_REACHED = 6,
  /**
   * The oracle cannot solve this problem family.
   */
  PREDOPT_STATUS_UNSUPPORTED = 7,
  PREDOPT_STATUS_PARSE_ERROR = 8,
  PREDOPT_STATUS_IO_ERROR = 9,
  /**
   * A panic was caught at the language boundary.
   */
  PREDOPT_STATUS_INTERNAL_ERROR = 10,
} PredoptStatus;

typedef struct PredoptInstance PredoptInstance;

typedef struct PredoptModel PredoptModel;

typedef struct PredoptOracle PredoptOracle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread; never free
 * it.
 */
const char *predopt_last_error_message(void);

/**
 * Create a 0-1 knapsack instance (a maximization) from item weights and a
 * capacity.
 *
 * # Safety
 * `weights` must point to `n_items` readable values, `id` must be a valid
 * C string, and `out` must be a writable pointer slot. On success the slot
 * receives a handle to release with [`predopt_instance_free`].
 */
enum PredoptStatus predopt_knapsack_new(const uint32_t *weights,
                                        size_t n_items,
                                        uint32_t capacity,
                                        const char *id,
                                        struct PredoptInstance **out);

/**
 * Create a scheduling instance (a minimization over per-period energy
 * prices) from the plain-text instance format.
 *
 * # Safety
 * `text` and `id` must be valid C strings and `out` a writable pointer
 * slot. On success the slot receives a handle to release with
 * [`predopt_instance_free`].
 */
enum PredoptStatus predopt_scheduling_new(const char *text,
                                          const char *id,
                                          struct PredoptInstance **out);

/**
 * Derive an instance with a new id that shares the original's constraint
 * structure, so one oracle's caches serve both.
 *
 * # Safety
 * `instance` must be a live handle from this library, `id` a valid C
 * string, and `out` a writable pointer slot. On success the slot receives
 * a handle to release with [`predopt_instance_free`].
 */
enum PredoptStatus predopt_instance_share(const struct PredoptInstance *instance,
                                          const char *id,
                                          struct PredoptInstance **out);

/**
 * Length of the instance's coefficient vector, or 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle from this library.
 */
size_t predopt_instance_coeff_len(const struct PredoptInstance *instance);

/**
 * Release an instance handle. Null is ignored.
 *
 * # Safety
 * `instance` must be null or an unreleased handle from this library.
 */
void predopt_instance_free(struct PredoptInstance *instance);

/**
 * Create an oracle. `spec` is `exact`, `greedy`, `relax`, or `mip:GAP`
 * (e.g. `mip:0.05`); the three flags enable basis reuse, incumbent
 * seeding, and objective-bound cuts for repeated solves.
 *
 * # Safety
 * `spec` must be a valid C string and `out` a writable pointer slot. On
 * success the slot receives a handle to release with
 * [`predopt_oracle_free`].
 */
enum PredoptStatus predopt_oracle_new(const char *spec,
                                      bool reuse_basis,
                                      bool seed_incumbent,
                                      bool bound_cut,
                                      struct PredoptOracle **out);

/**
 * Solve an instance under the given objective coefficients. Writes the
 * assignment (one value per coefficient) and the native-sense objective.
 *
 * # Safety
 * `oracle` and `instance` must be live handles from this library,
 * `coeffs` and `assignment_out` must point to `len` readable and writable
 * values respectively, and `objective_out` must be writable. `len` must
 * equal [`predopt_instance_coeff_len`].
 */
enum PredoptStatus predopt_oracle_solve(const struct PredoptOracle *oracle,
                                        const struct PredoptInstance *instance,
                                        const double *coeffs,
                                        size_t len,
                                        double *assignment_out,
                                        double *objective_out);

/**
 * Decision regret of acting on `predicted_coeffs` when `true_coeffs` are
 * the real objective, measured by this oracle.
 *
 * # Safety
 * `oracle` and `instance` must be live handles from this library,
 * `true_coeffs` and `predicted_coeffs` must point to `len` readable
 * values, and `regret_out` must be writable. `len` must equal
 * [`predopt_instance_coeff_len`].
 */
enum PredoptStatus predopt_regret(const struct PredoptOracle *oracle,
                                  const struct PredoptInstance *instance,
                                  const double *true_coeffs,
                                  const double *predicted_coeffs,
                                  size_t len,
                                  double *regret_out);

/**
 * Release an oracle handle. Null is ignored.
 *
 * # Safety
 * `oracle` must be null or an unreleased handle from this library.
 */
void predopt_oracle_free(struct PredoptOracle *oracle);

/**
 * Load a linear model from a checkpoint file written by the predopt
 * trainer.
 *
 * # Safety
 * `path` must be a valid C string and `out` a writable pointer slot. On
 * success the slot receives a handle to release with
 * [`predopt_model_free`].
 */
enum PredoptStatus predopt_model_load(const char *path, struct PredoptModel **out);

/**
 * Number of features the model expects per slot, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle from this library.
 */
size_t predopt_model_n_features(const struct PredoptModel *model);

/**
 * Predict minimize-sense objective coefficients for `n_slots` rows of
 * `n_features` features, laid out row-major in `features`. Writes
 * `n_slots` values to `out`.
 *
 * # Safety
 * `model` must be a live handle from this library, `features` must point
 * to `n_slots * n_features` readable values, and `out` to `n_slots`
 * writable values.
 */
enum PredoptStatus predopt_model_predict(const struct PredoptModel *model,
                                         const double *features,
                                         size_t n_slots,
                                         size_t n_features,
                                         double *out);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or an unreleased handle from this library.
 */
void predopt_model_free(struct PredoptModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREDOPT_H */
