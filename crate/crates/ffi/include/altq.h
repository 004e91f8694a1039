#ifndef ALTQ_H
#define ALTQ_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which branch of the equilibrium characterization applies.
 */
typedef enum AltqCase {
  ALTQ_CASE_ALL_BALK = 0,
  ALTQ_CASE_INTERIOR = 1,
  ALTQ_CASE_ALL_JOIN = 2,
} AltqCase;

/**
 * Stationary-distribution solver used inside the equilibrium search.
 */
typedef enum AltqMethod {
  ALTQ_METHOD_QBD = 0,
  ALTQ_METHOD_GENFUNC = 1,
} AltqMethod;

/**
 * Result code of every fallible call.
 */
typedef enum AltqStatus {
  ALTQ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ALTQ_STATUS_NULL_POINTER = 1,
  /**
   * Parameters, strategy or configuration rejected.
   */
  ALTQ_STATUS_INVALID_INPUT = 2,
  /**
   * A solver failed on valid input.
   */
  ALTQ_STATUS_SOLVER_FAILURE = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  ALTQ_STATUS_INVALID_UTF8 = 4,
  /**
   * Internal error; the library caught a panic.
   */
  ALTQ_STATUS_INTERNAL = 5,
} AltqStatus;

/**
 * Validated model parameters.
 */
typedef struct AltqParams AltqParams;

/**
 * Result of [`altq_solve`].
 */
typedef struct AltqSolution AltqSolution;

/**
 * Equilibrium strategy and the performance measures at it.
 */
typedef struct AltqSummary {
  double q_e;
  enum AltqCase equilibrium_case;
  uint32_t n_e;
  uint32_t n_s;
  double residual;
  uint32_t iterations;
  uint32_t fallbacks;
  double mu_e;
  double a_e;
  double mean_number;
  double welfare;
} AltqSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Validates parameters and returns a new handle in `*out`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum AltqStatus altq_params_new(double lambda,
                                double mu,
                                double theta,
                                double zeta,
                                double reward,
                                double cost,
                                double entrance_fee,
                                double service_fee,
                                double refund,
                                struct AltqParams **out);

/**
 * Parses and validates a JSON parameter object (keys `lambda`, `mu`,
 * `theta`, `zeta`, `R`, `C`, `fe`, `fs`, `r`).
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum AltqStatus altq_params_from_json(const char *json, struct AltqParams **out);

/**
 * Releases a parameter handle. Null is ignored.
 *
 * # Safety
 * `params` must come from this library and not be used afterwards.
 */
void altq_params_free(struct AltqParams *params);

/**
 * The joining threshold `n_e` and reneging threshold `n_s`.
 *
 * # Safety
 * `params` must be a live handle; `n_e` and `n_s` valid pointers.
 */
enum AltqStatus altq_params_thresholds(const struct AltqParams *params,
                                       uint32_t *n_e,
                                       uint32_t *n_s);

/**
 * Expected net benefit of a joining customer who arrives in an
 * unobservable period while others join with probability `q`.
 *
 * # Safety
 * `params` must be a live handle and `out` a valid pointer.
 */
enum AltqStatus altq_unconditional_benefit(const struct AltqParams *params,
                                           double q,
                                           enum AltqMethod method,
                                           double *out);

/**
 * Expected net benefit of a customer who joins behind `n` others.
 *
 * # Safety
 * `params` must be a live handle and `out` a valid pointer.
 */
enum AltqStatus altq_conditional_benefit(const struct AltqParams *params, uint64_t n, double *out);

/**
 * Computes the equilibrium and its measures.
 *
 * # Safety
 * `params` must be a live handle and `out` a valid pointer.
 */
enum AltqStatus altq_solve(const struct AltqParams *params,
                           enum AltqMethod method,
                           struct AltqSolution **out);

/**
 * Copies the solution into `*out`.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum AltqStatus altq_solution_summary(const struct AltqSolution *solution, struct AltqSummary *out);

/**
 * Releases a solution handle. Null is ignored.
 *
 * # Safety
 * `solution` must come from this library and not be used afterwards.
 */
void altq_solution_free(struct AltqSolution *solution);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *altq_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *altq_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALTQ_H */
