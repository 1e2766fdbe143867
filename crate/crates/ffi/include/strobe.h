#ifndef STROBE_H
#define STROBE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status returned by every fallible call.
 */
typedef enum StrobeStatus {
  STROBE_STATUS_OK = 0,
  STROBE_STATUS_INVALID_ARGUMENT = 1,
  STROBE_STATUS_CONFIG = 2,
  STROBE_STATUS_NON_CONVERGENCE = 3,
  STROBE_STATUS_IO = 4,
  STROBE_STATUS_FORMAT = 5,
  STROBE_STATUS_NUMERICAL = 6,
  STROBE_STATUS_NULL_POINTER = 7,
  STROBE_STATUS_BUFFER_TOO_SMALL = 8,
  STROBE_STATUS_PANIC = 9,
} StrobeStatus;

/**
 * A trained reduced model with its hyper-reduced online evaluator.
 */
typedef struct StrobeModel StrobeModel;

/**
 * A high-fidelity problem built from an experiment config.
 */
typedef struct StrobeProblem StrobeProblem;

/**
 * Diagnostics of one online solve.
 */
typedef struct StrobeReport {
  double residual_norm;
  size_t iterations;
  /**
   * 1 when Gauss-Newton met its gradient tolerance.
   */
  int32_t converged;
  /**
   * 1 when the regressed map was inadmissible and a training map was used.
   */
  int32_t map_fallback;
  double wall_time;
} StrobeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty when none. Valid
 * until the next failing call on the same thread.
 */
const char *strobe_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *strobe_version(void);

/**
 * Builds a problem from a preset name or a JSON config path.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum StrobeStatus strobe_problem_new(const char *config, struct StrobeProblem **out);

/**
 * # Safety
 * `p` must come from [`strobe_problem_new`] and not be used afterwards.
 */
void strobe_problem_free(struct StrobeProblem *p);

/**
 * Number of degrees of freedom of the problem's solution vector.
 *
 * # Safety
 * `p` must be a live problem handle or null.
 */
size_t strobe_problem_n_dofs(const struct StrobeProblem *p);

/**
 * High-fidelity solve at `mu`; the solution is copied to `w` (capacity
 * `w_len`, may be null) and its size written to `n_dofs` (may be null).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum StrobeStatus strobe_problem_solve(const struct StrobeProblem *p,
                                       const double *mu,
                                       size_t n_mu,
                                       double *w,
                                       size_t w_len,
                                       size_t *n_dofs);

/**
 * Opens the reduced model of size `n` (0 selects the largest) stored in a
 * trained container directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum StrobeStatus strobe_model_open(const char *dir, size_t n, struct StrobeModel **out);

/**
 * # Safety
 * `m` must come from [`strobe_model_open`] and not be used afterwards.
 */
void strobe_model_free(struct StrobeModel *m);

/**
 * Trial-space dimension `N`.
 *
 * # Safety
 * `m` must be a live model handle or null.
 */
size_t strobe_model_n(const struct StrobeModel *m);

/**
 * Map-space dimension `M`.
 *
 * # Safety
 * `m` must be a live model handle or null.
 */
size_t strobe_model_map_dim(const struct StrobeModel *m);

/**
 * Number of empirical quadrature elements.
 *
 * # Safety
 * `m` must be a live model handle or null.
 */
size_t strobe_model_n_quadrature(const struct StrobeModel *m);

/**
 * Online solve at `mu`. Writes the generalized coordinates to `alpha`
 * (capacity `alpha_len`), the map coefficients to `a` (capacity `a_len`) and
 * the diagnostics to `report`; any output pointer may be null.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum StrobeStatus strobe_model_solve(const struct StrobeModel *m,
                                     const double *mu,
                                     size_t n_mu,
                                     double *alpha,
                                     size_t alpha_len,
                                     double *a,
                                     size_t a_len,
                                     struct StrobeReport *report);

/**
 * Reference-domain state `sum_n alpha_n zeta_n` written to `w` (capacity
 * `w_len`).
 *
 * # Safety
 * `alpha` must hold `strobe_model_n(m)` values and `w` `w_len` values.
 */
enum StrobeStatus strobe_model_reconstruct(const struct StrobeModel *m,
                                           const double *alpha,
                                           double *w,
                                           size_t w_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STROBE_H */
