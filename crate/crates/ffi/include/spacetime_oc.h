#ifndef SPACETIME_OC_H
#define SPACETIME_OC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StocStatus {
  STOC_STATUS_OK = 0,
  STOC_STATUS_NULL_POINTER = 1,
  STOC_STATUS_INVALID_ARGUMENT = 2,
  STOC_STATUS_DIMENSION_MISMATCH = 3,
  STOC_STATUS_NOT_POSITIVE_DEFINITE = 4,
  STOC_STATUS_SOLVER_FAILURE = 5,
  STOC_STATUS_IO = 6,
  STOC_STATUS_PANIC = 7,
} StocStatus;

/**
 * Opaque handle to an assembled space-time system.
 */
typedef struct StocProblem StocProblem;

typedef struct StocNewtonOptions {
  double c;
  double omega;
  double increment_tol;
  double cg_rel_tol;
  size_t max_newton;
  /**
   * 0 selects `10 sqrt(n) + 100`.
   */
  size_t cg_max_iter;
} StocNewtonOptions;

/**
 * `double target(const double *x, size_t dim, double t, void *user)`
 */
typedef double (*StocTargetFn)(const double *x, size_t dim, double t, void *user);

typedef struct StocNewtonStats {
  bool converged;
  size_t newton_iterations;
  size_t total_cg_iterations;
  size_t lower_active;
  size_t upper_active;
  /**
   * `||F2||_inf` of the returned pair.
   */
  double complementarity;
} StocNewtonStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default semi-smooth Newton options.
 */
struct StocNewtonOptions stoc_newton_options_default(void);

/**
 * Static description of a status code.
 */
const char *stoc_status_string(enum StocStatus status);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t stoc_last_error_message(char *buf, size_t len);

/**
 * Assembles the system on the unit cube of dimension `dim` with `n_x` cells
 * per axis, `n_t` temporal intervals on `(0, 1)` and regularization `rho`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum StocStatus stoc_problem_new(size_t dim,
                                 size_t n_x,
                                 size_t n_t,
                                 double rho,
                                 struct StocProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from `stoc_problem_new` not yet freed.
 */
void stoc_problem_free(struct StocProblem *p);

/**
 * Total number of unknowns `n_t * m_x`; the factors are written to the
 * optional out-pointers.
 *
 * # Safety
 * `p` must be a live handle; `n_t` and `m_x` must be null or writable.
 */
size_t stoc_problem_dofs(const struct StocProblem *p, size_t *n_t, size_t *m_x);

/**
 * `out = K v`.
 *
 * # Safety
 * `v` and `out` must hold `len` doubles and must not overlap.
 */
enum StocStatus stoc_problem_apply(const struct StocProblem *p,
                                   const double *v,
                                   double *out,
                                   size_t len);

/**
 * Load vector of `target(x, t)` with Gauss rules exact to `order` in time
 * and space (1..=5).
 *
 * # Safety
 * `target` is called with a pointer to `dim` coordinates; `out` must hold
 * `len` doubles.
 */
enum StocStatus stoc_problem_load(const struct StocProblem *p,
                                  StocTargetFn target,
                                  void *user,
                                  size_t order,
                                  double *out,
                                  size_t len);

/**
 * Solves `K u = f` by mass-diagonal preconditioned CG.
 *
 * # Safety
 * `f` and `u` must hold `len` doubles; `iterations` may be null.
 */
enum StocStatus stoc_problem_solve(const struct StocProblem *p,
                                   const double *f,
                                   double *u,
                                   size_t len,
                                   double rel_tol,
                                   size_t *iterations);

/**
 * Box-constrained problem `lower <= u <= upper` by semi-smooth Newton.
 * `lambda` may be null. Non-convergence within `max_newton` steps returns
 * `SolverFailure` but still fills the outputs and `stats`.
 *
 * # Safety
 * All non-null arrays must hold `len` doubles; `options` and `stats` may
 * be null.
 */
enum StocStatus stoc_problem_solve_constrained(const struct StocProblem *p,
                                               const double *f,
                                               const double *lower,
                                               const double *upper,
                                               const struct StocNewtonOptions *options,
                                               double *u,
                                               double *lambda,
                                               size_t len,
                                               struct StocNewtonStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPACETIME_OC_H */
