#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "spacetime_oc.h"

static double bump(const double *x, size_t dim, double t, void *user) {
    (void)user;
    double v = 4.0 * t;
    for (size_t i = 0; i < dim; ++i) v *= sin(3.141592653589793 * x[i]);
    return v;
}

int main(void) {
    StocProblem *p = NULL;
    if (stoc_problem_new(2, 4, 4, 0.05, &p) != STOC_STATUS_OK) return 1;
    size_t n_t = 0, m_x = 0;
    size_t n = stoc_problem_dofs(p, &n_t, &m_x);
    if (n != n_t * m_x || n != 36) return 2;

    double *f = calloc(n, sizeof *f), *u = calloc(n, sizeof *u);
    double *lo = calloc(n, sizeof *lo), *hi = calloc(n, sizeof *hi);
    for (size_t j = 0; j < n; ++j) hi[j] = 0.3;
    if (stoc_problem_load(p, bump, NULL, 3, f, n) != STOC_STATUS_OK) return 3;

    StocNewtonOptions opts = stoc_newton_options_default();
    StocNewtonStats stats;
    StocStatus st = stoc_problem_solve_constrained(p, f, lo, hi, &opts, u, NULL, n, &stats);
    if (st != STOC_STATUS_OK || !stats.converged) return 4;
    for (size_t j = 0; j < n; ++j)
        if (u[j] < -1e-12 || u[j] > 0.3 + 1e-12) return 5;

    st = stoc_problem_apply(p, f, u, n + 1);
    char msg[128];
    if (st != STOC_STATUS_DIMENSION_MISMATCH || stoc_last_error_message(msg, sizeof msg) == 0) return 6;

    printf("newton %zu cg %zu upper %zu: %s\n", stats.newton_iterations, stats.total_cg_iterations,
           stats.upper_active, stoc_status_string(STOC_STATUS_OK));
    free(f); free(u); free(lo); free(hi);
    stoc_problem_free(p);
    return 0;
}
