#ifndef VARFRAC_H
#define VARFRAC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum VarfracIbp {
  VARFRAC_IBP_INTEGRALS = 0,
  VARFRAC_IBP_DERIVATIVES_LEFT = 1,
  VARFRAC_IBP_DERIVATIVES_RIGHT = 2,
} VarfracIbp;

/**
 * Operator selector for [`varfrac_op_eval`].
 */
typedef enum VarfracOp {
  VARFRAC_OP_LEFT_INTEGRAL = 0,
  VARFRAC_OP_RIGHT_INTEGRAL = 1,
  VARFRAC_OP_LEFT_RL_DERIVATIVE = 2,
  VARFRAC_OP_RIGHT_RL_DERIVATIVE = 3,
  VARFRAC_OP_LEFT_CAPUTO = 4,
  VARFRAC_OP_RIGHT_CAPUTO = 5,
} VarfracOp;

typedef enum VarfracStatus {
  VARFRAC_STATUS_OK = 0,
  VARFRAC_STATUS_NULL_POINTER = 1,
  VARFRAC_STATUS_INVALID_UTF8 = 2,
  VARFRAC_STATUS_INVALID_INPUT = 3,
  VARFRAC_STATUS_BUFFER_SIZE = 4,
  VARFRAC_STATUS_NOT_CONVERGED = 5,
  VARFRAC_STATUS_NO_SYMMETRY = 6,
  VARFRAC_STATUS_PANIC = 7,
} VarfracStatus;

/**
 * A problem built from a JSON configuration.
 */
typedef struct VarfracProblem VarfracProblem;

typedef struct VarfracIbpReport {
  double lhs;
  double rhs;
  double relative_discrepancy;
  size_t intervals;
} VarfracIbpReport;

typedef struct VarfracSolveReport {
  double functional;
  double initial_functional;
  double grad_norm;
  size_t iterations;
  bool converged;
  bool stalled;
  size_t intervals;
} VarfracSolveReport;

typedef struct VarfracResidualSummary {
  double max_norm;
  double l2_norm;
  double interior_max_norm;
  double invariance_max;
  size_t intervals;
} VarfracResidualSummary;

/**
 * The message for the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *varfrac_last_error_message(void);

/**
 * Γ(x) for x > 0.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum VarfracStatus varfrac_gamma(double x, double *out);

/**
 * Parses and validates a JSON problem configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VarfracStatus varfrac_problem_from_json(const char *json, struct VarfracProblem **out);

/**
 * # Safety
 * `problem` must come from `varfrac_problem_from_json` and not be used
 * afterwards. Null is ignored.
 */
void varfrac_problem_free(struct VarfracProblem *problem);

/**
 * Number of grid nodes, `N + 1`; the length every buffer must have.
 *
 * # Safety
 * `problem` must be a live handle or null (returns 0).
 */
size_t varfrac_problem_len(const struct VarfracProblem *problem);

/**
 * Applies one operator to the expression `f` in `t` on the problem grid.
 * The first order on the operator's side is used, else the first order on
 * the other side.
 *
 * # Safety
 * `problem` must be a live handle, `f` a NUL-terminated string and `out` a
 * buffer of `len` doubles.
 */
enum VarfracStatus varfrac_op_eval(const struct VarfracProblem *problem,
                                   enum VarfracOp op,
                                   const char *f,
                                   double *out,
                                   size_t len);

/**
 * Evaluates both sides of an integration-by-parts identity for `f` and `g`
 * with the first left order.
 *
 * # Safety
 * `problem` must be a live handle, `f` and `g` NUL-terminated strings and
 * `out` a valid pointer.
 */
enum VarfracStatus varfrac_check_ibp(const struct VarfracProblem *problem,
                                     enum VarfracIbp which,
                                     const char *f,
                                     const char *g,
                                     struct VarfracIbpReport *out);

/**
 * Minimizes the action. The extremal is written to `q_out` and the report
 * to `report` even when the solver stops early, in which case
 * `NotConverged` is returned.
 *
 * # Safety
 * `problem` must be a live handle, `q_out` a buffer of `len` doubles and
 * `report` a valid pointer.
 */
enum VarfracStatus varfrac_solve(const struct VarfracProblem *problem,
                                 double *q_out,
                                 size_t len,
                                 struct VarfracSolveReport *report);

/**
 * Noether residual of the configured symmetry along the path `q`, written
 * to `out`, with its summary and the invariance residual's max-norm.
 *
 * # Safety
 * `problem` must be a live handle, `q` and `out` buffers of `len` doubles
 * and `summary` a valid pointer.
 */
enum VarfracStatus varfrac_noether_residual(const struct VarfracProblem *problem,
                                            const double *q,
                                            double *out,
                                            size_t len,
                                            struct VarfracResidualSummary *summary);

#endif  /* VARFRAC_H */
