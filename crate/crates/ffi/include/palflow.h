#ifndef PALFLOW_H
#define PALFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PalflowMethod {
  PALFLOW_METHOD_RK4 = 0,
  PALFLOW_METHOD_RK45 = 1,
} PalflowMethod;

typedef enum PalflowStatus {
  PALFLOW_STATUS_OK = 0,
  PALFLOW_STATUS_NULL_POINTER = 1,
  PALFLOW_STATUS_INVALID_ARGUMENT = 2,
  PALFLOW_STATUS_UNKNOWN_PROBLEM = 3,
  PALFLOW_STATUS_PARSE_ERROR = 4,
  PALFLOW_STATUS_NUMERIC_FAULT = 5,
  PALFLOW_STATUS_BUFFER_TOO_SMALL = 6,
  PALFLOW_STATUS_PANIC = 7,
} PalflowStatus;

typedef enum PalflowStopReason {
  PALFLOW_STOP_REASON_KKT_TOL = 0,
  PALFLOW_STOP_REASON_TIME_LIMIT = 1,
  PALFLOW_STOP_REASON_NON_FINITE = 2,
} PalflowStopReason;

typedef enum PalflowProxKind {
  PALFLOW_PROX_KIND_ZERO = 0,
  PALFLOW_PROX_KIND_L1 = 1,
  PALFLOW_PROX_KIND_INDICATOR_ZERO = 2,
  /*
   Uses the `weight` argument of [`palflow_prox`].
   */
  PALFLOW_PROX_KIND_QUADRATIC = 3,
} PalflowProxKind;

/*
 Opaque problem handle.
 */
typedef struct PalflowProblem PalflowProblem;

/*
 Opaque solution handle.
 */
typedef struct PalflowSolution PalflowSolution;

/*
 Solver settings. Start from [`palflow_options_default`].
 */
typedef struct PalflowOptions {
  double mu;
  /*
   Same weight for every inequality; `<= 0` keeps the problem's own weights.
   */
  double eta;
  double dt;
  /*
   `<= 0` uses the problem's default horizon.
   */
  double t_end;
  double kkt_tol;
  enum PalflowMethod method;
  double abs_tol;
  double rel_tol;
  size_t record_every;
  /*
   Nonzero removes the agent mean from the initial `w'` of network problems.
   */
  uint8_t project_dual;
} PalflowOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread. Valid until the next call
 that fails on the same thread; never null.
 */
const char *palflow_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *palflow_version(void);

struct PalflowOptions palflow_options_default(void);

/*
 Loads a built-in problem by name.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PalflowStatus palflow_problem_from_registry(const char *name, struct PalflowProblem **out);

/*
 Parses a problem from JSON text.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PalflowStatus palflow_problem_from_json(const char *json, struct PalflowProblem **out);

/*
 # Safety
 `problem` must be null or a handle from a `palflow_problem_from_*` call
 that has not been freed.
 */
void palflow_problem_free(struct PalflowProblem *problem);

/*
 Decision dimension (per agent for network problems); 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t palflow_problem_dim(const struct PalflowProblem *problem);

/*
 Number of agents: 1 for centralized problems, 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t palflow_problem_agents(const struct PalflowProblem *problem);

/*
 Integrates the flow until the KKT tolerance or the horizon. A run that
 stops at the horizon still returns `Ok`; check
 [`palflow_solution_converged`].

 # Safety
 `problem` must be a live handle, `options` null (defaults) or valid, and
 `out` a valid pointer.
 */
enum PalflowStatus palflow_solve(const struct PalflowProblem *problem,
                                 const struct PalflowOptions *options,
                                 struct PalflowSolution **out);

/*
 # Safety
 `solution` must be null or a handle from [`palflow_solve`] that has not
 been freed.
 */
void palflow_solution_free(struct PalflowSolution *solution);

/*
 1 if the KKT tolerance was reached, 0 otherwise or for a null handle.

 # Safety
 `solution` must be null or a live handle.
 */
uint8_t palflow_solution_converged(const struct PalflowSolution *solution);

/*
 # Safety
 `solution` must be a live handle.
 */
enum PalflowStopReason palflow_solution_stop_reason(const struct PalflowSolution *solution);

/*
 Final smoothed KKT residual; NaN for a null handle.

 # Safety
 `solution` must be null or a live handle.
 */
double palflow_solution_kkt(const struct PalflowSolution *solution);

/*
 Final integration time summed over continuation rounds; NaN for a null handle.

 # Safety
 `solution` must be null or a live handle.
 */
double palflow_solution_time(const struct PalflowSolution *solution);

/*
 The solution `x`, or the agent average for network problems. Writes the entry count to `written` even when the buffer is too
 small.

 # Safety
 `solution` must be a live handle, `buf` must hold `len` doubles and
 `written` must be valid.
 */
enum PalflowStatus palflow_solution_x(const struct PalflowSolution *solution,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

/*
 Inequality multipliers, stacked over agents for network problems. Writes the entry count to `written` even when the buffer is too
 small.

 # Safety
 `solution` must be a live handle, `buf` must hold `len` doubles and
 `written` must be valid.
 */
enum PalflowStatus palflow_solution_lambda(const struct PalflowSolution *solution,
                                           double *buf,
                                           size_t len,
                                           size_t *written);

/*
 Equality multipliers, stacked over agents for network problems. Writes the entry count to `written` even when the buffer is too
 small.

 # Safety
 `solution` must be a live handle, `buf` must hold `len` doubles and
 `written` must be valid.
 */
enum PalflowStatus palflow_solution_nu(const struct PalflowSolution *solution,
                                       double *buf,
                                       size_t len,
                                       size_t *written);

/*
 Evaluates `prox_{μφ}(v)` into `out` (length `len`). `weight` is only read
 for [`PalflowProxKind::Quadratic`].

 # Safety
 `v` and `out` must each hold `len` doubles.
 */
enum PalflowStatus palflow_prox(enum PalflowProxKind kind,
                                double weight,
                                const double *v,
                                size_t len,
                                double mu,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PALFLOW_H */
