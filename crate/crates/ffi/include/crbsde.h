#ifndef CRBSDE_H
#define CRBSDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Node-indexed output fields of a solution.
typedef enum CrbsdeField {
  CRBSDE_FIELD_Y = 0,
  CRBSDE_FIELD_Z = 1,
  CRBSDE_FIELD_K_PLUS = 2,
  CRBSDE_FIELD_K_MINUS = 3,
} CrbsdeField;

typedef enum CrbsdeMethod {
  CRBSDE_METHOD_PICARD = 0,
  CRBSDE_METHOD_PENALTY = 1,
} CrbsdeMethod;

// Status codes; the nonzero codes from 2 to 5 match the CLI exit codes.
typedef enum CrbsdeStatus {
  CRBSDE_STATUS_OK = 0,
  // Null pointer, bad UTF-8, bad index or buffer too small.
  CRBSDE_STATUS_INVALID_ARGUMENT = 1,
  CRBSDE_STATUS_CONFIG = 2,
  CRBSDE_STATUS_PRECONDITION = 3,
  CRBSDE_STATUS_NUMERICAL = 4,
  CRBSDE_STATUS_CAP_EXCEEDED = 5,
  // A panic was caught at the boundary.
  CRBSDE_STATUS_INTERNAL = 6,
} CrbsdeStatus;

// A validated problem: tree, subfiltration, driver, obstacles, terminal value.
typedef struct CrbsdeProblem CrbsdeProblem;

// Solution triple with its diagnostics.
typedef struct CrbsdeSolution CrbsdeSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *crbsde_last_error_message(void);

// Library version as a static string.
const char *crbsde_version(void);

// Builds a problem from a scenario config (the CLI JSON format; its
// `problem` section is required). `seed` drives random trees and
// subfiltrations.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum CrbsdeStatus crbsde_problem_from_json(const char *json,
                                           uint64_t seed,
                                           struct CrbsdeProblem **out);

// # Safety
// `p` must come from [`crbsde_problem_from_json`] and not be used afterwards.
void crbsde_problem_free(struct CrbsdeProblem *p);

// Number of time levels `N + 1`; 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t crbsde_problem_num_levels(const struct CrbsdeProblem *p);

// Number of nodes at `level`; 0 for a null handle or a level out of range.
//
// # Safety
// `p` must be null or a live problem handle.
size_t crbsde_problem_level_len(const struct CrbsdeProblem *p, size_t level);

// Solves by Picard iteration or, with `CRBSDE_METHOD_PENALTY`, by
// penalization at level `penalty` (ignored otherwise).
//
// # Safety
// `p` must be a live problem handle and `out` a valid pointer.
enum CrbsdeStatus crbsde_solve(const struct CrbsdeProblem *p,
                               enum CrbsdeMethod method,
                               double penalty,
                               struct CrbsdeSolution **out);

// # Safety
// `s` must come from [`crbsde_solve`] and not be used afterwards.
void crbsde_solution_free(struct CrbsdeSolution *s);

// `Y_0`; NaN for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
double crbsde_solution_y0(const struct CrbsdeSolution *s);

// Iterations used by the solver; 0 for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
size_t crbsde_solution_iterations(const struct CrbsdeSolution *s);

// 1 when every audit of the solution passed, 0 otherwise.
//
// # Safety
// `s` must be null or a live solution handle.
int32_t crbsde_solution_passed(const struct CrbsdeSolution *s);

// Copies one level of a node-indexed field into `buf`, which must hold at
// least `crbsde_problem_level_len(level)` values.
//
// # Safety
// `s` must be a live solution handle and `buf` valid for `len` writes.
enum CrbsdeStatus crbsde_solution_copy(const struct CrbsdeSolution *s,
                                       enum CrbsdeField field,
                                       size_t level,
                                       double *buf,
                                       size_t len);

// Diagnostics and `E[Y|G]` as a JSON document.
//
// # Safety
// `s` must be a live solution handle and `out` a valid pointer. The string
// is released with [`crbsde_string_free`].
enum CrbsdeStatus crbsde_solution_report_json(const struct CrbsdeSolution *s, char **out);

// # Safety
// `s` must be null or a string returned by this library.
void crbsde_string_free(char *s);

// Two-sided Skorokhod reflection of the path `x[0..n]` between `lower` and
// `upper`. Writes `y = x + k` and `k`; `k_plus` and `k_minus` may be null.
//
// # Safety
// Input arrays must hold `n` values; non-null outputs must have room for `n`.
enum CrbsdeStatus crbsde_skorokhod(size_t n,
                                   const double *x,
                                   const double *lower,
                                   const double *upper,
                                   double *y,
                                   double *k,
                                   double *k_plus,
                                   double *k_minus);

// Runs a CLI command (`"solve"`, `"dynkin"`, `"penalize-sweep"`, ...) on a
// config in memory and returns the JSON report; no files are written.
//
// # Safety
// `command` and `config_json` must be NUL-terminated strings and `out` a
// valid pointer. The string is released with [`crbsde_string_free`].
enum CrbsdeStatus crbsde_run_json(const char *command,
                                  const char *config_json,
                                  uint64_t seed,
                                  int32_t check,
                                  char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRBSDE_H */
