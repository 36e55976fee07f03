#ifndef DUALKAN_H
#define DUALKAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Point classification.
 */
typedef enum {
  DK_MEMBERSHIP_INSIDE1 = 1,
  DK_MEMBERSHIP_INSIDE2 = 2,
  DK_MEMBERSHIP_ON_GAMMA = 3,
  DK_MEMBERSHIP_OUTSIDE = 4,
} DkMembership;

/*
 Subdomain selector.
 */
typedef enum {
  /*
   Choose by point location.
   */
  DK_SIDE_AUTO = 0,
  DK_SIDE_OMEGA1 = 1,
  DK_SIDE_OMEGA2 = 2,
} DkSide;

/*
 Status code of every call.
 */
typedef enum {
  DK_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  DK_STATUS_NULL_POINTER = 1,
  /*
   An argument was malformed or out of range.
   */
  DK_STATUS_INVALID_ARGUMENT = 2,
  /*
   A point lay outside the region the call requires.
   */
  DK_STATUS_DOMAIN = 3,
  /*
   Training produced a non-finite loss.
   */
  DK_STATUS_NUMERICAL = 4,
  /*
   Any other library failure.
   */
  DK_STATUS_INTERNAL = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  DK_STATUS_PANIC = 6,
} DkStatus;

/*
 A trained or loaded pair of subdomain networks.
 */
typedef struct DkNetwork DkNetwork;

/*
 A built-in benchmark problem.
 */
typedef struct DkProblem DkProblem;

/*
 The result of a training run.
 */
typedef struct DkRun DkRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *dk_last_error_message(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void dk_string_free(char *s);

/*
 Loads built-in problem `id` (`"e1"`, `"e4"`, `"e5"` or `"e6"`).

 # Safety
 `id` must be a NUL-terminated string; `out` must be writable.
 */
DkStatus dk_problem_new(const char *id, DkProblem **out);

/*
 # Safety
 `p` must be null or a handle from [`dk_problem_new`] not yet freed.
 */
void dk_problem_free(DkProblem *p);

/*
 Classifies `(x, y)` against the problem's domain decomposition.

 # Safety
 `problem` must be a live handle; `out` must be writable.
 */
DkStatus dk_problem_classify(const DkProblem *problem, double x, double y, DkMembership *out);

/*
 Exact solution of `side` at `(x, y)`; `DK_SIDE_AUTO` is not accepted.

 # Safety
 `problem` must be a live handle; `out` must be writable.
 */
DkStatus dk_problem_exact(const DkProblem *problem, double x, double y, DkSide side, double *out);

/*
 Parses a network from the JSON written by `dk_network_to_json` or the CLI.

 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
DkStatus dk_network_from_json(const char *json, DkNetwork **out);

/*
 # Safety
 `net` must be a live handle; `out` must be writable.
 */
DkStatus dk_network_to_json(const DkNetwork *net, char **out);

/*
 # Safety
 `net` must be null or a live handle.
 */
void dk_network_free(DkNetwork *net);

/*
 Total trainable parameters of both subdomain networks.

 # Safety
 `net` must be a live handle; `out` must be writable.
 */
DkStatus dk_network_param_count(const DkNetwork *net, size_t *out);

/*
 Piecewise network value at `(x, y)`; with `DK_SIDE_AUTO` the network of
 the subdomain containing the point is used.

 # Safety
 `net` and `problem` must be live handles; `out` must be writable.
 */
DkStatus dk_network_eval(const DkNetwork *net,
                         const DkProblem *problem,
                         double x,
                         double y,
                         DkSide side,
                         double *out);

/*
 Values of one subdomain network at `n` points given as interleaved
 `xy[2i], xy[2i+1]`.

 # Safety
 `xy` must hold `2n` doubles and `out` room for `n`.
 */
DkStatus dk_network_eval_batch(const DkNetwork *net,
                               DkSide side,
                               const double *xy,
                               size_t n,
                               double *out);

/*
 Trains a preset such as `"e1-kan-rard"`. `steps` overrides the preset's
 step count when nonzero.

 # Safety
 `preset` must be NUL-terminated; `out` must be writable.
 */
DkStatus dk_train_preset(const char *preset, uint64_t seed, size_t steps, DkRun **out);

/*
 Trains from an experiment config in JSON.

 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
DkStatus dk_train_config_json(const char *json, DkRun **out);

/*
 # Safety
 `run` must be null or a live handle.
 */
void dk_run_free(DkRun *run);

/*
 Copy of the trained networks as a new handle.

 # Safety
 `run` must be a live handle; `out` must be writable.
 */
DkStatus dk_run_network(const DkRun *run, DkNetwork **out);

/*
 Test-set error report as JSON; undefined errors are `null`.

 # Safety
 `run` must be a live handle; `out` must be writable.
 */
DkStatus dk_run_errors_json(const DkRun *run, char **out);

/*
 Loss history as CSV with a header row.

 # Safety
 `run` must be a live handle; `out` must be writable.
 */
DkStatus dk_run_loss_csv(const DkRun *run, char **out);

/*
 Parameter count of one KAN with layer widths `widths[0..n]`.

 # Safety
 `widths` must hold `n` values; `out` must be writable.
 */
DkStatus dk_kan_param_count(const size_t *widths,
                            size_t n,
                            size_t grid_intervals,
                            size_t spline_order,
                            size_t *out);

/*
 Parameter count of one MLP with layer widths `widths[0..n]`.

 # Safety
 `widths` must hold `n` values; `out` must be writable.
 */
DkStatus dk_mlp_param_count(const size_t *widths, size_t n, size_t *out);

/*
 `sqrt(Σ|u−û|² / Σ|u|²)` over `n ≥ 1` values; NaN when `Σ|u|² = 0`.

 # Safety
 `exact` and `approx` must hold `n` values; `out` must be writable.
 */
DkStatus dk_relative_l2(const double *exact, const double *approx, size_t n, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DUALKAN_H */
