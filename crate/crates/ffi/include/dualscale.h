#ifndef DUALSCALE_H
#define DUALSCALE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_INVALID_INPUT = 1,
  DS_STATUS_INTEGRATION_FAILURE = 2,
  DS_STATUS_UNSUPPORTED_PARAMETER = 3,
  DS_STATUS_DEGENERATE_SIGNAL = 4,
  DS_STATUS_NUMERICAL_DEGENERACY = 5,
  DS_STATUS_NOT_YET_IDENTIFIED = 6,
  DS_STATUS_TRAINING_FAILURE = 7,
  DS_STATUS_CONFIG = 8,
  DS_STATUS_IO = 9,
  DS_STATUS_PARSE = 10,
  DS_STATUS_NULL_POINTER = 11,
  DS_STATUS_PANIC = 12,
} DsStatus;

// A policy wrapped with a homogeneity transform.
typedef struct DsController DsController;

// A loaded policy network.
typedef struct DsPolicy DsPolicy;

// Recursive least-squares estimator state.
typedef struct DsRls DsRls;

// A simulated trajectory.
typedef struct DsTrajectory DsTrajectory;

// Numeric scalings relating a perturbed plant to the nominal one.
typedef struct DsTransform DsTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ds_version(void);

// Copies the calling thread's last error message into `buf` (truncated and
// NUL-terminated) and returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t ds_last_error(char *buf, uintptr_t len);

// Loads a policy file written by the `train` command.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DsStatus ds_policy_load(const char *path, struct DsPolicy **out);

// Number of observation entries the policy expects (0 for null).
//
// # Safety
// `policy` must be null or a live handle.
uintptr_t ds_policy_input_dim(const struct DsPolicy *policy);

// Evaluates the raw policy output at `x`.
//
// # Safety
// `x` must point to `n` doubles and `u` must be writable.
enum DsStatus ds_policy_act(const struct DsPolicy *policy, const double *x, uintptr_t n, double *u);

// # Safety
// `policy` must be null or a handle not yet freed.
void ds_policy_free(struct DsPolicy *policy);

// Pendulum transform for `(m, l, g)` relative to the nominal `(nm, nl, ng)`.
//
// # Safety
// `out` must be writable.
enum DsStatus ds_pendulum_transform(double m,
                                    double l,
                                    double g,
                                    double nm,
                                    double nl,
                                    double ng,
                                    struct DsTransform **out);

// Vehicle/load transform; the mass ratios must match.
//
// # Safety
// `out` must be writable.
enum DsStatus ds_driverload_transform(double big_m,
                                      double m,
                                      double l,
                                      double g,
                                      double n_big_m,
                                      double nm,
                                      double nl,
                                      double ng,
                                      struct DsTransform **out);

// State dimension of the transform (0 for null).
//
// # Safety
// `t` must be null or a live handle.
uintptr_t ds_transform_dim(const struct DsTransform *t);

// Time scale `zeta` (NaN for null).
//
// # Safety
// `t` must be null or a live handle.
double ds_transform_zeta(const struct DsTransform *t);

// Control scale `c0` (NaN for null).
//
// # Safety
// `t` must be null or a live handle.
double ds_transform_control_scale(const struct DsTransform *t);

// Copies the state scales `c_i` into `out[0..n]`; `n` must equal the
// transform dimension.
//
// # Safety
// `out` must point to `n` writable doubles.
enum DsStatus ds_transform_state_scales(const struct DsTransform *t, double *out, uintptr_t n);

// Copies the amplitude scales `kappa_i` into `out[0..n]`.
//
// # Safety
// `out` must point to `n` writable doubles.
enum DsStatus ds_transform_kappa(const struct DsTransform *t, double *out, uintptr_t n);

// # Safety
// `t` must be null or a handle not yet freed.
void ds_transform_free(struct DsTransform *t);

// Wraps copies of `policy` and `transform` into a homogenizing controller.
// A positive `saturation` clamps the policy output before scaling.
//
// # Safety
// Handles must be live; `out` must be writable.
enum DsStatus ds_controller_new(const struct DsPolicy *policy,
                                const struct DsTransform *transform,
                                double saturation,
                                struct DsController **out);

// Control input `u = c0 * pi(c .* x)`.
//
// # Safety
// `x` must point to `n` doubles and `u` must be writable.
enum DsStatus ds_controller_evaluate(struct DsController *c,
                                     const double *x,
                                     uintptr_t n,
                                     double *u);

// # Safety
// `c` must be null or a handle not yet freed.
void ds_controller_free(struct DsController *c);

// Estimator with initial estimate `psi0[0..n]`, covariance `p0 * I` and
// forgetting factor `lambda`.
//
// # Safety
// `psi0` must point to `n` doubles; `out` must be writable.
enum DsStatus ds_rls_new(const double *psi0,
                         uintptr_t n,
                         double p0,
                         double lambda,
                         struct DsRls **out);

// One update with regressor `phi[0..n]` and measurement `y`.
//
// # Safety
// `phi` must point to `n` doubles.
enum DsStatus ds_rls_update(struct DsRls *r, const double *phi, uintptr_t n, double y);

// Copies the current estimate into `out[0..n]`.
//
// # Safety
// `out` must point to `n` writable doubles.
enum DsStatus ds_rls_estimate(const struct DsRls *r, double *out, uintptr_t n);

// Trace of the covariance (NaN for null).
//
// # Safety
// `r` must be null or a live handle.
double ds_rls_trace(const struct DsRls *r);

// # Safety
// `r` must be null or a handle not yet freed.
void ds_rls_free(struct DsRls *r);

// Greedy pendulum rollout of `policy` from `(theta0, rate0)`, through
// `transform` when it is non-null. `t_final` and `period` are on the
// nominal time axis; a positive `saturation` clamps the policy output.
// `success`, when non-null, receives 1 if the upright criterion holds.
//
// # Safety
// Handles must be live or null where allowed; outputs must be writable.
enum DsStatus ds_pendulum_rollout(const struct DsPolicy *policy,
                                  const struct DsTransform *transform,
                                  double m,
                                  double l,
                                  double g,
                                  double theta0,
                                  double rate0,
                                  double t_final,
                                  double period,
                                  double saturation,
                                  int32_t *success,
                                  struct DsTrajectory **out);

// Number of samples (0 for null).
//
// # Safety
// `t` must be null or a live handle.
uintptr_t ds_trajectory_len(const struct DsTrajectory *t);

// State dimension (0 for null).
//
// # Safety
// `t` must be null or a live handle.
uintptr_t ds_trajectory_dim(const struct DsTrajectory *t);

// Reads sample `i`: its time, the state into `state[0..n]` and the control.
//
// # Safety
// `time` and `control` must be writable; `state` must hold `n` doubles.
enum DsStatus ds_trajectory_sample(const struct DsTrajectory *t,
                                   uintptr_t i,
                                   double *time,
                                   double *state,
                                   uintptr_t n,
                                   double *control);

// # Safety
// `t` must be null or a handle not yet freed.
void ds_trajectory_free(struct DsTrajectory *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALSCALE_H */
