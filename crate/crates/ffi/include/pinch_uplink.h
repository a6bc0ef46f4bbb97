#ifndef PINCH_UPLINK_H
#define PINCH_UPLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PU_MODE_SIC 0

#define PU_MODE_NSIC 1

#define PU_POSITION_TIGHT 0

#define PU_POSITION_FROZEN 1

typedef enum PuStatus {
  PU_STATUS_OK = 0,
  PU_STATUS_NULL_POINTER = 1,
  PU_STATUS_INVALID_ARGUMENT = 2,
  PU_STATUS_BUFFER_TOO_SMALL = 3,
  PU_STATUS_NOT_POSITIVE_DEFINITE = 4,
  PU_STATUS_DIMENSION_MISMATCH = 5,
  PU_STATUS_PANIC = 6,
} PuStatus;

// Users, their power budget and the current antenna layout.
typedef struct PuScenario PuScenario;

// System parameters, mirroring the core `SystemParams`.
typedef struct PuParams {
  double carrier_hz;
  double n_eff;
  // Receiver noise power (W).
  double noise_power;
  // Waveguide height (m).
  double height;
  double half_x;
  double half_y;
  // Feed-point x-coordinate, negative (m).
  double feed_x;
} PuParams;

// Optimizer settings. `mode` is one of `PU_MODE_*`, `position_objective`
// one of `PU_POSITION_*`.
typedef struct PuOptions {
  uint32_t mode;
  double tol;
  size_t max_iters;
  double gd_l0;
  double gd_lmin;
  double gd_shrink;
  size_t gd_max_sweeps;
  uint32_t position_objective;
} PuOptions;

// Outcome summary of one optimizer run.
typedef struct PuRunInfo {
  // Sum-rate (nats) at the returned layout and powers.
  double rate_nats;
  // Sum-rate (nats) before the first pass.
  double initial_rate_nats;
  size_t iterations;
  bool converged;
} PuRunInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default system parameters (28 GHz, -90 dBm noise, 30 m x 40 m region).
struct PuParams pu_params_default(void);

// Default optimizer settings for `mode`.
struct PuOptions pu_options_default(uint32_t mode);

// Builds a scenario from explicit data. `user_xy` holds `n_users` (x, y)
// pairs, `x` one antenna position per waveguide.
//
// # Safety
// Pointers must be null or valid for the stated lengths; `out` receives a
// handle to release with [`pu_scenario_free`].
enum PuStatus pu_scenario_new(const struct PuParams *params,
                              const double *user_xy,
                              size_t n_users,
                              const double *x,
                              size_t n_waveguides,
                              double p_max,
                              struct PuScenario **out);

// Draws users and a random initial layout from `seed`.
//
// # Safety
// `params` and `out` must be null or valid.
enum PuStatus pu_scenario_sample(const struct PuParams *params,
                                 uint64_t seed,
                                 size_t n_users,
                                 size_t n_waveguides,
                                 double p_max,
                                 struct PuScenario **out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must come from this library and not be used afterwards.
void pu_scenario_free(struct PuScenario *scenario);

// Number of users, 0 for a null handle.
//
// # Safety
// `scenario` must be null or a live handle.
size_t pu_scenario_n_users(const struct PuScenario *scenario);

// Number of waveguides, 0 for a null handle.
//
// # Safety
// `scenario` must be null or a live handle.
size_t pu_scenario_n_waveguides(const struct PuScenario *scenario);

// Copies the antenna positions into `x_out`.
//
// # Safety
// `x_out` must hold `len` writable doubles.
enum PuStatus pu_scenario_layout(const struct PuScenario *scenario, double *x_out, size_t len);

// Replaces the antenna positions. `len` must equal the waveguide count.
//
// # Safety
// `scenario` must be a live handle, `x` must hold `len` doubles.
enum PuStatus pu_scenario_set_layout(struct PuScenario *scenario, const double *x, size_t len);

// Sum-rate (nats) of the current layout with the given powers.
//
// # Safety
// `powers` must hold `len` doubles, `rate_out` must be writable.
enum PuStatus pu_sum_rate(const struct PuScenario *scenario,
                          const double *powers,
                          size_t len,
                          uint32_t mode,
                          double *rate_out);

// Jointly optimizes positions and powers starting from the scenario's
// layout, which is replaced by the optimized one. `options` may be null for
// the SIC defaults; `info` may be null.
//
// # Safety
// `scenario` must be a live handle and `powers_out` hold `len` doubles.
enum PuStatus pu_optimize(struct PuScenario *scenario,
                          const struct PuOptions *options,
                          double *powers_out,
                          size_t len,
                          struct PuRunInfo *info);

// Power-only optimization on a fixed uniform linear array with as many
// elements as the scenario has waveguides. The scenario is not modified.
//
// # Safety
// As for [`pu_optimize`].
enum PuStatus pu_optimize_baseline(const struct PuScenario *scenario,
                                   const struct PuOptions *options,
                                   double *powers_out,
                                   size_t len,
                                   struct PuRunInfo *info);

// Message for the last failed call on this thread, empty after a success.
// Valid until the next call on the same thread.
const char *pu_last_error(void);

// Library version as a static NUL-terminated string.
const char *pu_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINCH_UPLINK_H */
