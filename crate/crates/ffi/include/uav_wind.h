#ifndef UAV_WIND_H
#define UAV_WIND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UwStatus {
  UW_STATUS_OK = 0,
  UW_STATUS_NULL_POINTER = 1,
  UW_STATUS_INVALID_ARGUMENT = 2,
  UW_STATUS_CONFIG = 3,
  UW_STATUS_SOLVER = 4,
  UW_STATUS_IO = 5,
  UW_STATUS_OUT_OF_RANGE = 6,
  UW_STATUS_PANIC = 7,
} UwStatus;

/**
 * Experiment configuration: scenario, wind, channel and online settings.
 */
typedef struct UwConfig UwConfig;

typedef struct UwFlightLog UwFlightLog;

typedef struct UwPlan UwPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *uw_last_error(void);

/**
 * Library version, static string.
 */
const char *uw_version(void);

/**
 * Reference scenario with default online and city settings.
 */
struct UwConfig *uw_config_default(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum UwStatus uw_config_from_toml(const char *toml, struct UwConfig **out);

/**
 * # Safety
 * `cfg` must come from a `uw_config_*` constructor or be null.
 */
void uw_config_free(struct UwConfig *cfg);

/**
 * Number of time slots N of the scenario; 0 for a null handle.
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
size_t uw_config_slots(const struct UwConfig *cfg);

/**
 * Number of ground users K; 0 for a null handle.
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
size_t uw_config_users(const struct UwConfig *cfg);

/**
 * Sets the number of wind samples per slot used by offline planning.
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
enum UwStatus uw_config_set_samples(struct UwConfig *cfg, size_t samples);

/**
 * Propulsion power (W) of the scenario's vehicle at velocity `v`,
 * acceleration `a` and wind `w`, each a 3-vector.
 *
 * # Safety
 * Pointers must reference 3 readable doubles; `out` one writable double.
 */
enum UwStatus uw_power(const struct UwConfig *cfg,
                       const double *v,
                       const double *a,
                       const double *w,
                       double *out);

/**
 * Draws `n` wind samples at the reference altitude into `v_ref` (m/s)
 * and `beta` (deg).
 *
 * # Safety
 * `v_ref` and `beta` must each hold `n` writable doubles.
 */
enum UwStatus uw_sample_wind(const struct UwConfig *cfg,
                             uint64_t seed,
                             size_t n,
                             double *v_ref,
                             double *beta);

/**
 * Runs the offline design; `windless != 0` plans for calm air.
 *
 * # Safety
 * `cfg` must be live; `out` writable.
 */
enum UwStatus uw_plan_offline(const struct UwConfig *cfg,
                              uint64_t seed,
                              int32_t windless,
                              struct UwPlan **out);

/**
 * # Safety
 * `plan` must come from [`uw_plan_offline`] or be null.
 */
void uw_plan_free(struct UwPlan *plan);

/**
 * `R_min / sum P_ub` of the plan; NaN for a null handle.
 *
 * # Safety
 * `plan` must be live or null.
 */
double uw_plan_objective(const struct UwPlan *plan);

/**
 * # Safety
 * `plan` must be live or null.
 */
size_t uw_plan_slots(const struct UwPlan *plan);

/**
 * Position of slot `n` (zero-based) into `xyz[3]`.
 *
 * # Safety
 * `plan` must be live; `xyz` must hold 3 writable doubles.
 */
enum UwStatus uw_plan_position(const struct UwPlan *plan, size_t n, double *xyz);

/**
 * Scheduled user of slot `n`, one-based; 0 when idle or out of range.
 *
 * # Safety
 * `plan` must be live or null.
 */
size_t uw_plan_user(const struct UwPlan *plan, size_t n);

/**
 * Flies `plan` through one wind realization and city; `adapt != 0` uses
 * the online adapter, otherwise the plan is flown open loop.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum UwStatus uw_fly(const struct UwConfig *cfg,
                     const struct UwPlan *plan,
                     uint64_t wind_seed,
                     uint64_t city_seed,
                     int32_t adapt,
                     struct UwFlightLog **out);

/**
 * # Safety
 * `log` must come from [`uw_fly`] or be null.
 */
void uw_log_free(struct UwFlightLog *log);

/**
 * Propulsion energy (J); NaN for a null handle.
 *
 * # Safety
 * `log` must be live or null.
 */
double uw_log_energy(const struct UwFlightLog *log);

/**
 * Smallest per-user realized rate summed over slots; NaN for a null handle.
 *
 * # Safety
 * `log` must be live; `users` is the scenario's K.
 */
double uw_log_min_rate(const struct UwFlightLog *log, size_t users);

/**
 * # Safety
 * `log` must be live or null.
 */
size_t uw_log_slots(const struct UwFlightLog *log);

/**
 * Flown position of slot `n` into `xyz[3]`.
 *
 * # Safety
 * `log` must be live; `xyz` must hold 3 writable doubles.
 */
enum UwStatus uw_log_position(const struct UwFlightLog *log, size_t n, double *xyz);

/**
 * Writes the flight log CSV to `path`.
 *
 * # Safety
 * `log` must be live; `path` a NUL-terminated string.
 */
enum UwStatus uw_log_write_csv(const struct UwFlightLog *log, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAV_WIND_H */
