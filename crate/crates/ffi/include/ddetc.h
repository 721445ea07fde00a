#ifndef DDETC_H
#define DDETC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DdetcMode {
  DDETC_MODE_EVENT_TRIGGERED = 0,
  DDETC_MODE_FIXED = 1,
  DDETC_MODE_TIME_TRIGGERED = 2,
} DdetcMode;

typedef enum DdetcStatus {
  DDETC_STATUS_OK = 0,
  DDETC_STATUS_NULL_POINTER = 1,
  DDETC_STATUS_INVALID_ARGUMENT = 2,
  DDETC_STATUS_CONFIG = 3,
  DDETC_STATUS_NUMERICAL = 4,
  DDETC_STATUS_SOLVER_BREAKDOWN = 5,
  DDETC_STATUS_IO = 6,
  DDETC_STATUS_PANIC = 7,
} DdetcStatus;

/**
 * Opaque plant handle.
 */
typedef struct DdetcPlant DdetcPlant;

/**
 * Opaque handle to a finished run.
 */
typedef struct DdetcRun DdetcRun;

/**
 * Opaque scenario (parsed config) handle.
 */
typedef struct DdetcScenario DdetcScenario;

/**
 * Engine settings for [`ddetc_simulate`]; start from [`ddetc_engine_params_default`].
 */
typedef struct DdetcEngineParams {
  size_t window;
  uint64_t horizon;
  uint64_t seed;
  enum DdetcMode mode;
  /**
   * Re-design period for `TimeTriggered`.
   */
  uint64_t period;
  double c_sigma;
  double eps_f;
  double divergence_threshold;
} DdetcEngineParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *ddetc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ddetc_version(void);

/**
 * Constant plant `x+ = A x + B u` with row-major `a` (`nx*nx`) and `b` (`nx*nu`).
 *
 * # Safety
 * `a` and `b` must point to the stated number of doubles; `out` must be writable.
 */
enum DdetcStatus ddetc_plant_constant(size_t nx,
                                      size_t nu,
                                      const double *a,
                                      const double *b,
                                      struct DdetcPlant **out);

/**
 * Benchmark plant whose input matrix flips sign every `period` steps, scaled by `ell`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DdetcStatus ddetc_plant_switching(uint64_t period, double ell, struct DdetcPlant **out);

/**
 * Benchmark plant with a sinusoidal perturbation of amplitude `delta_a`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DdetcStatus ddetc_plant_sinusoidal(double period, double delta_a, struct DdetcPlant **out);

/**
 * Benchmark plant whose perturbation vanishes at `t_delta`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DdetcStatus ddetc_plant_vanishing(double period, double t_delta, struct DdetcPlant **out);

/**
 * Piecewise plant read from a knot file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DdetcStatus ddetc_plant_from_file(const char *path, struct DdetcPlant **out);

/**
 * # Safety
 * `plant` must be null or a handle not yet freed.
 */
void ddetc_plant_free(struct DdetcPlant *plant);

/**
 * # Safety
 * `plant` must be a live handle; `nx` and `nu` must be writable.
 */
enum DdetcStatus ddetc_plant_dims(const struct DdetcPlant *plant, size_t *nx, size_t *nu);

/**
 * Writes `A(k)` (`nx*nx`) and `B(k)` (`nx*nu`) row-major.
 *
 * # Safety
 * `plant` must be a live handle; `a` and `b` must hold the stated sizes.
 */
enum DdetcStatus ddetc_plant_eval(const struct DdetcPlant *plant,
                                  uint64_t k,
                                  double *a,
                                  size_t a_len,
                                  double *b,
                                  size_t b_len);

/**
 * One plant step `A(k) x + B(k) u` written to `x_next` (length `nx`).
 *
 * # Safety
 * Buffers must hold `nx`, `nu` and `nx` doubles respectively.
 */
enum DdetcStatus ddetc_plant_step(const struct DdetcPlant *plant,
                                  uint64_t k,
                                  const double *x,
                                  const double *u,
                                  double *x_next);

/**
 * Defaults for a plant with `nx` states and `nu` inputs.
 */
struct DdetcEngineParams ddetc_engine_params_default(size_t nx, size_t nu);

/**
 * Parses scenario text; relative file paths resolve against the working directory.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum DdetcStatus ddetc_scenario_from_str(const char *text, struct DdetcScenario **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DdetcStatus ddetc_scenario_from_file(const char *path, struct DdetcScenario **out);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum DdetcStatus ddetc_scenario_set_seed(struct DdetcScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void ddetc_scenario_free(struct DdetcScenario *scenario);

/**
 * Runs a scenario; artifacts are written only if `out_dir` is non-null.
 *
 * # Safety
 * `scenario` must be a live handle, `out_dir` null or NUL-terminated, `out` writable.
 */
enum DdetcStatus ddetc_scenario_run(const struct DdetcScenario *scenario,
                                    const char *out_dir,
                                    struct DdetcRun **out);

/**
 * Simulates `plant` from `x0` (length `nx`) under `params`.
 *
 * # Safety
 * `plant` must be a live handle, `params` readable, `x0` hold `x0_len` doubles, `out` writable.
 */
enum DdetcStatus ddetc_simulate(const struct DdetcPlant *plant,
                                const struct DdetcEngineParams *params,
                                const double *x0,
                                size_t x0_len,
                                struct DdetcRun **out);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void ddetc_run_free(struct DdetcRun *run);

/**
 * Number of hybrid-time records `(k, j)`.
 *
 * # Safety
 * `run` must be a live handle; `n` writable.
 */
enum DdetcStatus ddetc_run_num_records(const struct DdetcRun *run, size_t *n);

/**
 * Hybrid time and state of record `index`; `x` must hold `nx` doubles.
 *
 * # Safety
 * `run` must be a live handle; output pointers writable.
 */
enum DdetcStatus ddetc_run_record(const struct DdetcRun *run,
                                  size_t index,
                                  uint64_t *k,
                                  uint64_t *j,
                                  double *x,
                                  size_t x_len);

/**
 * Copies up to `cap` episode instants into `buf` and stores the total count in `n`.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `cap` values; `n` writable.
 */
enum DdetcStatus ddetc_run_episodes(const struct DdetcRun *run,
                                    uint64_t *buf,
                                    size_t cap,
                                    size_t *n);

/**
 * Final and maximum state norm.
 *
 * # Safety
 * `run` must be a live handle; outputs writable.
 */
enum DdetcStatus ddetc_run_norms(const struct DdetcRun *run, double *final_norm, double *max_norm);

/**
 * `diverged` is set to 1 when the divergence threshold was crossed;
 * `bound_ok` to 1 when the Lyapunov bound held at every record.
 *
 * # Safety
 * `run` must be a live handle; outputs writable.
 */
enum DdetcStatus ddetc_run_status(const struct DdetcRun *run, int32_t *diverged, int32_t *bound_ok);

/**
 * Trajectory CSV as a newly allocated string; release with [`ddetc_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` writable.
 */
enum DdetcStatus ddetc_run_trajectory_csv(const struct DdetcRun *run, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ddetc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDETC_H */
