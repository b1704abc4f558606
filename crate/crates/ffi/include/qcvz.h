#ifndef QCVZ_H
#define QCVZ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum QcvzStatus {
  QcvzStatus_Ok = 0,
  /**
   * Null pointer, bad UTF-8 or out-of-range index.
   */
  QcvzStatus_InvalidArgument = 1,
  /**
   * Rejected configuration, program or parameter.
   */
  QcvzStatus_InvalidInput = 2,
  /**
   * Step, fit or calibration failure.
   */
  QcvzStatus_Numerical = 3,
  QcvzStatus_Io = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  QcvzStatus_Panic = 5,
} QcvzStatus;

/**
 * A validated device with lazily calibrated pulses per qubit.
 */
typedef struct QcvzDevice QcvzDevice;

/**
 * Compiled TDM schedule.
 */
typedef struct QcvzSchedule QcvzSchedule;

typedef struct QcvzResourceReport {
  uint64_t n_qubits;
  double avg_pw_per_qubit;
  double total_avg_w;
  uint64_t max_tones_per_cable;
  uint64_t cable_count;
  uint64_t if_cable_count;
  double parallelism_worst;
  double parallelism_best;
} QcvzResourceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *qcvz_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void qcvz_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *qcvz_version(void);

/**
 * Closed-form excited population for a constant drive (angular frequencies).
 */
double qcvz_rabi_analytic(double omega, double delta, double t);

/**
 * Resource estimate for `n_qubits` with the default parameters.
 *
 * # Safety
 * `out` must point to writable memory for one report.
 */
enum QcvzStatus qcvz_resources(uint64_t n_qubits, struct QcvzResourceReport *out);

/**
 * Lowers and schedules a program given as JSON (`{"qubits": [["X90", ...], ...]}`).
 * `mode` is `quantized45`, `rolling45` or `free`; `sync` is `asap` or `layered`.
 *
 * # Safety
 * String arguments must be nul-terminated; `out` must be writable.
 */
enum QcvzStatus qcvz_schedule_compile(const char *program_json,
                                      const char *mode,
                                      const char *sync,
                                      struct QcvzSchedule **out);

/**
 * # Safety
 * `s` must come from [`qcvz_schedule_compile`] and not have been freed. Null is ignored.
 */
void qcvz_schedule_free(struct QcvzSchedule *s);

/**
 * Number of control cycles, or 0 for a null handle.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
uintptr_t qcvz_schedule_cycle_count(const struct QcvzSchedule *s);

/**
 * Mean number of qubits fired per cycle, or 0 for a null handle.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
double qcvz_schedule_mean_parallelism(const struct QcvzSchedule *s);

/**
 * IF phase (degrees) and rolling-clock slot of cycle `index`.
 *
 * # Safety
 * `s` must be a live handle; out-pointers must be writable.
 */
enum QcvzStatus qcvz_schedule_cycle(const struct QcvzSchedule *s,
                                    uintptr_t index,
                                    double *theta_if_deg,
                                    uintptr_t *slot);

/**
 * Cycle indices in which `qubit` fires. Writes at most `capacity` entries to
 * `cycles` and the total count to `count`.
 *
 * # Safety
 * `s` must be a live handle; `cycles` must hold `capacity` entries (may be
 * null when `capacity` is 0); `count` must be writable.
 */
enum QcvzStatus qcvz_schedule_qubit_cycles(const struct QcvzSchedule *s,
                                           uintptr_t qubit,
                                           uintptr_t *cycles,
                                           uintptr_t capacity,
                                           uintptr_t *count);

/**
 * The schedule as JSON; free with [`qcvz_string_free`].
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum QcvzStatus qcvz_schedule_to_json(const struct QcvzSchedule *s, char **out);

/**
 * Device from a JSON description.
 *
 * # Safety
 * `json` must be nul-terminated; `out` must be writable.
 */
enum QcvzStatus qcvz_device_from_json(const char *json, struct QcvzDevice **out);

/**
 * The built-in one-qubit device.
 *
 * # Safety
 * `out` must be writable.
 */
enum QcvzStatus qcvz_device_default(struct QcvzDevice **out);

/**
 * # Safety
 * `d` must come from this library and not have been freed. Null is ignored.
 */
void qcvz_device_free(struct QcvzDevice *d);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `d` must be a live handle or null.
 */
uintptr_t qcvz_device_qubit_count(const struct QcvzDevice *d);

/**
 * Runs an experiment on `qubit` over `n` sweep values and writes `n`
 * populations to `p1`.
 *
 * `kind` is `t1`, `echo`, `ramsey` (with `param` the detuning in Hz) or
 * `vz-ramsey` (with `param` the delay in seconds and `xs` in degrees).
 * Pulses are calibrated on first use and cached in the handle.
 *
 * # Safety
 * `d` must be a live handle not used concurrently; `xs` and `p1` must hold `n` values.
 */
enum QcvzStatus qcvz_device_run_experiment(struct QcvzDevice *d,
                                           uintptr_t qubit,
                                           const char *kind,
                                           double param,
                                           const double *xs,
                                           uintptr_t n,
                                           double *p1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCVZ_H */
