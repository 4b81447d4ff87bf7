#ifndef LEAKDET_H
#define LEAKDET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LdStatus {
  LD_STATUS_OK = 0,
  LD_STATUS_NULL_POINTER = 1,
  LD_STATUS_INVALID_ARGUMENT = 2,
  LD_STATUS_INVALID_UTF8 = 3,
  LD_STATUS_SCENARIO = 4,
  LD_STATUS_TRAINING_FAILED = 5,
  LD_STATUS_BUFFER_TOO_SMALL = 6,
  LD_STATUS_PANIC = 7,
} LdStatus;

/**
 * Opaque simulated device.
 */
typedef struct LdDevice LdDevice;

typedef struct LdResonator {
  double f0_hz;
  double q;
} LdResonator;

typedef struct LdPower {
  double avg_power_w;
  double sleep_fraction;
  double lifetime_years;
} LdPower;

typedef struct LdCounts {
  uint16_t quiet;
  uint16_t leak;
  uint16_t noise;
} LdCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of a status code. Takes a plain
 * integer so unknown codes from C are safe.
 */
const char *ld_status_message(int32_t status);

/**
 * Resonator frequency and Q from cavity and neck dimensions in metres.
 *
 * # Safety
 * `result` must be null or point to writable memory for one `LdResonator`.
 */
enum LdStatus ld_resonator_design(double length_m,
                                  double width_m,
                                  double height_m,
                                  double hole_radius_m,
                                  double wall_thickness_m,
                                  struct LdResonator *result);

/**
 * Band energy of one frame of 256 converter codes.
 *
 * # Safety
 * `codes` must point to `len` readable values; `result` to one `double`.
 */
enum LdStatus ld_band_energy(const uint16_t *codes, size_t len, double *result);

/**
 * Average power with default battery and acquisition constants.
 *
 * # Safety
 * `result` must be null or point to one writable `LdPower`.
 */
enum LdStatus ld_average_power(double tau_s, double acq_per_poll, struct LdPower *result);

/**
 * Parses a TOML scenario, powers the device on and trains it. Monitoring
 * starts at t = 0. `max_training_sessions` of 0 means no cap.
 *
 * # Safety
 * `scenario_toml` must be a NUL-terminated string; `device_out` must
 * point to writable storage for one pointer.
 */
enum LdStatus ld_device_new(const char *scenario_toml,
                            uint32_t max_training_sessions,
                            struct LdDevice **device_out);

/**
 * Releases a device. Null is ignored.
 *
 * # Safety
 * `device` must come from `ld_device_new` and not be used afterwards.
 */
void ld_device_free(struct LdDevice *device);

/**
 * Runs the device forward by `dt_s` seconds of simulated time.
 *
 * # Safety
 * `device` must be a live handle.
 */
enum LdStatus ld_device_advance(struct LdDevice *device, double dt_s);

/**
 * Simulated time since monitor start, s.
 *
 * # Safety
 * `device` must be a live handle and `result` writable.
 */
enum LdStatus ld_device_time(struct LdDevice *device, double *result);

/**
 * Executes one host command (opcode then payload bytes). The response is
 * written to `response` and its length to `response_len`.
 *
 * # Safety
 * `command` must point to `command_len` bytes, `response` to
 * `response_cap` writable bytes, `response_len` to one `size_t`.
 */
enum LdStatus ld_device_command(struct LdDevice *device,
                                const uint8_t *command,
                                size_t command_len,
                                uint8_t *response,
                                size_t response_cap,
                                size_t *response_len);

/**
 * Levels of the alarm and noise lines.
 *
 * # Safety
 * `device` must be a live handle; `alarm` and `noise` writable.
 */
enum LdStatus ld_device_lines(struct LdDevice *device, bool *alarm, bool *noise);

/**
 * Current Q, S, R window counts.
 *
 * # Safety
 * `device` must be a live handle and `result` writable.
 */
enum LdStatus ld_device_counts(struct LdDevice *device, struct LdCounts *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEAKDET_H */
