#ifndef MDKIT_H
#define MDKIT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call across the C boundary.
 */
typedef enum MdkitStatus {
  MDKIT_STATUS_OK = 0,
  MDKIT_STATUS_NULL_POINTER = 1,
  MDKIT_STATUS_INVALID_UTF8 = 2,
  MDKIT_STATUS_CONFIG = 3,
  MDKIT_STATUS_NUMERICAL = 4,
  MDKIT_STATUS_IO = 5,
  MDKIT_STATUS_BUFFER_TOO_SMALL = 6,
  MDKIT_STATUS_INTERNAL = 7,
} MdkitStatus;

/**
 * Opaque simulation handle.
 */
typedef struct MdkitSimulation MdkitSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mdkit_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mdkit_last_error(void);

/**
 * Build a simulation from configuration text (`key = value` lines).
 *
 * # Safety
 * `config` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum MdkitStatus mdkit_simulation_new(const char *config, struct MdkitSimulation **out);

/**
 * Release a handle. Null is accepted.
 *
 * # Safety
 * `sim` must come from [`mdkit_simulation_new`] and not be used afterwards.
 */
void mdkit_simulation_free(struct MdkitSimulation *sim);

/**
 * Advance by `steps` time steps.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum MdkitStatus mdkit_simulation_step(struct MdkitSimulation *sim, uint64_t steps);

/**
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum MdkitStatus mdkit_simulation_time(const struct MdkitSimulation *sim, double *out);

/**
 * Total charge Σ|ψ|²·ΔV of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum MdkitStatus mdkit_simulation_charge(const struct MdkitSimulation *sim, double *out);

/**
 * Number of grid points, i.e. the length of a density buffer.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum MdkitStatus mdkit_simulation_grid_len(const struct MdkitSimulation *sim, uintptr_t *out);

/**
 * Copy the particle density into `buf` (last axis fastest).
 *
 * # Safety
 * `sim` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum MdkitStatus mdkit_simulation_density(const struct MdkitSimulation *sim,
                                          double *buf,
                                          uintptr_t len);

/**
 * Write the current fields as `MDKIT1` dumps into directory `dir`.
 *
 * # Safety
 * `sim` must be a live handle and `dir` a valid NUL-terminated string.
 */
enum MdkitStatus mdkit_simulation_write_dumps(const struct MdkitSimulation *sim, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDKIT_H */
