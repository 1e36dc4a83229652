#ifndef NCORBIFOLD_H
#define NCORBIFOLD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NcoStatus {
  NCO_STATUS_OK = 0,
  NCO_STATUS_NULL_ARGUMENT = 1,
  NCO_STATUS_INVALID_UTF8 = 2,
  NCO_STATUS_IO = 3,
  NCO_STATUS_PARSE = 4,
  NCO_STATUS_UNRESOLVED_REFERENCE = 5,
  NCO_STATUS_INVARIANT_VIOLATION = 6,
  NCO_STATUS_DOMAIN = 7,
  NCO_STATUS_TASK_FAILED = 8,
  NCO_STATUS_INTERNAL = 9,
} NcoStatus;

typedef enum NcoConvention {
  /**
   * Use the convention stored in the scenario.
   */
  NCO_CONVENTION_SCENARIO = 0,
  NCO_CONVENTION_COUNTING = 1,
  NCO_CONVENTION_NORMALIZED = 2,
} NcoConvention;

/**
 * Opaque discrete orbifold.
 */
typedef struct NcoOrbifold NcoOrbifold;

/**
 * Opaque loaded scenario.
 */
typedef struct NcoScenario NcoScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nco_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *nco_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void nco_string_free(char *s);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcoStatus nco_scenario_load(const char *path, struct NcoScenario **out);

/**
 * Parses and validates a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcoStatus nco_scenario_parse(const char *json, struct NcoScenario **out);

/**
 * # Safety
 * `s` must be null or a handle from `nco_scenario_load`/`nco_scenario_parse`.
 */
void nco_scenario_free(struct NcoScenario *s);

/**
 * Number of tasks listed in the scenario.
 *
 * # Safety
 * `s` must be a valid handle.
 */
size_t nco_scenario_task_count(const struct NcoScenario *s);

/**
 * Runs every task and returns the JSON report through `report_json`.
 * Returns `NCO_STATUS_TASK_FAILED` (with the report still set) when a task
 * fails.
 *
 * # Safety
 * `s` must be a valid handle; `report_json` a valid pointer. A negative
 * `tolerance` keeps the default solver tolerance.
 */
enum NcoStatus nco_scenario_run(const struct NcoScenario *s,
                                enum NcoConvention convention,
                                uint64_t seed,
                                double tolerance,
                                char **report_json);

/**
 * Cycle `C_n` with uniform edge length and `Z_{n/shift}` acting by rotation.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NcoStatus nco_orbifold_rotation(size_t n,
                                     double edge_length,
                                     size_t shift,
                                     struct NcoOrbifold **out);

/**
 * Cycle `C_n` with uniform edge length and `Z₂` reflecting through vertex 0.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NcoStatus nco_orbifold_reflection(size_t n, double edge_length, struct NcoOrbifold **out);

/**
 * # Safety
 * `o` must be null or a handle from an `nco_orbifold_*` constructor.
 */
void nco_orbifold_free(struct NcoOrbifold *o);

/**
 * Orbifold distance between the orbits of `x` and `y`.
 *
 * # Safety
 * `o` must be a valid handle and `distance` a valid pointer.
 */
enum NcoStatus nco_orbifold_distance(const struct NcoOrbifold *o,
                                     size_t x,
                                     size_t y,
                                     double *distance);

/**
 * Number of singular vertices; writes up to `capacity` of them to `vertices`.
 *
 * # Safety
 * `o` must be a valid handle; `vertices` must hold `capacity` entries or be
 * null when `capacity` is 0.
 */
size_t nco_orbifold_singular_vertices(const struct NcoOrbifold *o,
                                      size_t *vertices,
                                      size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCORBIFOLD_H */
