#ifndef EAL_H
#define EAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every entry point.
 */
typedef enum EalStatus {
  EAL_STATUS_OK = 0,
  /**
   * The source text does not parse.
   */
  EAL_STATUS_SYNTAX = 1,
  /**
   * The program is not derivable in the depth system.
   */
  EAL_STATUS_ILL_FORMED = 2,
  /**
   * The program does not type-check.
   */
  EAL_STATUS_ILL_TYPED = 3,
  /**
   * A step, state or normalization budget ran out.
   */
  EAL_STATUS_BUDGET = 4,
  /**
   * A null pointer, invalid UTF-8 or an out-of-range argument.
   */
  EAL_STATUS_INVALID_ARGUMENT = 5,
  /**
   * A panic inside the library; the handle may be reused.
   */
  EAL_STATUS_INTERNAL = 6,
} EalStatus;

/**
 * Scheduling policy for [`eal_program_run`].
 */
typedef enum EalSchedule {
  EAL_SCHEDULE_DETERMINISTIC = 0,
  EAL_SCHEDULE_SEEDED = 1,
  EAL_SCHEDULE_EXHAUSTIVE = 2,
} EalSchedule;

/**
 * A parsed source unit.
 */
typedef struct EalProgram EalProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or an empty string.
 * The pointer is valid until the next call on the same thread.
 */
const char *eal_last_error(void);

/**
 * Library version as a static string.
 */
const char *eal_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void eal_string_free(char *s);

/**
 * Parses a source unit into a new handle.
 *
 * # Safety
 * `src` must be a NUL-terminated string; `out` must be writable.
 */
enum EalStatus eal_program_parse(const char *src, struct EalProgram **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `p` must come from [`eal_program_parse`] and not have been freed.
 */
void eal_program_free(struct EalProgram *p);

/**
 * Prints the program back in ASCII concrete syntax.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum EalStatus eal_program_print(const struct EalProgram *p, char **out);

/**
 * Decides well-formedness at `delta`; on success writes the revised depth.
 *
 * # Safety
 * `p` must be a live handle; `depth_out` must be writable.
 */
enum EalStatus eal_program_check_depth(const struct EalProgram *p,
                                       uint32_t delta,
                                       uint32_t *depth_out);

/**
 * Type-checks at `delta` against the declared contexts; writes the type.
 *
 * # Safety
 * `p` must be a live handle; `type_out` must be writable.
 */
enum EalStatus eal_program_type(const struct EalProgram *p, uint32_t delta, char **type_out);

/**
 * Evaluates the program.
 *
 * Deterministic and seeded runs write the final state to `final_out` and
 * the number of steps to `steps_out`. Exhaustive runs write the distinct
 * final states, one per line, and the longest reduction length; `budget`
 * bounds steps or visited states respectively.
 *
 * # Safety
 * `p` must be a live handle; both outputs must be writable.
 */
enum EalStatus eal_program_run(const struct EalProgram *p,
                               enum EalSchedule schedule,
                               uint64_t seed,
                               size_t budget,
                               size_t *steps_out,
                               char **final_out);

/**
 * Writes the elementary bound certificate as JSON.
 *
 * # Safety
 * `p` must be a live handle; `json_out` must be writable.
 */
enum EalStatus eal_program_bound(const struct EalProgram *p, char **json_out);

/**
 * Strongly normalizes a term and reads back a numeral under `bangs` bangs.
 *
 * # Safety
 * `term` must be a NUL-terminated string; `out` must be writable.
 */
enum EalStatus eal_decode_numeral(const char *term, uint32_t bangs, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EAL_H */
