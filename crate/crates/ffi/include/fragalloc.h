#ifndef FRAGALLOC_H
#define FRAGALLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FaStatus {
  FA_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  FA_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The scenario, policy or goal was rejected.
   */
  FA_STATUS_INPUT_ERROR = 2,
  /**
   * Evaluation or simulation failed.
   */
  FA_STATUS_RUNTIME_ERROR = 3,
  /**
   * The library panicked; the handle involved should be freed.
   */
  FA_STATUS_PANIC = 4,
} FaStatus;

/**
 * A validated scenario.
 */
typedef struct FaScenario FaScenario;

/**
 * A simulation advanced round by round.
 */
typedef struct FaSimulation FaSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for a write.
 */
enum FaStatus fa_scenario_load(const char *path, struct FaScenario **out);

/**
 * Parses a scenario from JSON text. Relative policy files resolve against
 * `base_dir`, or the current directory when it is null.
 *
 * # Safety
 * `json` must be a NUL-terminated string, `base_dir` null or one, and `out`
 * valid for a write.
 */
enum FaStatus fa_scenario_from_json(const char *json,
                                    const char *base_dir,
                                    struct FaScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void fa_scenario_free(struct FaScenario *scenario);

/**
 * Replaces the scenario's policy with a builtin one.
 *
 * # Safety
 * `scenario` must be a live handle and `name` a NUL-terminated string.
 */
enum FaStatus fa_scenario_set_policy(struct FaScenario *scenario, const char *name);

/**
 * Writes the scenario's initial fact text to `*out`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for a write.
 */
enum FaStatus fa_emit_facts(const struct FaScenario *scenario, char **out);

/**
 * Evaluates the policy over the initial facts and writes the facts
 * matching `goal`, one per line, to `*out`.
 *
 * # Safety
 * `scenario` must be a live handle, `goal` a NUL-terminated string and
 * `out` valid for a write.
 */
enum FaStatus fa_query(const struct FaScenario *scenario, const char *goal, char **out);

/**
 * Writes the rule text of a builtin policy to `*out`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` valid for a write.
 */
enum FaStatus fa_export_policy(const char *name, char **out);

/**
 * Runs the scenario to completion and writes the JSON-lines metrics to
 * `*out`. A failed run still produces the partial metrics and returns
 * `RUNTIME_ERROR`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for a write.
 */
enum FaStatus fa_run_metrics_jsonl(const struct FaScenario *scenario, char **out);

/**
 * Starts a simulation from a copy of the scenario.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for a write.
 */
enum FaStatus fa_simulation_new(const struct FaScenario *scenario, struct FaSimulation **out);

/**
 * Runs one round. `*finished` is set to true once no rounds remain, in
 * which case nothing was run.
 *
 * # Safety
 * `sim` must be a live handle and `finished` valid for a write.
 */
enum FaStatus fa_simulation_step(struct FaSimulation *sim, bool *finished);

/**
 * Writes each node's fact-base digest, one hex line per node in id
 * order, to `*out`.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum FaStatus fa_simulation_digests(const struct FaSimulation *sim, char **out);

/**
 * Writes the metrics recorded so far as JSON lines to `*out`.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum FaStatus fa_simulation_metrics_jsonl(const struct FaSimulation *sim, char **out);

/**
 * # Safety
 * `sim` must be null or a handle from this library not yet freed.
 */
void fa_simulation_free(struct FaSimulation *sim);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void fa_string_free(char *s);

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call into the library from the
 * same thread.
 */
const char *fa_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAGALLOC_H */
