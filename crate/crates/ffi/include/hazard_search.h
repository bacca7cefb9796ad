#ifndef HAZARD_SEARCH_H
#define HAZARD_SEARCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * How a run ended.
 */
typedef enum HsRunState {
  HS_RUN_STATE_BUDGET_EXHAUSTED = 0,
  HS_RUN_STATE_STOPPED = 1,
  HS_RUN_STATE_INCOMPLETE = 2,
} HsRunState;

/**
 * Result codes.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  HS_STATUS_CONFIG = 3,
  HS_STATUS_INVALID_ARGUMENT = 4,
  HS_STATUS_OBJECTIVE = 5,
  HS_STATUS_IO = 6,
  HS_STATUS_OUT_OF_RANGE = 7,
  HS_STATUS_NO_METRICS = 8,
  HS_STATUS_PANIC = 9,
} HsStatus;

/**
 * Opaque run configuration.
 */
typedef struct HsConfig HsConfig;

/**
 * Opaque run report.
 */
typedef struct HsReport HsReport;

/**
 * Risk callback for [`hs_run_custom`]. Writes the risk at `point` (length
 * `dim`) to `out_risk` and returns 0, or returns nonzero on failure.
 */
typedef int (*HsObjectiveFn)(const double *point, size_t dim, void *user_data, double *out_risk);

/**
 * Scores of a run against ground truth. Optional values are NaN when absent.
 */
typedef struct HsMetrics {
  double f2_grid;
  double api;
  double adi;
  double hazard_ratio;
  bool no_detection;
} HsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *hs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsStatus hs_config_from_toml(const char *toml, struct HsConfig **out);

/**
 * Loads a named preset such as `"gaussian-2d"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsStatus hs_config_preset(const char *name, struct HsConfig **out);

/**
 * Replaces the budget with a fixed number of samples.
 *
 * # Safety
 * `config` must come from this library and not be freed.
 */
enum HsStatus hs_config_set_fixed_budget(struct HsConfig *config, size_t samples);

/**
 * Writes the configuration as TOML into a new string released with
 * [`hs_string_free`].
 *
 * # Safety
 * `config` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_config_to_toml(const struct HsConfig *config, char **out);

/**
 * # Safety
 * `config` must come from this library or be null; it must not be used
 * afterwards.
 */
void hs_config_free(struct HsConfig *config);

/**
 * Tree search on the configured built-in objective.
 *
 * A run whose objective fails still yields a report, with state
 * [`HsRunState::Incomplete`].
 *
 * # Safety
 * `config` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_run_item(const struct HsConfig *config, uint64_t seed, struct HsReport **out);

/**
 * Uniform random sampling on the configured built-in objective.
 *
 * # Safety
 * `config` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_run_baseline(const struct HsConfig *config, uint64_t seed, struct HsReport **out);

/**
 * Tree search on a caller-supplied risk function over the box
 * `[lower, upper]` of dimension `dim`. Points with risk above
 * `hazard_threshold` are hazardous; `metric_low` and `metric_high` bound the
 * risk. The objective in `config` is ignored. When the configuration sets a
 * grid resolution the callback is also evaluated on that grid for scoring.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` doubles; `objective` must be safe
 * to call with `user_data` for the duration of the call.
 */
enum HsStatus hs_run_custom(const struct HsConfig *config,
                            size_t dim,
                            const double *lower,
                            const double *upper,
                            double hazard_threshold,
                            double metric_low,
                            double metric_high,
                            HsObjectiveFn objective,
                            void *user_data,
                            uint64_t seed,
                            struct HsReport **out);

/**
 * # Safety
 * `report` must come from this library or be null; it must not be used
 * afterwards.
 */
void hs_report_free(struct HsReport *report);

/**
 * Number of evaluated samples, or 0 for a null report.
 *
 * # Safety
 * `report` must come from this library or be null.
 */
size_t hs_report_n_samples(const struct HsReport *report);

/**
 * Dimension of the search space, or 0 for a null report.
 *
 * # Safety
 * `report` must come from this library or be null.
 */
size_t hs_report_dim(const struct HsReport *report);

/**
 * Number of identified hazardous domains, or 0 for a null report.
 *
 * # Safety
 * `report` must come from this library or be null.
 */
size_t hs_report_n_domains(const struct HsReport *report);

/**
 * # Safety
 * `report` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_report_state(const struct HsReport *report, enum HsRunState *out);

/**
 * Copies the bounds of domain `index` into `lower` and `upper`, each of
 * length [`hs_report_dim`].
 *
 * # Safety
 * `lower` and `upper` must each have room for `hs_report_dim(report)`
 * doubles.
 */
enum HsStatus hs_report_domain(const struct HsReport *report,
                               size_t index,
                               double *lower,
                               double *upper);

/**
 * Copies the run's scores into `out`; [`HsStatus::NoMetrics`] when the run
 * had no ground truth.
 *
 * # Safety
 * `report` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_report_metrics(const struct HsReport *report, struct HsMetrics *out);

/**
 * Serializes the full report as JSON into a new string released with
 * [`hs_string_free`].
 *
 * # Safety
 * `report` must come from this library and `out` be a valid pointer.
 */
enum HsStatus hs_report_to_json(const struct HsReport *report, char **out);

/**
 * Writes the report and its CSV/JSONL exports into directory `dir`.
 *
 * # Safety
 * `report` must come from this library and `dir` be a NUL-terminated string.
 */
enum HsStatus hs_report_write(const struct HsReport *report, const char *dir);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void hs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAZARD_SEARCH_H */
