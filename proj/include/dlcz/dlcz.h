/* C interface of the DLCZ memory simulator (libdlcz). */
#ifndef DLCZ_DLCZ_H
#define DLCZ_DLCZ_H

#include <stddef.h>
#include <stdint.h>

#if defined(DLCZ_BUILDING_LIBRARY)
#define DLCZ_API __attribute__((visibility("default")))
#else
#define DLCZ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dlcz_status {
  DLCZ_OK = 0,
  DLCZ_ERR_INVALID_PARAMETER = 1,
  DLCZ_ERR_TIME_ORDER = 2,
  DLCZ_ERR_EMPTY_ENSEMBLE = 3,
  DLCZ_ERR_NO_ROOT = 4,
  DLCZ_ERR_INSUFFICIENT_STATISTICS = 5,
  DLCZ_ERR_BUDGET_EXCEEDED = 6,
  DLCZ_ERR_CONFIG = 7,
  DLCZ_ERR_PARSE = 8,
  DLCZ_ERR_IO = 9,
  DLCZ_ERR_NOT_CONVERGED = 10,
  DLCZ_ERR_INTERNAL = 99
} dlcz_status;

typedef struct dlcz_config dlcz_config;
typedef struct dlcz_result dlcz_result;

typedef struct dlcz_counts {
  uint64_t trials;
  uint64_t n_w;
  uint64_t n_r;
  uint64_t n_r1;
  uint64_t n_r2;
  uint64_t n_wr;
  uint64_t n_wr1;
  uint64_t n_wr2;
  uint64_t n_wr1r2;
} dlcz_counts;

DLCZ_API const char* dlcz_version(void);
DLCZ_API const char* dlcz_status_name(dlcz_status status);

/* Message of the last failed call on this thread ("" if none). */
DLCZ_API const char* dlcz_last_error(void);
/* Line and field of the last config/parse error (0 / "" when unknown). */
DLCZ_API size_t dlcz_last_error_line(void);
DLCZ_API const char* dlcz_last_error_field(void);

/* Strings returned through char** are owned by the caller. */
DLCZ_API void dlcz_string_free(char* text);
/* One line per config field with unit and default. */
DLCZ_API char* dlcz_schema_help(void);
DLCZ_API const char* dlcz_environment_prefix(void);

DLCZ_API dlcz_status dlcz_config_default(dlcz_config** out);
DLCZ_API dlcz_status dlcz_config_load(const char* path, dlcz_config** out);
DLCZ_API dlcz_status dlcz_config_parse(const char* text, const char* source_name, dlcz_config** out);
DLCZ_API dlcz_status dlcz_config_clone(const dlcz_config* config, dlcz_config** out);
DLCZ_API void dlcz_config_free(dlcz_config* config);
/* field: "section.key"; value in config-file syntax, e.g. "3 us". */
DLCZ_API dlcz_status dlcz_config_set(dlcz_config* config, const char* field, const char* value);
DLCZ_API dlcz_status dlcz_config_get(const dlcz_config* config, const char* field, char** value);
/* Applies DLCZ_<SECTION>__<KEY> variables. */
DLCZ_API dlcz_status dlcz_config_apply_environment(dlcz_config* config);
DLCZ_API dlcz_status dlcz_config_validate(const dlcz_config* config);
DLCZ_API dlcz_status dlcz_config_to_string(const dlcz_config* config, char** text);

/* Runs the configured scenario, writing artifacts into out_dir. */
DLCZ_API dlcz_status dlcz_run(const dlcz_config* config, const char* out_dir, dlcz_result** out);
DLCZ_API size_t dlcz_result_metric_count(const dlcz_result* result);
/* name stays valid until dlcz_result_free; error is NaN when undefined. */
DLCZ_API dlcz_status dlcz_result_metric(const dlcz_result* result, size_t index, const char** name,
                                        double* value, double* error);
DLCZ_API size_t dlcz_result_file_count(const dlcz_result* result);
DLCZ_API const char* dlcz_result_file(const dlcz_result* result, size_t index);
DLCZ_API void dlcz_result_free(dlcz_result* result);

/* One run per value under out_dir/sweep_NNN plus out_dir/summary.csv. */
DLCZ_API dlcz_status dlcz_sweep(const dlcz_config* config, const char* field, const char* const* values,
                                size_t value_count, const char* out_dir);

/* Staged calibration against a targets file. On DLCZ_OK or
   DLCZ_ERR_NOT_CONVERGED, *report holds the stage report and *calibrated
   (if non-null) the best configuration found. */
DLCZ_API dlcz_status dlcz_calibrate(const dlcz_config* config, const char* targets_path,
                                    dlcz_config** calibrated, char** report);

/* Coincidence counting on a recorded timetag file (format "csv" or
   "binary"). trials == 0 counts per start, which leaves alpha exact but
   makes p_w and g2 meaningless. With bin_width > 0 a start-stop histogram
   over [range_begin, range_end) is written to out_dir/histogram.csv;
   out_dir/stats.txt always receives the counts. */
DLCZ_API dlcz_status dlcz_analyze_timetags(const char* path, const char* format, double window, double delay,
                                           uint64_t trials, double bin_width, double range_begin,
                                           double range_end, const char* out_dir, dlcz_counts* counts);

DLCZ_API dlcz_status dlcz_antibunching_alpha(const dlcz_counts* counts, double* alpha, double* error);
DLCZ_API dlcz_status dlcz_alpha_model_curve(double p, double c, double* alpha);
DLCZ_API dlcz_status dlcz_selectivity(const double* probabilities, size_t count, double* selectivity);
/* Rephasing time of a spin-wave written at creation_time (trial frame). */
DLCZ_API dlcz_status dlcz_rephasing_time(const dlcz_config* config, double creation_time, double* time);

#ifdef __cplusplus
}
#endif

#endif
