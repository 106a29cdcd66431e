#ifndef CMOM_H
#define CMOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call. Values 1 to 6 match the `cmom` binary's exit codes.
typedef enum CmomStatus {
  CMOM_STATUS_OK = 0,
  CMOM_STATUS_FAILED = 1,
  CMOM_STATUS_CONFIG = 2,
  CMOM_STATUS_SCHEMA = 3,
  CMOM_STATUS_MISSING_FACTORS = 4,
  CMOM_STATUS_DEGENERATE_BREAKPOINTS = 5,
  CMOM_STATUS_IO = 6,
  CMOM_STATUS_NULL_POINTER = 7,
  CMOM_STATUS_INVALID_ARGUMENT = 8,
  CMOM_STATUS_PANIC = 9,
} CmomStatus;

typedef enum CmomFrequency {
  CMOM_FREQUENCY_MONTHLY = 0,
  CMOM_FREQUENCY_DAILY = 1,
} CmomFrequency;

// A monthly return panel loaded from a returns CSV.
typedef struct CmomPanel CmomPanel;

// A study configuration.
typedef struct CmomStudy CmomStudy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Engine version as a static NUL-terminated string.
const char *cmom_version(void);

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call on this thread.
const char *cmom_last_error(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void cmom_string_free(char *s);

// Least squares of `y` (length `n_obs`) on the row-major `n_obs x n_cols`
// design `x`; include a column of ones for an intercept. `nw_lags < 0`
// gives plain OLS standard errors, `nw_lags >= 0` Newey-West with that
// many lags. Writes `n_cols` coefficients and standard errors; `out_r2`
// may be null.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CmomStatus cmom_ols(const double *y,
                         const double *x,
                         size_t n_obs,
                         size_t n_cols,
                         int64_t nw_lags,
                         double *out_coef,
                         double *out_se,
                         double *out_r2);

// Compounded return over periods `t-j ..= t-k` of a series whose element
// `i` is period `i`. Fails with `InvalidArgument` when the window is
// malformed or falls outside the series.
//
// # Safety
// `returns` must be valid for `n` values.
enum CmomStatus cmom_window_return(const double *returns,
                                   size_t n,
                                   int32_t t,
                                   uint32_t j,
                                   uint32_t k,
                                   double *out);

// Writes the `n_buckets - 1` quantile thresholds of `values`.
//
// # Safety
// `values` must hold `n` values and `out` room for `n_buckets - 1`.
enum CmomStatus cmom_breakpoints(const double *values, size_t n, size_t n_buckets, double *out);

// 1-based bucket of `value` given ascending thresholds; ties go to the
// lower bucket.
//
// # Safety
// `thresholds` must hold `n_thresholds` values.
enum CmomStatus cmom_assign_bucket(const double *thresholds,
                                   size_t n_thresholds,
                                   double value,
                                   size_t *out_bucket);

// Annualized Sharpe ratio `mean / sd * sqrt(periods per year)` of a
// return series, with the sample SD.
//
// # Safety
// `values` must hold `n` values.
enum CmomStatus cmom_sharpe(const double *values,
                            size_t n,
                            enum CmomFrequency frequency,
                            double *out);

// Loads a monthly `returns.csv`. Rejected rows are skipped.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer.
enum CmomStatus cmom_panel_open(const char *path, struct CmomPanel **out);

// Number of firms and firm-month observations in a panel. Either out
// pointer may be null.
//
// # Safety
// `panel` must come from [`cmom_panel_open`].
enum CmomStatus cmom_panel_shape(const struct CmomPanel *panel, size_t *out_firms, size_t *out_obs);

// Compounded return of one firm over months `from ..= to`, written as
// `YYYY-MM`.
//
// # Safety
// `panel` must come from [`cmom_panel_open`]; strings NUL-terminated.
enum CmomStatus cmom_panel_compound(const struct CmomPanel *panel,
                                    const char *firm,
                                    const char *from,
                                    const char *to,
                                    double *out);

// # Safety
// `panel` must come from [`cmom_panel_open`] and not be used afterwards.
void cmom_panel_free(struct CmomPanel *panel);

// Creates a study configuration from TOML text, or defaults when `toml`
// is null.
//
// # Safety
// `toml` must be null or NUL-terminated; `out` a valid pointer.
enum CmomStatus cmom_study_new(const char *toml, struct CmomStudy **out);

// Sets the data and output directories; either may be null to keep the
// current value.
//
// # Safety
// `study` must come from [`cmom_study_new`]; strings NUL-terminated.
enum CmomStatus cmom_study_set_dirs(struct CmomStudy *study,
                                    const char *data_dir,
                                    const char *out_dir);

// Runs one command (`synth`, `sort`, ..., `all`). When `out_json` is not
// null it receives a JSON array of the reports produced.
//
// # Safety
// `study` must come from [`cmom_study_new`]; `command` NUL-terminated.
enum CmomStatus cmom_study_run(const struct CmomStudy *study, const char *command, char **out_json);

// # Safety
// `study` must come from [`cmom_study_new`] and not be used afterwards.
void cmom_study_free(struct CmomStudy *study);

// Writes a synthetic market into `dir`. `toml` holds generator settings
// (the keys of a study file's `[synth]` table) or is null for defaults.
//
// # Safety
// `dir` must be NUL-terminated; `toml` null or NUL-terminated.
enum CmomStatus cmom_synth_write(const char *toml, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMOM_H */
