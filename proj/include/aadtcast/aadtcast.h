/* C interface to the aadtcast forecasting library. */
#ifndef AADTCAST_H
#define AADTCAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AADTCAST_BUILDING)
#    define AADT_API __declspec(dllexport)
#  else
#    define AADT_API __declspec(dllimport)
#  endif
#else
#  define AADT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; every function below returns one. */
#define AADT_OK 0
#define AADT_ERR_USAGE 1
#define AADT_ERR_DATA 2
#define AADT_ERR_NUMERIC 3

typedef struct aadt_series aadt_series;
typedef struct aadt_config aadt_config;
typedef struct aadt_model aadt_model;
typedef struct aadt_report aadt_report;

typedef struct {
  size_t length;
  size_t missing;
  double missing_pct;
  int64_t start_hours; /* hours since 1970-01-01T00 */
  char start[24];      /* ISO hour of the first value */
  char end[24];        /* ISO hour one past the last value */
  char station[64];
} aadt_series_summary;

typedef struct {
  char station[64];
  char cell[16];
  char treatment[16];
  int64_t horizon_hours;
  int year;
  double predicted_aadt; /* NaN when the variant failed */
  double actual_aadt;
  double accuracy_pct;
  double mape_pct;
  double missing_pct;
  uint64_t seed;
  int ok;
  char error[256];
} aadt_report_row;

typedef struct {
  int64_t horizon_hours;
  int year;
  char cell[16];
  char treatment[16];
  double accuracy_pct;
} aadt_best_variant;

typedef struct {
  char cell[16];
  int cases;
  double max_relative_error;
  int passed;
} aadt_gradcheck_result;

/* Message and kebab-case code name of the last failure on this thread. */
AADT_API const char* aadt_last_error(void);
AADT_API const char* aadt_last_error_code(void);
AADT_API const char* aadt_version(void);

/* Series. Missing values are NaN on the way in and out. */
AADT_API int aadt_series_create(int64_t start_hours, const double* values, size_t count, const char* station,
                                aadt_series** out);
AADT_API int aadt_series_load_csv(const char* path, aadt_series** out);
AADT_API int aadt_series_save_csv(const aadt_series* series, const char* path);
AADT_API int aadt_series_summary_get(const aadt_series* series, aadt_series_summary* out);
AADT_API int aadt_series_values(const aadt_series* series, double* out, size_t capacity);
AADT_API void aadt_series_free(aadt_series* series);

/* Generates a gappy series and its complete counterpart from a key/value spec file. */
AADT_API int aadt_synth_from_file(const char* spec_path, aadt_series** gappy, aadt_series** truth);

/* Fills every gap of `series` with one treatment in log space. `config` may be NULL. */
AADT_API int aadt_impute(const aadt_series* series, const char* method, const aadt_config* config,
                         aadt_series** out, size_t* filled);
/* Root mean squared error of `filled` against `truth` over hours missing in `gappy`. */
AADT_API int aadt_imputation_rmse(const aadt_series* filled, const aadt_series* truth, const aadt_series* gappy,
                                  double* out);

/* Forecast configuration. */
AADT_API int aadt_config_new(aadt_config** out);
AADT_API int aadt_config_load(const char* path, aadt_config** out);
AADT_API int aadt_config_set(aadt_config* config, const char* key, const char* value);
/* `key = value` lines; valid until the next call on this handle. */
AADT_API const char* aadt_config_describe(aadt_config* config);
AADT_API void aadt_config_free(aadt_config* config);

/* Models. */
AADT_API int aadt_train(const aadt_series* series, const aadt_config* config, aadt_model** out);
AADT_API int aadt_model_save(const aadt_model* model, const char* path);
AADT_API int aadt_model_load(const char* path, aadt_model** out);
AADT_API int aadt_model_loss_trace(const aadt_model* model, double* out, size_t capacity, size_t* count);
AADT_API int aadt_predict(const aadt_model* model, const aadt_series* series, aadt_series** out);
AADT_API int aadt_prediction_save_csv(const aadt_series* predicted, const char* path);
AADT_API void aadt_model_free(aadt_model* model);

/* Evaluation. `truth` may be NULL. */
AADT_API int aadt_evaluate(const aadt_model* model, const aadt_series* series, const aadt_series* truth,
                           aadt_report** out);
AADT_API int aadt_grid(const aadt_series* series, const aadt_config* config, const int64_t* horizons,
                       size_t horizon_count, unsigned jobs, const aadt_series* truth, aadt_report** out);
AADT_API int aadt_multi_horizon(const aadt_series* series, const aadt_config* config, const int64_t* horizons,
                                size_t horizon_count, const aadt_series* truth, aadt_report** out);
AADT_API size_t aadt_report_row_count(const aadt_report* report);
AADT_API int aadt_report_row_get(const aadt_report* report, size_t index, aadt_report_row* out);
AADT_API size_t aadt_report_best_count(const aadt_report* report);
AADT_API int aadt_report_best_get(const aadt_report* report, size_t index, aadt_best_variant* out);
AADT_API size_t aadt_report_skip_count(const aadt_report* report);
/* Reason text for one skipped horizon; NULL when out of range. */
AADT_API const char* aadt_report_skip_reason(const aadt_report* report, size_t index, int64_t* horizon_hours);
AADT_API int aadt_report_save_csv(const aadt_report* report, const char* path);
AADT_API int aadt_report_save_json(const aadt_report* report, const char* path);
/* Writes the actual trend for index -1, otherwise one variant's predicted trend. */
AADT_API int aadt_report_save_trend(const aadt_report* report, long index, const char* path);
/* Human-readable two-decimal table; valid until the next call on this handle. */
AADT_API const char* aadt_report_table(aadt_report* report);
AADT_API void aadt_report_free(aadt_report* report);

/* Finite-difference check of the analytic gradients for one cell kind. */
AADT_API int aadt_gradcheck(const char* cell, int seeds, aadt_gradcheck_result* out);

#ifdef __cplusplus
}
#endif

#endif /* AADTCAST_H */
