/* C interface to the rrauq library. All handles are opaque; strings
 * returned through char** are owned by the caller and released with
 * rrauq_string_free. */
#ifndef RRAUQ_H
#define RRAUQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(RRAUQ_BUILDING)
#define RRAUQ_API __attribute__((visibility("default")))
#else
#define RRAUQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rrauq_status {
  RRAUQ_OK = 0,
  RRAUQ_ERR_INTERNAL = 1,
  RRAUQ_ERR_CONFIG = 2,
  RRAUQ_ERR_DIVERGED = 3,
  RRAUQ_ERR_IO = 4,
  RRAUQ_ERR_FORMAT = 5,
  RRAUQ_ERR_DIMENSION = 6,
  RRAUQ_ERR_PARAMETER = 7,
  RRAUQ_ERR_CONTRACT = 8,
  RRAUQ_ERR_UNSUPPORTED = 9,
  RRAUQ_ERR_NULL_ARGUMENT = 10
} rrauq_status;

typedef enum rrauq_format { RRAUQ_FORMAT_JSON = 0, RRAUQ_FORMAT_CSV = 1 } rrauq_format;

typedef struct rrauq_config rrauq_config;
typedef struct rrauq_report rrauq_report;
typedef struct rrauq_models rrauq_models;
typedef struct rrauq_predictions rrauq_predictions;

RRAUQ_API const char* rrauq_version(void);
/* Message of the last failing call on this thread ("" if none). */
RRAUQ_API const char* rrauq_last_error(void);
RRAUQ_API const char* rrauq_status_name(rrauq_status status);
RRAUQ_API void rrauq_string_free(char* s);

/* Configuration */
RRAUQ_API rrauq_status rrauq_config_parse(const char* json, rrauq_config** out);
RRAUQ_API rrauq_status rrauq_config_load(const char* path, rrauq_config** out);
RRAUQ_API rrauq_status rrauq_config_set_seed(rrauq_config* config, uint64_t seed);
RRAUQ_API rrauq_status rrauq_config_to_json(const rrauq_config* config, char** out);
RRAUQ_API void rrauq_config_free(rrauq_config* config);

/* Full experiment. A diverged run still yields a report (status
 * "diverged") and returns RRAUQ_ERR_DIVERGED. */
RRAUQ_API rrauq_status rrauq_run_experiment(const rrauq_config* config, size_t threads,
                                            rrauq_report** out);
/* Report body without wall-clock fields when include_timing is 0. */
RRAUQ_API rrauq_status rrauq_report_to_json(const rrauq_report* report, int include_timing,
                                            char** out);
RRAUQ_API rrauq_status rrauq_report_to_csv(const rrauq_report* report, char** out);
RRAUQ_API rrauq_status rrauq_report_write(const rrauq_report* report, rrauq_format format,
                                          const char* path);
/* Keys: accuracy, ece, mean_entropy, parameter_count,
 * total_parameter_count, size_multiplier, mean_jsd, max_jsd, mean_dis,
 * max_dis, train_seconds, inference_seconds. */
RRAUQ_API rrauq_status rrauq_report_get(const rrauq_report* report, const char* key,
                                        double* out);
RRAUQ_API int rrauq_report_diverged(const rrauq_report* report);
RRAUQ_API void rrauq_report_free(rrauq_report* report);

/* Training and checkpoints */
RRAUQ_API rrauq_status rrauq_train(const rrauq_config* config, size_t threads,
                                   rrauq_models** out);
RRAUQ_API size_t rrauq_models_count(const rrauq_models* models);
RRAUQ_API size_t rrauq_models_parameter_count(const rrauq_models* models);
/* {"loss_curves": [[...], ...], "parameter_count": n, "members": m} */
RRAUQ_API rrauq_status rrauq_models_summary_json(const rrauq_models* models, char** out);
/* Writes member_<m>.ckpt files into an existing directory. */
RRAUQ_API rrauq_status rrauq_models_save(const rrauq_models* models, const char* dir);
/* Rebuilds the config's networks and loads member_<m>.ckpt from dir. */
RRAUQ_API rrauq_status rrauq_models_load(const rrauq_config* config, const char* dir,
                                         rrauq_models** out);
RRAUQ_API void rrauq_models_free(rrauq_models* models);

/* Predictions on the config's test split. corruption may be NULL (clean);
 * otherwise a corruption name with severity 1..5. */
RRAUQ_API rrauq_status rrauq_predict(const rrauq_config* config, const rrauq_models* models,
                                     const char* corruption, int severity, size_t threads,
                                     rrauq_predictions** out);
RRAUQ_API rrauq_status rrauq_predictions_shape(const rrauq_predictions* ps, size_t* passes,
                                               size_t* samples, size_t* classes);
/* Probability of (pass, sample, class). */
RRAUQ_API rrauq_status rrauq_predictions_get(const rrauq_predictions* ps, size_t pass,
                                             size_t sample, size_t cls, double* out);
RRAUQ_API int rrauq_predictions_has_labels(const rrauq_predictions* ps);
RRAUQ_API rrauq_status rrauq_predictions_set_labels(rrauq_predictions* ps, const int* labels,
                                                    size_t count);
/* Binary or CSV (format) files; labels go to a separate "sample,label"
 * CSV when labels_path is non-NULL. */
RRAUQ_API rrauq_status rrauq_predictions_save(const rrauq_predictions* ps, rrauq_format format,
                                              const char* path, const char* labels_path);
/* Format detected from the file content. */
RRAUQ_API rrauq_status rrauq_predictions_load(const char* path, const char* labels_path,
                                              rrauq_predictions** out);
RRAUQ_API void rrauq_predictions_free(rrauq_predictions* ps);

/* Accuracy, ECE, reliability bins, entropy and diversity over the first
 * diversity_members passes (0 skips diversity). Requires labels. */
RRAUQ_API rrauq_status rrauq_metrics_json(const rrauq_predictions* ps, size_t bins,
                                          size_t diversity_members, char** out);
RRAUQ_API rrauq_status rrauq_metrics_csv(const rrauq_predictions* ps, size_t bins, char** out);

/* Variance law check; options_json may be NULL or "{}" for defaults. */
RRAUQ_API rrauq_status rrauq_variance_check(const char* options_json, uint64_t seed,
                                            size_t threads, char** json_out, char** csv_out);

/* Harness tables. Outputs may be NULL if not wanted. */
RRAUQ_API rrauq_status rrauq_run_suite(const rrauq_config* const* configs, size_t count,
                                       size_t threads, char** json_out, char** csv_out);
/* positions: comma separated subset of all,first,last. */
RRAUQ_API rrauq_status rrauq_position_analysis(const rrauq_config* base, const char* positions,
                                               size_t threads, char** json_out, char** csv_out);
RRAUQ_API rrauq_status rrauq_q_sweep(const rrauq_config* base, const double* qs, size_t count,
                                     size_t threads, char** json_out, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif
