#ifndef EYECONTACT_H
#define EYECONTACT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EC_API __declspec(dllexport)
#else
#define EC_API __attribute__((visibility("default")))
#endif

typedef enum ec_status {
  EC_OK = 0,
  EC_INVALID_ARGUMENT = 1,
  EC_IO = 2,
  EC_PARSE = 3,
  EC_SCHEMA = 4,
  EC_DIMENSION = 5,
  EC_NUMERIC = 6,
  EC_DEGENERATE = 7,
  EC_NO_INTERSECTION = 8,
  EC_NO_DEVICE_CLUSTER = 9,
  EC_SINGLE_CLASS = 10,
  EC_NOT_CONVERGED = 11,
  EC_UNSUPPORTED_VERSION = 12,
  EC_INTERNAL = 13
} ec_status;

typedef enum ec_label_source { EC_LABELS_CLUSTER = 0, EC_LABELS_GROUND_TRUTH = 1 } ec_label_source;

typedef struct ec_config ec_config;
typedef struct ec_dataset ec_dataset;
typedef struct ec_model ec_model;
typedef struct ec_predictions ec_predictions;

/* Message of the last failed call on this thread; never NULL. */
EC_API const char* ec_last_error(void);
EC_API const char* ec_status_name(ec_status status);
/* Releases strings returned through char** out-parameters. */
EC_API void ec_string_free(char* s);

EC_API ec_status ec_config_new(ec_config** out);
EC_API ec_status ec_config_load(const char* path, ec_config** out);
/* Applies a JSON object of overrides; the config is unchanged on failure. */
EC_API ec_status ec_config_merge_json(ec_config* config, const char* json);
EC_API ec_status ec_config_to_json(const ec_config* config, char** out);
EC_API void ec_config_free(ec_config* config);

EC_API ec_status ec_dataset_read(const char* path, ec_dataset** out);
EC_API ec_status ec_dataset_parse(const char* jsonl, ec_dataset** out);
EC_API ec_status ec_dataset_write(const ec_dataset* dataset, const char* path);
EC_API ec_status ec_dataset_to_jsonl(const ec_dataset* dataset, char** out);
EC_API size_t ec_dataset_size(const ec_dataset* dataset);
EC_API void ec_dataset_free(ec_dataset* dataset);

/* Head pose and normalization for every frame. Per-frame failures do not fail
   the call: their count goes to *failures and their details, as a JSON array,
   to *failure_json (either pointer may be NULL). */
EC_API ec_status ec_pose(const ec_dataset* dataset, const ec_config* config, int workers,
                         ec_dataset** out, size_t* failures, char** failure_json);

EC_API ec_status ec_train(const ec_dataset* dataset, const ec_config* config,
                          ec_label_source source, ec_model** out, char** summary_json);
EC_API ec_status ec_model_load(const char* path, ec_model** out);
EC_API ec_status ec_model_save(const ec_model* model, const char* path);
EC_API ec_status ec_model_to_json(const ec_model* model, char** out);
EC_API void ec_model_free(ec_model* model);

EC_API ec_status ec_predict(const ec_dataset* dataset, const ec_model* model,
                            ec_predictions** out);
EC_API ec_status ec_predictions_read(const char* path, ec_predictions** out);
EC_API ec_status ec_predictions_write(const ec_predictions* predictions, const char* path);
EC_API ec_status ec_predictions_to_jsonl(const ec_predictions* predictions, char** out);
EC_API size_t ec_predictions_size(const ec_predictions* predictions);
EC_API void ec_predictions_free(ec_predictions* predictions);

/* Evaluation reports are JSON objects. */
EC_API ec_status ec_eval_holdout(const ec_dataset* test, const ec_predictions* predictions,
                                 char** report_json);
EC_API ec_status ec_eval_loocv(const ec_dataset* dataset, const ec_config* config,
                               ec_label_source source, int workers, char** report_json);
EC_API ec_status ec_eval_cross(const ec_dataset* train, const ec_dataset* test,
                               const ec_config* config, ec_label_source source,
                               char** report_json);

/* Attention timelines and spans per session segment plus an aggregate. */
EC_API ec_status ec_metrics(const ec_predictions* predictions, const ec_config* config,
                            char** report_json);

/* Generates a synthetic dataset from a JSON generator config ("{}" for the
   defaults). The hidden truth table is returned as JSONL when truth_jsonl is
   not NULL. A negative seed_override keeps the config seed. */
EC_API ec_status ec_synth(const char* synth_config_json, int64_t seed_override,
                          ec_dataset** out, char** truth_jsonl);

/* Warps a PNG into the normalized face image of a posed frame. */
EC_API ec_status ec_warp_png(const ec_dataset* dataset, size_t index, const ec_config* config,
                             const char* input_png, const char* output_png);

#ifdef __cplusplus
}
#endif

#endif
