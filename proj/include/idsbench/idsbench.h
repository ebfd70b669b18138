#ifndef IDSBENCH_H
#define IDSBENCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define IDS_API __attribute__((visibility("default")))
#else
#define IDS_API
#endif

/* Status values 2..5 double as the CLI exit codes. */
typedef enum ids_status {
    IDS_OK = 0,
    IDS_ERR_INTERNAL = 1,
    IDS_ERR_CONFIG = 2,
    IDS_ERR_DATA = 3,
    IDS_ERR_TRAINING = 4,
    IDS_ERR_EXPECTATION = 5,
    IDS_ERR_IO = 6,
    IDS_ERR_INVALID_ARGUMENT = 7
} ids_status;

typedef struct ids_dataset ids_dataset;
typedef struct ids_model ids_model;

IDS_API const char* ids_version(void);

/* Message of the last failed call on this thread; "" after a success. */
IDS_API const char* ids_last_error(void);

/* Every char** output is heap allocated and released with ids_string_free. */
IDS_API void ids_string_free(char* s);

IDS_API ids_status ids_builtin_schema(const char* scenario, char** schema_json);

/* schema_path may be NULL to use the built-in schema of `scenario`. */
IDS_API ids_status ids_dataset_load(const char* data_path, const char* scenario, const char* schema_path,
                                    ids_dataset** out);
IDS_API void ids_dataset_free(ids_dataset* ds);
IDS_API ids_status ids_dataset_rows(const ids_dataset* ds, size_t* rows);
IDS_API ids_status ids_dataset_summary(const ids_dataset* ds, char** summary_json);

/* Prints nothing; fills a human-readable report. With expect_counts set, a
   count mismatch sets *counts_ok to 0 and the call still returns IDS_OK. */
IDS_API ids_status ids_inspect_data(const char* data_path, const char* scenario, const char* schema_path,
                                    int expect_counts, char** report_text, int* counts_ok);

/* Either argument may be NULL. Returns the merged, validated config. */
IDS_API ids_status ids_resolve_config(const char* file_json, const char* flags_json, char** config_json);

/* Runs the whole pipeline and writes the artifacts to the config's out
   directory. results_json receives results.json (an empty table on dry runs). */
IDS_API ids_status ids_run_scenario(const char* config_json, size_t workers, char** results_json);

IDS_API ids_status ids_format_table(const char* results_json, char** table_text);

IDS_API ids_status ids_plot(const char* in_dir);

/* Accepts a single model document or a super learner document. */
IDS_API ids_status ids_model_load(const char* model_json, ids_model** out);
IDS_API void ids_model_free(ids_model* model);
IDS_API ids_status ids_model_width(const ids_model* model, size_t* width);
/* x is row-major rows x cols; out receives `rows` probabilities. */
IDS_API ids_status ids_model_predict(const ids_model* model, const double* x, size_t rows, size_t cols, double* out);
IDS_API ids_status ids_model_to_json(const ids_model* model, char** model_json);

IDS_API ids_status ids_evaluate(const double* scores, const uint8_t* labels, size_t n, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
