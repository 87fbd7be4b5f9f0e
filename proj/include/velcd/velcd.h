#ifndef VELCD_H
#define VELCD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VELCD_API __declspec(dllexport)
#else
#define VELCD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum velcd_status {
  VELCD_OK = 0,
  VELCD_ERR_INVALID_ARGUMENT = 1,
  VELCD_ERR_DEGENERATE_VARIANCE = 2,
  VELCD_ERR_EMPTY_RESULT = 3,
  VELCD_ERR_PARSE = 4,
  VELCD_ERR_MISSING_META = 5,
  VELCD_ERR_IO = 6,
  VELCD_ERR_ALL_POINTS_IDENTICAL = 7,
  VELCD_ERR_SINGULAR_SYSTEM = 8,
  VELCD_ERR_NON_INVERTIBLE_MECHANISM = 9,
  VELCD_ERR_INDEX_OUT_OF_RANGE = 10,
  VELCD_ERR_UNSUPPORTED_ORDER = 11,
  VELCD_ERR_NON_FINITE_LOSS = 12,
  VELCD_ERR_STEP_LIMIT_EXCEEDED = 13,
  VELCD_ERR_NON_FINITE_STATE = 14,
  VELCD_ERR_QUADRATURE_FAILURE = 15,
  VELCD_ERR_INTEGRATION_FAILURE = 16,
  VELCD_ERR_EMPTY_INPUT = 17,
  VELCD_ERR_EXCESSIVE_FAILURES = 18,
  VELCD_ERR_INTERNAL = 99
} velcd_status;

typedef struct velcd_dataset velcd_dataset;
typedef struct velcd_config velcd_config;
typedef struct velcd_fit velcd_fit;

/* Message of the last failure on the calling thread ("" if none). */
VELCD_API const char* velcd_last_error(void);
VELCD_API const char* velcd_status_name(velcd_status status);
VELCD_API void velcd_string_free(char* s);

/* Datasets. truth: 1 = X->Y, -1 = Y->X, 0 = unknown. */
VELCD_API velcd_status velcd_dataset_create(const double* xs, const double* ys, size_t n,
                                            velcd_dataset** out);
VELCD_API velcd_status velcd_dataset_load_csv(const char* path, velcd_dataset** out);
VELCD_API velcd_status velcd_dataset_set_truth(velcd_dataset* ds, int truth);
VELCD_API size_t velcd_dataset_size(const velcd_dataset* ds);
VELCD_API void velcd_dataset_free(velcd_dataset* ds);

/*
 * Run configuration, set by key. Keys: estimator, family, seed, trim,
 * subsample_to ("none" clears), standardize, penalty_weight, lr, iters,
 * workers, weighted, bench_family, datasets, n, sigma_theta, sigma_y,
 * data_dir, tuebingen_dir, out, curves, grid_points, score_ns, score_seeds,
 * score_estimators.
 */
VELCD_API velcd_status velcd_config_create(velcd_config** out);
VELCD_API velcd_status velcd_config_set(velcd_config* cfg, const char* key, const char* value);
VELCD_API void velcd_config_free(velcd_config* cfg);

VELCD_API velcd_status velcd_discover(const velcd_dataset* ds, const velcd_config* cfg,
                                      velcd_fit** out);
VELCD_API double velcd_fit_loss_xy(const velcd_fit* fit);
VELCD_API double velcd_fit_loss_yx(const velcd_fit* fit);
/* 1 = X->Y, -1 = Y->X */
VELCD_API int velcd_fit_decision(const velcd_fit* fit);
VELCD_API double velcd_fit_confidence(const velcd_fit* fit);
VELCD_API int velcd_fit_low_confidence(const velcd_fit* fit);
VELCD_API velcd_status velcd_fit_to_json(const velcd_fit* fit, int include_models, char** out);
VELCD_API void velcd_fit_free(velcd_fit* fit);

/* Writes dataset CSVs and manifest.json into the configured out directory. */
VELCD_API velcd_status velcd_benchmark_generate(const velcd_config* cfg);

/*
 * Runs the configured benchmark (generated when bench_family is set,
 * otherwise data_dir or tuebingen_dir) and writes report.json and
 * results.csv into out when set. report_json may be NULL. Returns
 * VELCD_ERR_EXCESSIVE_FAILURES when more than 10% of datasets fail; the
 * report is still produced.
 */
VELCD_API velcd_status velcd_benchmark_run(const velcd_config* cfg, char** report_json);

/* Fits the dataset and writes curves.csv into the configured out directory. */
VELCD_API velcd_status velcd_curves(const velcd_dataset* ds, const velcd_config* cfg);

/* Writes scores.csv into the configured out directory. */
VELCD_API velcd_status velcd_score_eval(const velcd_config* cfg);

/* weights may be NULL (unit weights); ids are the row indices. */
VELCD_API velcd_status velcd_compute_audrc(const int* correct, const double* confidence,
                                           const double* weights, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
