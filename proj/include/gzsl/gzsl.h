#ifndef GZSL_GZSL_H
#define GZSL_GZSL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GZSL_API __declspec(dllexport)
#else
#define GZSL_API __attribute__((visibility("default")))
#endif

typedef enum gzsl_status {
  GZSL_OK = 0,
  GZSL_ERR_SHAPE = 1,
  GZSL_ERR_IO = 2,
  GZSL_ERR_FORMAT = 3,
  GZSL_ERR_VALIDATION = 4,
  GZSL_ERR_TRAINING_DIVERGED = 5,
  GZSL_ERR_UNSUPPORTED = 6,
  GZSL_ERR_USAGE = 7,
  GZSL_ERR_DOMAIN = 8,
  GZSL_ERR_GENERATION = 9,
  GZSL_ERR_DEGENERATE_TRAINING = 10,
  GZSL_ERR_INVALID_ARGUMENT = 11,
  GZSL_ERR_INTERNAL = 12
} gzsl_status;

typedef struct gzsl_dataset gzsl_dataset;
typedef struct gzsl_pipeline gzsl_pipeline;
typedef struct gzsl_model gzsl_model;

GZSL_API const char* gzsl_version(void);

/* Message for the last failed call on this thread; "" if none. */
GZSL_API const char* gzsl_last_error(void);
GZSL_API const char* gzsl_status_name(gzsl_status status);

/* Datasets */

GZSL_API gzsl_status gzsl_dataset_load(const char* dir, gzsl_dataset** out);
/* spec_json may be NULL or "{}" for the defaults; keys: seen_classes,
   unseen_classes, feature_dim, attribute_dim, samples_per_class,
   test_seen_fraction, noise, seed. */
GZSL_API gzsl_status gzsl_dataset_make_synthetic(const char* spec_json, gzsl_dataset** out);
GZSL_API gzsl_status gzsl_dataset_write(const gzsl_dataset* dataset, const char* dir);
/* counts: seen classes, unseen classes, train, test_seen, test_unseen. */
GZSL_API gzsl_status gzsl_dataset_summarize(const gzsl_dataset* dataset, size_t counts[5]);
/* dims: X, A, C, N. */
GZSL_API gzsl_status gzsl_dataset_dims(const gzsl_dataset* dataset, size_t dims[4]);
GZSL_API void gzsl_dataset_free(gzsl_dataset* dataset);

/* Pipeline */

/* config_json uses the CLI config schema and must set "out". */
GZSL_API gzsl_status gzsl_pipeline_create(const char* config_json, gzsl_pipeline** out);
GZSL_API gzsl_status gzsl_pipeline_run(gzsl_pipeline* pipeline, const char* command);
/* JSON summary of the last successful run; owned by the handle. */
GZSL_API const char* gzsl_pipeline_result(const gzsl_pipeline* pipeline);
/* Effective config, including derived stage seeds; owned by the handle. */
GZSL_API const char* gzsl_pipeline_config(const gzsl_pipeline* pipeline);
GZSL_API void gzsl_pipeline_free(gzsl_pipeline* pipeline);

/* Trained model: a run directory with model/ and classifiers/. */

GZSL_API gzsl_status gzsl_model_load(const char* run_dir, gzsl_model** out);
GZSL_API gzsl_status gzsl_model_dims(const gzsl_model* model, size_t* feature_dim,
                                     size_t* num_classes);
/* Ensemble class posteriors for one feature vector. */
GZSL_API gzsl_status gzsl_model_predict(const gzsl_model* model, const float* feature,
                                        size_t feature_dim, double lambda_x, double lambda_a,
                                        double* probs, size_t num_classes);
GZSL_API void gzsl_model_free(gzsl_model* model);

/* Metrics */

GZSL_API double gzsl_harmonic_mean(double seen, double unseen);
/* Mean per-class top-1 over the classes in `classes` that occur in `labels`. */
GZSL_API gzsl_status gzsl_per_class_top1(const uint32_t* predictions, const uint32_t* labels,
                                         size_t n, const uint32_t* classes, size_t num_classes,
                                         double* out);
/* scores is n x num_classes row-major. */
GZSL_API gzsl_status gzsl_ausuc(const double* scores, const uint32_t* labels, size_t n,
                                size_t num_classes, const uint32_t* seen, size_t num_seen,
                                const uint32_t* unseen, size_t num_unseen, size_t n_bias,
                                double* area);

#ifdef __cplusplus
}
#endif

#endif
