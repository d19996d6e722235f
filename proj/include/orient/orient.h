// SPDX-License-Identifier: Apache-2.0
#ifndef ORIENT_ORIENT_H
#define ORIENT_ORIENT_H

#include <stddef.h>
#include <stdint.h>

#if defined(ORIENT_BUILDING_LIBRARY)
#define ORIENT_API __attribute__((visibility("default")))
#else
#define ORIENT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure the message is kept per thread and
 * can be read with orient_last_error() until the next failing call. */
typedef enum orient_status {
  ORIENT_OK = 0,
  ORIENT_ERR_INVALID_ARGUMENT = 1,
  ORIENT_ERR_DEGENERATE_INPUT = 2,
  ORIENT_ERR_INVALID_K = 3,
  ORIENT_ERR_EMPTY_IMAGE = 4,
  ORIENT_ERR_IO = 5,
  ORIENT_ERR_FORMAT = 6,
  ORIENT_ERR_VERSION = 7,
  ORIENT_ERR_DIMENSION = 8,
  ORIENT_ERR_SHAPE_MISMATCH = 9,
  ORIENT_ERR_CONFIG_MISMATCH = 10,
  ORIENT_ERR_INSUFFICIENT_REFERENCES = 11,
  ORIENT_ERR_NON_FINITE_LOSS = 12,
  ORIENT_ERR_EMPTY_EVAL = 13,
  ORIENT_ERR_INTERNAL = 14
} orient_status;

ORIENT_API const char* orient_version(void);
ORIENT_API const char* orient_status_name(orient_status status);
ORIENT_API const char* orient_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
ORIENT_API void orient_string_free(char* s);

typedef struct orient_pyramid orient_pyramid;
typedef struct orient_db orient_db;
typedef struct orient_params orient_params;

/* ---- Feature pyramids ---- */

typedef struct orient_extract_config {
  const char* scales;     /* "13x13,26x26,52x52"; NULL for the default */
  uint32_t channels;      /* orientation bins; 0 for the default (8) */
  uint32_t norm_window;   /* local normalization window; 0 disables it */
  double sigma_floor;     /* <= 0 for the default */
} orient_extract_config;

ORIENT_API void orient_extract_config_default(orient_extract_config* cfg);

/* Reads a binary PGM/PPM image, resizes it to 128x128 gray, normalizes and
 * extracts. */
ORIENT_API orient_status orient_pyramid_from_image(const char* path, const orient_extract_config* cfg,
                                                   orient_pyramid** out);
ORIENT_API orient_status orient_pyramid_load(const char* path, orient_pyramid** out);
ORIENT_API orient_status orient_pyramid_save(const orient_pyramid* pyramid, const char* path);
ORIENT_API size_t orient_pyramid_num_scales(const orient_pyramid* pyramid);
ORIENT_API uint32_t orient_pyramid_channels(const orient_pyramid* pyramid);
ORIENT_API void orient_pyramid_free(orient_pyramid* pyramid);

/* ---- Reference databases ---- */

typedef struct orient_object_source {
  const char* label;
  const char* rotations_path;   /* CSV manifest: index,r00,...,r22 */
  const char* const* files;     /* one image or pyramid per manifest row, in row order */
  size_t num_files;
} orient_object_source;

/* inputs_are_images != 0: files are PGM/PPM images extracted with cfg;
 * otherwise they are pyramid files and cfg is ignored. */
ORIENT_API orient_status orient_db_build(const orient_object_source* objects, size_t num_objects,
                                         int inputs_are_images, const orient_extract_config* cfg, size_t k_ac,
                                         orient_db** out);
ORIENT_API orient_status orient_db_load(const char* path, orient_db** out);
ORIENT_API orient_status orient_db_save(const orient_db* db, const char* path);
ORIENT_API size_t orient_db_num_objects(const orient_db* db);
/* label is copied into label_buf (truncated, always terminated). */
ORIENT_API orient_status orient_db_object_info(const orient_db* db, size_t object, char* label_buf, size_t buf_size,
                                               size_t* refs, size_t* k_ac);
/* Geometry summary such as "4x4,8x8,16x16/c8". */
ORIENT_API orient_status orient_db_fingerprint(const orient_db* db, char** out);
/* Scale dims as "13x13,26x26,52x52" plus the channel count; queries must match. */
ORIENT_API orient_status orient_db_geometry(const orient_db* db, char** scales, uint32_t* channels);
ORIENT_API void orient_db_free(orient_db* db);

/* ---- Fusion parameters ---- */

ORIENT_API orient_status orient_params_load(const char* path, orient_params** out);
ORIENT_API orient_status orient_params_save(const orient_params* params, const char* path);
/* Initialization under which every learned variant scores like "average". */
ORIENT_API orient_status orient_params_init(size_t scales, uint32_t channels, size_t hidden, uint64_t seed,
                                            orient_params** out);
ORIENT_API size_t orient_params_size(const orient_params* params);
ORIENT_API void orient_params_free(orient_params* params);

/* ---- Retrieval ---- */

typedef struct orient_retrieve_config {
  const char* method;    /* "greedy" or "fast" */
  const char* variant;   /* "adaptive", "average", "sigmoid", "softmax" */
  size_t k_local;        /* fast retrieval candidates per iteration */
  size_t max_iters;      /* 0: ceil(log2 R) */
} orient_retrieve_config;

ORIENT_API void orient_retrieve_config_default(orient_retrieve_config* cfg);

typedef struct orient_result {
  char category[128];
  size_t object;
  size_t ref_index;
  double rotation[9]; /* row-major */
  double score;
  size_t comparisons;
  size_t iterations;
  double elapsed_s;
} orient_result;

/* params may be NULL for the "average" variant. */
ORIENT_API orient_status orient_retrieve(const orient_db* db, const orient_pyramid* query,
                                         const orient_params* params, const orient_retrieve_config* cfg,
                                         orient_result* out);

/* ---- Synthetic tasks, training and evaluation ---- */

typedef struct orient_task_config {
  uint64_t seed;
  size_t objects;
  size_t refs;
  size_t queries;
  double noise;     /* [0, 1] */
  double outliers;  /* fraction of query cells replaced by clutter, [0, 1) */
  size_t k_ac;      /* 0: refs / 8 */
} orient_task_config;

ORIENT_API void orient_task_config_default(orient_task_config* cfg);

/* Writes task.json, db.ordb, queries.csv and queries/<id>.fpyr under out_dir. */
ORIENT_API orient_status orient_task_generate(const orient_task_config* cfg, const char* out_dir);

typedef struct orient_train_config {
  const char* variant;  /* learned variant to fit */
  size_t epochs;
  double learning_rate;
  uint64_t seed;
  int weighted;         /* 0: plain infoNCE */
  size_t hidden;
} orient_train_config;

ORIENT_API void orient_train_config_default(orient_train_config* cfg);

/* Fits fusion parameters on the training set of the task in task_dir. The
 * per-epoch losses are written to loss_csv_path when it is non-NULL. */
ORIENT_API orient_status orient_train_fusion(const char* task_dir, const orient_train_config* cfg,
                                             const char* loss_csv_path, orient_params** out,
                                             double* initial_loss, double* final_loss);

/* Evaluates every query of a manifest (id,category,file,r00..r22; files
 * relative to the manifest). Writes a summary JSON string to *summary_json and,
 * when records_csv_path is non-NULL, the per-query records. */
ORIENT_API orient_status orient_eval(const orient_db* db, const char* queries_csv, const orient_params* params,
                                     const orient_retrieve_config* cfg, double threshold_deg,
                                     const char* records_csv_path, char** summary_json);

/* sweep: "refs", "variant" or "method". Returns the table as JSON and writes
 * <sweep>.json and <sweep>.csv into out_dir when it is non-NULL. */
ORIENT_API orient_status orient_bench(const char* task_dir, const char* sweep, const orient_train_config* train,
                                      const char* out_dir, char** table_json);

ORIENT_API orient_status orient_gradcheck(uint64_t seed, size_t instances, double* fusion_max_rel_err,
                                          double* loss_max_rel_err);

#ifdef __cplusplus
}
#endif

#endif
