#ifndef QDML_QDML_H
#define QDML_QDML_H

/*
 * C interface to the qdml quadruplet metric-learning library.
 *
 * Objects are opaque handles created by qdml_*_generate / _load / qdml_train
 * and released with the matching _free function (NULL is accepted). Every
 * fallible call returns a qdml_status; on failure qdml_last_error() holds a
 * message for the calling thread until its next failing call.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(QDML_BUILDING_LIBRARY)
#define QDML_API __attribute__((visibility("default")))
#else
#define QDML_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qdml_status {
  QDML_OK = 0,
  QDML_ERR_INVALID_ARGUMENT = 1,
  QDML_ERR_CONFIG = 2,
  QDML_ERR_DEGENERATE = 3,
  QDML_ERR_IO = 4,
  QDML_ERR_PARSE = 5,
  QDML_ERR_NON_FINITE = 6,
  QDML_ERR_INTERNAL = 99
} qdml_status;

typedef enum qdml_mining_kind {
  QDML_MINING_RANDOM = 0,
  QDML_MINING_METHOD1 = 1,
  QDML_MINING_METHOD2 = 2
} qdml_mining_kind;

typedef struct qdml_dataset qdml_dataset;
typedef struct qdml_embeddings qdml_embeddings;
typedef struct qdml_model qdml_model;

QDML_API const char *qdml_version(void);
QDML_API const char *qdml_status_name(qdml_status status);
QDML_API const char *qdml_last_error(void);

/* "random", "method1", "method2". */
QDML_API qdml_status qdml_mining_kind_parse(const char *name, qdml_mining_kind *out);
QDML_API const char *qdml_mining_kind_name(qdml_mining_kind kind);

/* ---- hyperparameters ---------------------------------------------------- */

typedef struct qdml_hyper_params {
  double m1, m2;               /* joint-loss margins, m1 > m2 > 0 */
  double t1, t2;               /* global-loss margins */
  double lambda_c1, lambda_c2; /* coarse / fine classification weights */
  double lambda_g1, lambda_g2; /* global hinge weights */
  double eta;                  /* global-loss weight */
  double alpha;                /* contrastive margin */
  double m_trip;               /* triplet margin */
} qdml_hyper_params;

QDML_API void qdml_hyper_params_default(qdml_hyper_params *out);
QDML_API qdml_status qdml_hyper_params_validate(const qdml_hyper_params *h);

/* ---- datasets ----------------------------------------------------------- */

typedef struct qdml_synthetic_spec {
  int k1;
  int fines_per_coarse;
  int samples_per_fine;
  size_t input_dim;
  double coarse_center_scale;
  double fine_center_scale;
  double noise_scale;
  size_t signal_dim; /* 0 = class centres use every input coordinate */
  uint64_t seed;
} qdml_synthetic_spec;

typedef struct qdml_dataset_info {
  size_t n_samples;
  size_t input_dim;
  int k1;
  int k2;
} qdml_dataset_info;

QDML_API void qdml_synthetic_spec_default(qdml_synthetic_spec *out);
QDML_API qdml_status qdml_dataset_generate(const qdml_synthetic_spec *spec,
                                           qdml_dataset **out);
QDML_API qdml_status qdml_dataset_load(const char *path, qdml_dataset **out);
QDML_API qdml_status qdml_dataset_save(const qdml_dataset *d, const char *path);
QDML_API qdml_status qdml_dataset_get_info(const qdml_dataset *d,
                                           qdml_dataset_info *out);
/* Fine classes 0..train_count-1 go to *train, the rest to *test. */
QDML_API qdml_status qdml_dataset_split_zero_shot(const qdml_dataset *d,
                                                  size_t train_count,
                                                  qdml_dataset **train,
                                                  qdml_dataset **test);
/* Fine classes ordered[0..train_count-1] go to *train, the rest to *test.
 * `ordered` must be a permutation of 0..k2-1. */
QDML_API qdml_status qdml_dataset_split_zero_shot_ordered(const qdml_dataset *d,
                                                          const int *ordered,
                                                          size_t n_ordered,
                                                          size_t train_count,
                                                          qdml_dataset **train,
                                                          qdml_dataset **test);
/* Writes the round-robin fine order (first child of every coarse class, then
 * the second, ...) into out[0..k2-1]. Fails unless capacity >= k2. */
QDML_API qdml_status qdml_dataset_round_robin_order(const qdml_dataset *d, int *out,
                                                    size_t capacity);
/* Raw inputs as an embedding set. */
QDML_API qdml_status qdml_dataset_as_embeddings(const qdml_dataset *d,
                                                qdml_embeddings **out);
QDML_API void qdml_dataset_free(qdml_dataset *d);

/* ---- embeddings --------------------------------------------------------- */

QDML_API qdml_status qdml_embeddings_load(const char *path, qdml_embeddings **out);
QDML_API qdml_status qdml_embeddings_save(const qdml_embeddings *e, const char *path);
QDML_API qdml_status qdml_embeddings_get_info(const qdml_embeddings *e,
                                              size_t *n_rows, size_t *dim);
QDML_API void qdml_embeddings_free(qdml_embeddings *e);

/* ---- training ----------------------------------------------------------- */

#define QDML_MAX_HIDDEN 8

typedef struct qdml_train_config {
  double learning_rate;
  double momentum;
  size_t epochs;
  size_t batch_size;
  size_t embedding_dim;
  size_t hidden[QDML_MAX_HIDDEN];
  size_t n_hidden;
  size_t snapshot_refresh_every;
  size_t batches_per_epoch; /* 0 = ceil(N / batch_size) */
  size_t eval_every;        /* 0 = never evaluate during training */
  uint64_t seed;
  qdml_mining_kind strategy;
  uint64_t strategy_seed;
  qdml_hyper_params hyper;
} qdml_train_config;

QDML_API void qdml_train_config_default(qdml_train_config *out);

/* Trains on `train`; `eval` may be NULL. The model keeps the per-epoch
 * metrics log. */
QDML_API qdml_status qdml_train(const qdml_dataset *train,
                                const qdml_dataset *eval,
                                const qdml_train_config *config,
                                qdml_model **out);
QDML_API qdml_status qdml_model_save_checkpoint(const qdml_model *m, const char *path);
QDML_API qdml_status qdml_model_load_checkpoint(const char *path, qdml_model **out);
/* CSV "epoch,loss,R@1,NMI"; empty for a model loaded from a checkpoint. */
QDML_API qdml_status qdml_model_write_metrics(const qdml_model *m, const char *path);
QDML_API qdml_status qdml_model_get_config(const qdml_model *m, qdml_train_config *out);
QDML_API size_t qdml_model_param_count(const qdml_model *m);
/* Copies min(len, param_count) parameters into buf; returns param_count. */
QDML_API size_t qdml_model_copy_params(const qdml_model *m, double *buf, size_t len);
QDML_API qdml_status qdml_model_embed(const qdml_model *m, const qdml_dataset *d,
                                      qdml_embeddings **out);
QDML_API void qdml_model_free(qdml_model *m);

/* ---- evaluation --------------------------------------------------------- */

#define QDML_MAX_KS 16

typedef struct qdml_eval_report {
  size_t n_ks;
  size_t ks[QDML_MAX_KS];
  double recall[QDML_MAX_KS];
  double nmi;
  size_t n_queries;
} qdml_eval_report;

QDML_API qdml_status qdml_evaluate(const qdml_embeddings *e, const size_t *ks,
                                   size_t n_ks, uint64_t seed,
                                   qdml_eval_report *out);
/* snprintf-style: writes at most len bytes including the NUL and returns the
 * full length the text needs (excluding the NUL). */
QDML_API size_t qdml_format_eval_header(const qdml_eval_report *r, char *buf,
                                        size_t len);
QDML_API size_t qdml_format_eval_row(const qdml_eval_report *r, const char *method,
                                     char *buf, size_t len);

/* ---- mining ------------------------------------------------------------- */

typedef struct qdml_quadruplet {
  size_t r, pp, pm, n; /* row indices */
} qdml_quadruplet;

/* Mines `count` quadruplets (one per drawn reference) into out[0..count). */
QDML_API qdml_status qdml_mine_batch(const qdml_embeddings *e,
                                     qdml_mining_kind kind, uint64_t seed,
                                     size_t count, qdml_quadruplet *out);
/* Same draw, written as an audit dump. *n_skipped (optional) receives the
 * number of degenerate references that were resampled. */
QDML_API qdml_status qdml_mine_audit(const qdml_embeddings *e,
                                     qdml_mining_kind kind, uint64_t seed,
                                     size_t count, const char *path,
                                     size_t *n_skipped);

/* ---- gradient check ----------------------------------------------------- */

typedef struct qdml_gradcheck_config {
  size_t input_dim;
  size_t embedding_dim;
  size_t hidden_width; /* 0 = no hidden layer */
  int k1;
  int fines_per_coarse;
  size_t batch_size;
  double step;
  uint64_t seed;
  int inject_fault; /* nonzero doubles the largest analytic coordinate */
  qdml_hyper_params hyper;
} qdml_gradcheck_config;

typedef struct qdml_gradcheck_report {
  double max_rel_error;
  size_t worst_index;
  double analytic;
  double numeric;
  size_t checked;
} qdml_gradcheck_report;

QDML_API void qdml_gradcheck_config_default(qdml_gradcheck_config *out);
QDML_API qdml_status qdml_gradcheck(const qdml_gradcheck_config *config,
                                    qdml_gradcheck_report *out);

#ifdef __cplusplus
}
#endif

#endif /* QDML_QDML_H */
