/*
 * Copyright 2026 The vbilstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


/* C interface to the variational Bi-LSTM library.
 *
 * Every function returns a vbl_status. On failure a description of the
 * error is available from vbl_last_error() on the same thread until the next
 * call into the library. Handles are opaque; free them with the matching
 * *_free function. Strings returned through char** are owned by the caller
 * and released with vbl_string_free.
 */

#ifndef VBILSTM_VBILSTM_H_
#define VBILSTM_VBILSTM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(VBILSTM_BUILDING)
#define VBL_API __attribute__((visibility("default")))
#else
#define VBL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vbl_status {
  VBL_OK = 0,
  VBL_ERR_INTERNAL = 1,
  VBL_ERR_CONFIG = 2,   /* bad or missing configuration */
  VBL_ERR_DATA = 3,     /* malformed data, shape or modality mismatch, empty set */
  VBL_ERR_NUMERIC = 4,  /* non-finite values or domain violations */
  VBL_ERR_ARGUMENT = 5  /* invalid argument to an API call */
} vbl_status;

typedef enum vbl_modality {
  VBL_DISCRETE = 0,
  VBL_BINARY = 1,
  VBL_CONTINUOUS = 2
} vbl_modality;

typedef enum vbl_z_source { VBL_Z_POSTERIOR = 0, VBL_Z_PRIOR = 1 } vbl_z_source;
typedef enum vbl_emit_mode { VBL_EMIT_SAMPLE = 0, VBL_EMIT_GREEDY = 1 } vbl_emit_mode;
typedef enum vbl_z_mode { VBL_Z_SAMPLED = 0, VBL_Z_MEAN = 1 } vbl_z_mode;

typedef struct vbl_config vbl_config;
typedef struct vbl_model vbl_model;

/* Receives one line of progress output (no trailing newline). */
typedef void (*vbl_line_callback)(const char* line, void* user);

VBL_API const char* vbl_version(void);
VBL_API const char* vbl_last_error(void);
/* Config key named by the last VBL_ERR_CONFIG, or "" if none. */
VBL_API const char* vbl_last_error_key(void);
VBL_API void vbl_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

VBL_API vbl_status vbl_config_new(vbl_config** out);
VBL_API vbl_status vbl_config_load(const char* path, vbl_config** out);
VBL_API vbl_status vbl_config_set(vbl_config* cfg, const char* key, const char* value);
VBL_API vbl_status vbl_config_get(const vbl_config* cfg, const char* key, char** value);
/* Every key as "key = value" lines. */
VBL_API vbl_status vbl_config_dump(const vbl_config* cfg, char** text);
VBL_API void vbl_config_free(vbl_config* cfg);

/* ---- training --------------------------------------------------------- */

typedef struct vbl_train_summary {
  size_t best_epoch;
  size_t epochs_run;
  size_t steps;
  double best_valid_bound_per_token; /* nats; -inf without a valid split */
  double valid_bpc;                  /* at the best epoch; NaN if not discrete */
  double valid_kl_per_step;
  double test_bpc;                   /* NaN without a test split or non-discrete */
} vbl_train_summary;

/* Trains per the config, writing its log CSV and checkpoint. `progress` may
 * be NULL; `summary` may be NULL. */
VBL_API vbl_status vbl_train(const vbl_config* cfg, vbl_line_callback progress, void* user,
                             vbl_train_summary* summary);

/* ---- models ----------------------------------------------------------- */

typedef struct vbl_model_info {
  vbl_modality modality;
  size_t input_dim;
  size_t hidden;
  size_t backward_hidden;
  size_t latent;
  size_t mlp_hidden;
  size_t tensors;
  size_t values;
  size_t epoch;
} vbl_model_info;

VBL_API vbl_status vbl_model_load(const char* path, vbl_model** out);
VBL_API vbl_status vbl_model_save(const vbl_model* model, const char* path);
/* Removes every tensor of a parameter group ("bwd", "enc", "head_b", ...). */
VBL_API vbl_status vbl_model_strip(vbl_model* model, const char* group, size_t* removed);
VBL_API vbl_status vbl_model_info_get(const vbl_model* model, vbl_model_info* info);
VBL_API void vbl_model_free(vbl_model* model);

/* ---- evaluation ------------------------------------------------------- */

typedef struct vbl_eval_result {
  double elbo_per_token;  /* full objective per token */
  double bound_per_token; /* reconstruction minus KL per token */
  double kl_per_step;     /* 0 for prior evaluation */
  double bpc;             /* NaN if not discrete */
  double perplexity;      /* NaN if not discrete */
  double seq_ll;          /* bound per sequence */
  size_t sequences;
  size_t tokens;
} vbl_eval_result;

/* `format` is "char", "binary" or "frames". */
VBL_API vbl_status vbl_eval(const vbl_model* model, const char* data_path, const char* format,
                            vbl_z_source source, uint64_t seed, vbl_eval_result* out);

/* ---- generation ------------------------------------------------------- */

typedef struct vbl_generate_options {
  size_t steps;
  vbl_emit_mode mode;
  vbl_z_mode z_mode;
  uint64_t seed;
  int token_ids; /* discrete: emit space-separated token ids instead of text */
} vbl_generate_options;

VBL_API void vbl_generate_options_init(vbl_generate_options* opts);

/* Discrete models: primes with UTF-8 text and returns prime + generated text. */
VBL_API vbl_status vbl_generate_text(const vbl_model* model, const char* prime,
                                     const vbl_generate_options* opts, char** out);
/* Binary/continuous models: primes with the first sequence of `prime_path`
 * (NULL for none) and writes prime + generated frames to `out_path`. */
VBL_API vbl_status vbl_generate_frames(const vbl_model* model, const char* prime_path,
                                       const vbl_generate_options* opts, const char* out_path);

/* ---- diagnostics ------------------------------------------------------ */

typedef struct vbl_gradcheck_options {
  vbl_modality modality;
  size_t hidden;
  size_t latent;
  size_t steps;
  size_t batch;
  uint64_t seed;
  int sign_flip; /* negate one analytic gradient; the check must then fail */
} vbl_gradcheck_options;

VBL_API void vbl_gradcheck_options_init(vbl_gradcheck_options* opts);
/* Writes a per-parameter report; `passed` receives 1 or 0. */
VBL_API vbl_status vbl_gradcheck(const vbl_gradcheck_options* opts, char** report, int* passed);

/* Runs ablation study 1-4 from the config and writes the comparison CSV. */
VBL_API vbl_status vbl_ablate(const vbl_config* cfg, int study, const char* csv_path,
                              vbl_line_callback progress, void* user);

/* Synthetic data. kind "text": `n` characters of the repetition corpus over
 * `dim` letters with runs of `len`. kind "walk": `n` random-walk frame
 * sequences of `len` x `dim`. kind "bits": `n` shifting-bit binary sequences. */
VBL_API vbl_status vbl_synth(const char* kind, const char* path, size_t n, size_t len,
                             size_t dim, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* VBILSTM_VBILSTM_H_ */
