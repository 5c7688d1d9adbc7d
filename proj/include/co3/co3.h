// Copyright 2026 The CO3 Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

/* C interface to the co3 gradient codec and training simulator. Objects are
 * opaque handles; every function returns a co3_status and, on failure, leaves
 * a message retrievable with co3_last_error() on the calling thread. */

#ifndef CO3_CO3_H_
#define CO3_CO3_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CO3_BUILDING_LIBRARY)
#define CO3_API __attribute__((visibility("default")))
#else
#define CO3_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum co3_status {
  CO3_OK = 0,
  CO3_ERR_INVALID_ARGUMENT = 1,
  CO3_ERR_NON_FINITE = 2,
  CO3_ERR_DEGENERATE = 3,
  CO3_ERR_INSUFFICIENT_DATA = 4,
  CO3_ERR_OUT_OF_RANGE = 5,
  CO3_ERR_TRUNCATED = 6,
  CO3_ERR_CORRUPT = 7,
  CO3_ERR_SHAPE_MISMATCH = 8,
  CO3_ERR_DIVERGED = 9,
  CO3_ERR_IO = 10,
  CO3_ERR_CONFIG = 11,
  CO3_ERR_BUFFER_TOO_SMALL = 12,
  CO3_ERR_INTERNAL = 99
} co3_status;

typedef enum co3_family { CO3_FAMILY_NORMAL = 0, CO3_FAMILY_LAPLACE = 1, CO3_FAMILY_GENNORM = 2 } co3_family;

typedef struct co3_fp_format {
  int sign_bits;
  int mant_bits;
  int exp_bits;
  double bias;
} co3_fp_format;

/* density proportional to exp(-(|x - mu| / alpha)^beta) */
typedef struct co3_gennorm {
  double beta;
  double mu;
  double alpha;
} co3_gennorm;

typedef struct co3_config co3_config;
typedef struct co3_codebook co3_codebook;
typedef struct co3_run_result co3_run_result;

CO3_API const char* co3_version(void);
CO3_API const char* co3_status_name(co3_status status);
/* Message of the last failed call on this thread; empty after success. */
CO3_API const char* co3_last_error(void);

/* ---- fp conversion ---- */
CO3_API co3_status co3_level_count(const co3_fp_format* format, size_t* count);
/* Ascending level values. With out == NULL or cap too small, *count receives
 * the required size and CO3_ERR_BUFFER_TOO_SMALL is returned. */
CO3_API co3_status co3_levels(const co3_fp_format* format, double* out, size_t cap, size_t* count);
CO3_API co3_status co3_quantize(const co3_fp_format* format, const double* x, size_t n,
                                uint16_t* symbols, size_t* saturated);
CO3_API co3_status co3_dequantize(const co3_fp_format* format, const uint16_t* symbols, size_t n,
                                  double* out);
CO3_API co3_status co3_optimize_bias(const co3_gennorm* model, const co3_fp_format* format,
                                     double* bias, double* objective);
CO3_API co3_status co3_bias_polynomial(double beta, double sigma, double* bias);

/* ---- distribution model ---- */
CO3_API co3_status co3_fit(co3_family family, const double* x, size_t n, co3_gennorm* model,
                           double* w2);
CO3_API co3_status co3_w2_distance(const double* x, size_t n, const co3_gennorm* model, double* w2);
CO3_API co3_status co3_cell_probabilities(const co3_gennorm* model, const co3_fp_format* format,
                                          double* out, size_t cap, size_t* count);

/* ---- entropy coding ---- */
CO3_API co3_status co3_codebook_build(const double* probs, size_t n, co3_codebook** out);
CO3_API co3_status co3_codebook_from_lengths(const uint8_t* lengths, size_t n, co3_codebook** out);
CO3_API void co3_codebook_destroy(co3_codebook* codebook);
CO3_API co3_status co3_codebook_lengths(const co3_codebook* codebook, uint8_t* out, size_t cap,
                                        size_t* count);
CO3_API co3_status co3_codebook_expected_length(const co3_codebook* codebook, const double* probs,
                                                size_t n, double* bits);
/* Serializes one wire block. Size negotiation as for co3_levels. */
CO3_API co3_status co3_encode_block(const co3_codebook* codebook, const co3_fp_format* format,
                                    const uint16_t* symbols, size_t n, uint16_t user,
                                    uint32_t iteration, uint16_t layer, uint8_t* out, size_t cap,
                                    size_t* written, uint64_t* payload_bits);

typedef struct co3_block_info {
  uint16_t user;
  uint32_t iteration;
  uint16_t layer;
  uint64_t symbol_count;
  co3_fp_format format;
  uint64_t payload_bits;
  uint64_t header_bits;
  size_t block_bytes;
} co3_block_info;

/* Parses and decodes the block at the front of `bytes` using its header.
 * symbols may be NULL to query info only. */
CO3_API co3_status co3_decode_block(const uint8_t* bytes, size_t n, co3_block_info* info,
                                    uint16_t* symbols, size_t cap);

/* ---- run configuration and training ---- */
CO3_API co3_status co3_config_create(co3_config** out);
CO3_API void co3_config_destroy(co3_config* config);
/* Keys as in the JSON config; dashes and underscores are interchangeable. */
CO3_API co3_status co3_config_set(co3_config* config, const char* key, const char* value);
CO3_API co3_status co3_config_load_file(co3_config* config, const char* path);
CO3_API co3_status co3_config_validate(const co3_config* config);
CO3_API co3_status co3_config_to_json(const co3_config* config, char* out, size_t cap, size_t* needed);

typedef struct co3_run_info {
  double gamma;
  double final_test_accuracy;
  double final_train_loss;
  uint64_t total_bits;
  uint64_t payload_bits;
  uint64_t header_bits;
  uint64_t parameter_count;
  uint64_t iterations;
  double bits_per_parameter_iteration;
  double wall_seconds;
} co3_run_info;

/* Runs every configured gamma and writes the artifacts under the output
 * directory. */
CO3_API co3_status co3_train(const co3_config* config, co3_run_result** out);
CO3_API size_t co3_run_result_count(const co3_run_result* result);
CO3_API co3_status co3_run_result_get(const co3_run_result* result, size_t index, co3_run_info* info);
CO3_API void co3_run_result_destroy(co3_run_result* result);

/* ---- figure data and file codec ---- */
CO3_API co3_status co3_bias_sweep(double beta_lo, double beta_hi, double step, double sigma,
                                  const co3_fp_format* format, const char* csv_path, size_t* rows);

typedef struct co3_fit_dist_info {
  size_t rows;
  double gennorm_best_fraction;
  double median_w2_normal;
  double median_w2_laplace;
  double median_w2_gennorm;
} co3_fit_dist_info;

CO3_API co3_status co3_fit_dist(const char* run_dir, const char* csv_path, co3_fit_dist_info* info);

typedef struct co3_codec_options {
  co3_fp_format format;
  int has_bias;  /* else optimized per block */
  double bias;
  int has_model; /* else fitted per block */
  co3_gennorm model;
  uint64_t block_size; /* 0 = single block */
} co3_codec_options;

typedef struct co3_codec_report {
  uint64_t values;
  uint64_t blocks;
  uint64_t payload_bits;
  uint64_t header_bits;
  uint64_t file_bytes;
  double bits_per_weight;
} co3_codec_report;

CO3_API void co3_codec_options_default(co3_codec_options* options);
/* Raw little-endian f32 in, wire blocks out. */
CO3_API co3_status co3_codec_encode_file(const char* in_path, const char* out_path,
                                         const co3_codec_options* options, co3_codec_report* report);
/* Wire blocks in, dequantized values as raw little-endian f32 out. */
CO3_API co3_status co3_codec_decode_file(const char* in_path, const char* out_path,
                                         co3_codec_report* report);

CO3_API co3_status co3_report(const char* run_dir, char* out, size_t cap, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* CO3_CO3_H_ */
