/* Copyright (c) 2026 The dialog-reader Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the dialog-reader library. Every call returns an
 * mrdt_status; on failure mrdt_last_error() describes the problem (the
 * message is thread-local and valid until the next failing call on the same
 * thread). Strings handed out through char** must be released with
 * mrdt_string_free.
 */

#ifndef MRDT_C_API_H
#define MRDT_C_API_H

#include <stddef.h>

#if defined(_WIN32)
#define MRDT_API __declspec(dllexport)
#else
#define MRDT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mrdt_status {
  MRDT_OK = 0,
  MRDT_ERR_INVALID_ARGUMENT = 1,
  MRDT_ERR_PARSE = 2,
  MRDT_ERR_FORMAT = 3,
  MRDT_ERR_IO = 4,
  MRDT_ERR_INTERNAL = 5
} mrdt_status;

typedef struct mrdt_config mrdt_config;
typedef struct mrdt_model mrdt_model;

typedef struct mrdt_model_info {
  size_t dim;
  size_t hops;
  size_t memory_capacity;
  size_t vocab_size;
  size_t answer_size;
  int layerwise; /* 0: adjacent tying, 1: layer-wise */
} mrdt_model_info;

MRDT_API const char* mrdt_last_error(void);
MRDT_API const char* mrdt_status_name(mrdt_status status);
MRDT_API void mrdt_string_free(char* s);

/* Run configuration: flat key=value store keyed by long flag names. */
MRDT_API mrdt_status mrdt_config_create(mrdt_config** out);
MRDT_API void mrdt_config_free(mrdt_config* config);
MRDT_API mrdt_status mrdt_config_set(mrdt_config* config, const char* key, const char* value);
MRDT_API mrdt_status mrdt_config_get(const mrdt_config* config, const char* key, char** value);
MRDT_API mrdt_status mrdt_config_load_file(mrdt_config* config, const char* path);
MRDT_API mrdt_status mrdt_config_dump(const mrdt_config* config, char** text);

/* Subcommands. `report` (may be NULL) receives the human-readable output. */
MRDT_API mrdt_status mrdt_run_convert(const mrdt_config* config, char** report);
MRDT_API mrdt_status mrdt_run_train(const mrdt_config* config, char** report);
MRDT_API mrdt_status mrdt_run_eval(const mrdt_config* config, char** report);
MRDT_API mrdt_status mrdt_run_inspect(const mrdt_config* config, char** report);

/* Trained models. */
MRDT_API mrdt_status mrdt_model_load(const char* path, mrdt_model** out);
MRDT_API mrdt_status mrdt_model_save(const mrdt_model* model, const char* path);
MRDT_API void mrdt_model_free(mrdt_model* model);
MRDT_API mrdt_status mrdt_model_info_get(const mrdt_model* model, mrdt_model_info* info);

/* Answers `question` (without the trailing '?') about a dialog given as
 * n_utterances raw utterance strings in dialog order. */
MRDT_API mrdt_status mrdt_model_predict(const mrdt_model* model, const char* const* utterances,
                                        size_t n_utterances, const char* question, char** answer);

/* Attention weights, hop-major: weights[k * n_utterances + i] is the weight
 * of utterance i (dialog order) at hop k, NaN when the utterance fell outside
 * the memory. `capacity` must be at least hops * n_utterances. */
MRDT_API mrdt_status mrdt_model_attention(const mrdt_model* model, const char* const* utterances,
                                          size_t n_utterances, const char* question,
                                          double* weights, size_t capacity);

#ifdef __cplusplus
}
#endif

#endif /* MRDT_C_API_H */
