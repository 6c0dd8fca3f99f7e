/*
 * Copyright 2026 The Cartomap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the cartomap engine.
 *
 * Every call returns a cm_status. On failure a human-readable message is
 * available from cm_last_error() on the calling thread until the next call.
 * Strings and buffers returned through out-parameters are owned by the
 * caller and released with cm_free().
 */

#ifndef CARTOMAP_CARTOMAP_H
#define CARTOMAP_CARTOMAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CM_API __declspec(dllexport)
#elif defined(__GNUC__)
#define CM_API __attribute__((visibility("default")))
#else
#define CM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cm_status {
  CM_OK = 0,
  CM_ERR_INVALID_ARGUMENT = 1,
  CM_ERR_NOT_FOUND = 2,
  CM_ERR_FORMAT = 3,
  CM_ERR_MISSING_STAGE = 4,
  CM_ERR_INTERNAL = 5
} cm_status;

typedef struct cm_config cm_config;
typedef struct cm_server cm_server;

/* Receives progress and warning lines. */
typedef void (*cm_log_fn)(const char* message, void* user);

CM_API const char* cm_version(void);
CM_API const char* cm_last_error(void);
CM_API const char* cm_status_name(cm_status status);
CM_API void cm_free(void* ptr);

/* ---- configuration ---- */

CM_API cm_status cm_config_new(cm_config** out);
CM_API cm_status cm_config_load(const char* path, cm_config** out);
CM_API void cm_config_free(cm_config* config);
/* "key.path=value"; the value is parsed like JSON unless the key holds text. */
CM_API cm_status cm_config_set(cm_config* config, const char* assignment);
/* Pretty-printed effective configuration. */
CM_API cm_status cm_config_to_json(const cm_config* config, char** out);
/* Value of a single key as JSON text. */
CM_API cm_status cm_config_get(const cm_config* config, const char* key, char** out);

/* ---- pipeline ---- */

CM_API const char* const* cm_stage_names(size_t* count);
/*
 * Runs one stage, or every stage when `stage` is "run-all". The report is a
 * JSON array with one object per stage: stage, executed, seconds, timings.
 */
CM_API cm_status cm_run(const cm_config* config, const char* stage, int force, cm_log_fn log, void* user,
                        char** report);
/* Writes a synthetic corpus (and <path>.topics.tsv) from the synth.* keys. */
CM_API cm_status cm_synth(const cm_config* config, const char* csv_path);

/* ---- serving ---- */

/* Opens a pipeline output directory using the server.* keys of `config`. */
CM_API cm_status cm_server_open(const cm_config* config, const char* data_dir, cm_server** out);
CM_API void cm_server_free(cm_server* server);
/* Starts listening on a background thread; `port` receives the bound port. */
CM_API cm_status cm_server_start(cm_server* server, int* port);
/* Serves on the calling thread until cm_server_stop is called elsewhere. */
CM_API cm_status cm_server_run(cm_server* server);
CM_API cm_status cm_server_stop(cm_server* server);
/*
 * Answers one request without the network. `target` is a path with an
 * optional query string, e.g. "/labels?bbox=0,0,1,1". `body` may be NULL.
 */
CM_API cm_status cm_server_request(cm_server* server, const char* method, const char* target, const char* body,
                                   int* http_status, char** content_type, uint8_t** data, size_t* size);

#ifdef __cplusplus
}
#endif

#endif /* CARTOMAP_CARTOMAP_H */
