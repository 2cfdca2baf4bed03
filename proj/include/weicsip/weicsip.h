/* SPDX-License-Identifier: Apache-2.0
 *
 * weicsip: environment-aided CSI prediction with learned pilot patterns
 * Copyright (C) 2026 The weicsip authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 * ------------------------------------------------------------------------
 */

/*
 * C interface to the weicsip core.
 *
 * Objects are opaque handles created by *_generate, *_build, *_load and wc_train and
 * released with the matching *_free. Every fallible call returns a wc_status;
 * on failure wc_last_error() and wc_last_error_field() describe the problem
 * for the calling thread until its next failing call. Strings returned
 * through char** arguments are owned by the caller and released with
 * wc_string_free.
 *
 * Configuration arguments are JSON documents in the run-config schema
 * (docs/config.md). NULL selects the built-in desk preset.
 */

#ifndef WEICSIP_H
#define WEICSIP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define WC_API __declspec(dllexport)
#else
#define WC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wc_status {
    WC_OK = 0,
    WC_INVALID_ARGUMENT = 1,
    WC_SHAPE_MISMATCH = 2,
    WC_INFEASIBLE = 3,
    WC_NUMERICAL = 4,
    WC_IO = 5,
    WC_SCHEMA = 6,
    WC_INTERNAL = 99
} wc_status;

typedef struct wc_scene wc_scene;
typedef struct wc_dataset wc_dataset;
typedef struct wc_model wc_model;

/* Receives one progress line; `user` is passed through unchanged. */
typedef void (*wc_log_fn)(const char* line, void* user);

WC_API const char* wc_version(void);
WC_API const char* wc_status_name(wc_status status);
WC_API const char* wc_last_error(void);
WC_API const char* wc_last_error_field(void);
WC_API void wc_string_free(char* s);

/* Parses and validates a run config; `normalized` (optional) receives the
 * full config with every default filled in. */
WC_API wc_status wc_config_check(const char* config_json, char** normalized);

/* ---- scenes ------------------------------------------------------------ */

/* Origin scene from the config's scene section and seed; with `perturbed`
 * nonzero, the layout-perturbed variant (same roads and BS). */
WC_API wc_status wc_scene_generate(const char* config_json, int perturbed, wc_scene** out);
WC_API wc_status wc_scene_load(const char* path, wc_scene** out);
WC_API wc_status wc_scene_save(const wc_scene* scene, const char* path);
WC_API wc_status wc_scene_json(const wc_scene* scene, char** json);
WC_API wc_status wc_scene_fingerprint(const wc_scene* scene, char** fingerprint);
WC_API void wc_scene_free(wc_scene* scene);

/* ---- datasets ---------------------------------------------------------- */

/* Samples every road position of `scene`, renders views, traces paths and
 * normalizes with training-split statistics. */
WC_API wc_status wc_dataset_build(const wc_scene* scene, const char* config_json, wc_dataset** out);
/* Writes manifest.json and the binary blobs; `scene` (optional) is stored as
 * scene.json next to them. */
WC_API wc_status wc_dataset_save(const wc_dataset* dataset, const char* dir, const wc_scene* scene);
WC_API wc_status wc_dataset_load(const char* dir, wc_dataset** out);
/* Sample count, split sizes, grid and normalization as JSON. */
WC_API wc_status wc_dataset_info(const wc_dataset* dataset, char** json);
WC_API void wc_dataset_free(wc_dataset* dataset);

/* ---- models ------------------------------------------------------------ */

/* Trains `method` ("RSWOEI", "RSWEI", "DWOEI", "WEI-CSIP") on the dataset.
 * `seed` and `pilot_fraction` override the config's train section when
 * nonzero / positive. `summary` (optional) receives best epoch, validation
 * NMSE and timing as JSON. */
WC_API wc_status wc_train(const wc_dataset* dataset, const char* method, const char* config_json, uint64_t seed,
                          double pilot_fraction, wc_log_fn log, void* user, wc_model** out, char** summary);
/* Checkpoint directory: checkpoint.json, params.bin and, for trained models,
 * curves.csv. */
WC_API wc_status wc_model_save(const wc_model* model, const char* dir);
WC_API wc_status wc_model_load(const char* dir, wc_model** out);
WC_API wc_status wc_model_info(const wc_model* model, char** json);
WC_API void wc_model_free(wc_model* model);

/* Mean NMSE and cosine similarity over `split` ("train", "validation",
 * "test" or "all"). Predictions are denormalized with the statistics of
 * `stats_from` when given, else with the dataset's own. `per_sample_csv`
 * (optional) receives index,nmse,cosine rows. */
WC_API wc_status wc_evaluate(const wc_model* model, const wc_dataset* dataset, const char* split,
                             const wc_dataset* stats_from, const char* per_sample_csv, double* nmse, double* cosine);

/* ---- experiments ------------------------------------------------------- */

/* Trains and evaluates every configured (method, fraction, seed). Models are
 * saved under `checkpoint_dir` when given. `csv` receives the report table
 * including per-seed rows and medians. */
WC_API wc_status wc_compare(const wc_dataset* origin, const wc_dataset* perturbed, const char* config_json,
                            const char* checkpoint_dir, wc_log_fn log, void* user, char** csv);
/* WEI-CSIP and RSWOEI at every configured sweep fraction. */
WC_API wc_status wc_sweep(const wc_dataset* origin, const char* config_json, const char* checkpoint_dir,
                          wc_log_fn log, void* user, char** csv);
/* Rebuilds the report table by re-evaluating the checkpoints listed in
 * `checkpoint_dir`/runs.json. */
WC_API wc_status wc_report(const char* checkpoint_dir, const wc_dataset* origin, const wc_dataset* perturbed,
                           char** csv);

#ifdef __cplusplus
}
#endif

#endif /* WEICSIP_H */
