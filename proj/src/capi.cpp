// SPDX-License-Identifier: Apache-2.0
//
// weicsip: environment-aided CSI prediction with learned pilot patterns
// Copyright (C) 2026 The weicsip authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "weicsip/weicsip.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <numeric>
#include <sstream>
#include <string>

#include "weicsip/error.hpp"
#include "weicsip/evalharness.hpp"

using namespace weicsip;

struct wc_scene {
    scene::Scene scene;
};

struct wc_dataset {
    channel::Dataset dataset;
};

struct wc_model {
    predictor::Model model;
    nlohmann::json extra;
    std::vector<eval::EpochRecord> curves;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_field;

wc_status to_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::ok: return WC_OK;
    case ErrorCode::invalid_argument: return WC_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return WC_SHAPE_MISMATCH;
    case ErrorCode::infeasible: return WC_INFEASIBLE;
    case ErrorCode::numerical: return WC_NUMERICAL;
    case ErrorCode::io: return WC_IO;
    case ErrorCode::schema: return WC_SCHEMA;
    case ErrorCode::internal: return WC_INTERNAL;
    }
    return WC_INTERNAL;
}

wc_status fail(wc_status status, std::string field, std::string message) {
    last_field = std::move(field);
    last_error = std::move(message);
    return status;
}

// Runs `body`, translating every exception into a status code.
template <class F>
wc_status guarded(F&& body) {
    try {
        body();
        return WC_OK;
    } catch (const Error& e) {
        return fail(to_status(e.code()), e.field(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(WC_SCHEMA, "json", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(WC_IO, e.path1().string(), e.what());
    } catch (const std::bad_alloc&) {
        return fail(WC_INTERNAL, "memory", "out of memory");
    } catch (const std::exception& e) {
        return fail(WC_INTERNAL, "", e.what());
    }
}

void need(const void* p, const char* field) {
    require(p != nullptr, ErrorCode::invalid_argument, field, "must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put_string(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

eval::RunConfig parse_config(const char* json) {
    if (!json) return eval::desk_preset();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "config", e.what());
    }
    return eval::run_config_from_json(j);
}

std::function<void(const std::string&)> logger(wc_log_fn log, void* user) {
    if (!log) return {};
    return [log, user](const std::string& line) { log(line.c_str(), user); };
}

std::vector<std::size_t> indices_for(const channel::Dataset& d, const std::string& split) {
    if (split == "all") {
        std::vector<std::size_t> all(d.samples.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    return d.split(split);
}

const channel::NormalizationStats& stats_of(const channel::Dataset& d, const char* field) {
    require(d.stats.has_value(), ErrorCode::invalid_argument, field, "dataset is not normalized");
    return *d.stats;
}

nlohmann::json dataset_info(const channel::Dataset& d) {
    nlohmann::json j = {{"samples", d.samples.size()},
                        {"train", d.splits.train.size()},
                        {"test", d.splits.test.size()},
                        {"validation", d.splits.validation.size()},
                        {"grid", channel::to_json(d.grid)},
                        {"camera", scene::to_json(d.camera)},
                        {"scene_fingerprint", d.scene_fingerprint},
                        {"seed", d.seed}};
    if (d.stats) j["normalization"] = {{"scale", d.stats->scale}, {"mean_train_power", d.stats->mean_train_power}};
    return j;
}

} // namespace

extern "C" {

const char* wc_version(void) { return "0.1.0"; }

const char* wc_status_name(wc_status status) {
    switch (status) {
    case WC_OK: return "ok";
    case WC_INVALID_ARGUMENT: return "invalid_argument";
    case WC_SHAPE_MISMATCH: return "shape_mismatch";
    case WC_INFEASIBLE: return "infeasible";
    case WC_NUMERICAL: return "numerical";
    case WC_IO: return "io";
    case WC_SCHEMA: return "schema";
    case WC_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* wc_last_error(void) { return last_error.c_str(); }
const char* wc_last_error_field(void) { return last_field.c_str(); }
void wc_string_free(char* s) { std::free(s); }

wc_status wc_config_check(const char* config_json, char** normalized) {
    return guarded([&] {
        const auto c = parse_config(config_json);
        put_string(normalized, eval::to_json(c).dump(2));
    });
}

wc_status wc_scene_generate(const char* config_json, int perturbed, wc_scene** out) {
    return guarded([&] {
        need(out, "out");
        const auto c = parse_config(config_json);
        auto s = std::make_unique<wc_scene>();
        s->scene = scene::generate_scene(c.scene, c.scene_seed);
        if (perturbed) s->scene = scene::perturb_scene(s->scene, c.perturb_seed);
        *out = s.release();
    });
}

wc_status wc_scene_load(const char* path, wc_scene** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        std::ifstream in(path);
        require(static_cast<bool>(in), ErrorCode::io, path, "cannot open scene file");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::schema, path, e.what());
        }
        auto s = std::make_unique<wc_scene>();
        s->scene = scene::scene_from_json(j);
        *out = s.release();
    });
}

wc_status wc_scene_save(const wc_scene* scene, const char* path) {
    return guarded([&] {
        need(scene, "scene");
        need(path, "path");
        const std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p);
        require(static_cast<bool>(out), ErrorCode::io, path, "cannot open for writing");
        out << scene::to_json(scene->scene).dump(2) << "\n";
        require(static_cast<bool>(out), ErrorCode::io, path, "write failed");
    });
}

wc_status wc_scene_json(const wc_scene* scene, char** json) {
    return guarded([&] {
        need(scene, "scene");
        need(json, "json");
        put_string(json, scene::to_json(scene->scene).dump(2));
    });
}

wc_status wc_scene_fingerprint(const wc_scene* scene, char** fingerprint) {
    return guarded([&] {
        need(scene, "scene");
        need(fingerprint, "fingerprint");
        put_string(fingerprint, scene->scene.fingerprint());
    });
}

void wc_scene_free(wc_scene* scene) { delete scene; }

wc_status wc_dataset_build(const wc_scene* scene, const char* config_json, wc_dataset** out) {
    return guarded([&] {
        need(scene, "scene");
        need(out, "out");
        const auto c = parse_config(config_json);
        auto d = std::make_unique<wc_dataset>();
        d->dataset = channel::build_dataset(scene->scene, c.dataset, c.dataset_seed);
        channel::normalize(d->dataset);
        *out = d.release();
    });
}

wc_status wc_dataset_save(const wc_dataset* dataset, const char* dir, const wc_scene* scene) {
    return guarded([&] {
        need(dataset, "dataset");
        need(dir, "dir");
        channel::save_dataset(dataset->dataset, dir, scene ? &scene->scene : nullptr);
    });
}

wc_status wc_dataset_load(const char* dir, wc_dataset** out) {
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        auto d = std::make_unique<wc_dataset>();
        d->dataset = channel::load_dataset(dir);
        *out = d.release();
    });
}

wc_status wc_dataset_info(const wc_dataset* dataset, char** json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(json, "json");
        put_string(json, dataset_info(dataset->dataset).dump(2));
    });
}

void wc_dataset_free(wc_dataset* dataset) { delete dataset; }

wc_status wc_train(const wc_dataset* dataset, const char* method, const char* config_json, uint64_t seed,
                   double pilot_fraction, wc_log_fn log, void* user, wc_model** out, char** summary) {
    return guarded([&] {
        need(dataset, "dataset");
        need(method, "method");
        need(out, "out");
        const auto kind = predictor::parse_method(method);
        auto cfg = parse_config(config_json).train;
        if (seed != 0) cfg.seed = seed;
        if (pilot_fraction > 0) cfg.pilot_fraction = pilot_fraction;
        cfg.validate();
        auto result = eval::train(kind, dataset->dataset, cfg);
        const auto& stats = stats_of(dataset->dataset, "dataset");
        const double test_nmse = dataset->dataset.splits.test.empty()
                                     ? 0.0
                                     : eval::evaluate(result.model, dataset->dataset, "test").nmse;
        nlohmann::json extra = {{"epoch", result.best_epoch},
                                {"pilot_fraction", cfg.pilot_fraction},
                                {"train", eval::to_json(cfg)},
                                {"normalization", {{"scale", stats.scale}}},
                                {"metrics",
                                 {{"best_val_nmse", result.best_val_nmse},
                                  {"test_nmse", test_nmse},
                                  {"initial_train_loss", result.initial_train_loss},
                                  {"final_train_loss", result.final_train_loss}}},
                                {"seconds", result.seconds},
                                {"dataset_fingerprint", dataset->dataset.scene_fingerprint}};
        if (log)
            for (const auto& r : result.curves) {
                const std::string line = "epoch " + std::to_string(r.epoch) + " train_loss " +
                                         eval::format_double(r.train_loss) + " val_nmse " +
                                         eval::format_double(r.val_nmse);
                log(line.c_str(), user);
            }
        put_string(summary, extra.dump(2));
        *out = new wc_model{std::move(result.model), std::move(extra), std::move(result.curves)};
    });
}

wc_status wc_model_save(const wc_model* model, const char* dir) {
    return guarded([&] {
        need(model, "model");
        need(dir, "dir");
        model->model.save(dir, model->extra);
        if (!model->curves.empty()) eval::write_curves_csv(std::filesystem::path(dir) / "curves.csv", model->curves);
    });
}

wc_status wc_model_load(const char* dir, wc_model** out) {
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        nlohmann::json extra;
        auto m = predictor::Model::load(dir, &extra);
        *out = new wc_model{std::move(m), std::move(extra), {}};
    });
}

wc_status wc_model_info(const wc_model* model, char** json) {
    return guarded([&] {
        need(model, "model");
        need(json, "json");
        nlohmann::json j = model->extra.is_object() ? model->extra : nlohmann::json::object();
        j["method"] = predictor::to_string(model->model.kind());
        j["config"] = predictor::to_json(model->model.config());
        j["param_count"] = model->model.params().count();
        j["pattern"] = sampler::to_json(model->model.pattern());
        put_string(json, j.dump(2));
    });
}

void wc_model_free(wc_model* model) { delete model; }

wc_status wc_evaluate(const wc_model* model, const wc_dataset* dataset, const char* split,
                      const wc_dataset* stats_from, const char* per_sample_csv, double* nmse, double* cosine) {
    return guarded([&] {
        need(model, "model");
        need(dataset, "dataset");
        const auto idx = indices_for(dataset->dataset, split ? split : "test");
        const auto& stats = stats_of(stats_from ? stats_from->dataset : dataset->dataset, "stats_from");
        const auto m = eval::evaluate(model->model, dataset->dataset, idx, stats);
        if (per_sample_csv) eval::write_per_sample_csv(per_sample_csv, m);
        if (nmse) *nmse = m.nmse;
        if (cosine) *cosine = m.cosine;
    });
}

wc_status wc_compare(const wc_dataset* origin, const wc_dataset* perturbed, const char* config_json,
                     const char* checkpoint_dir, wc_log_fn log, void* user, char** csv) {
    return guarded([&] {
        need(origin, "origin");
        need(csv, "csv");
        const auto c = parse_config(config_json);
        eval::ExperimentOptions o;
        o.methods = c.methods;
        o.seeds = c.seeds;
        o.fractions = c.compare_fractions;
        o.train = c.train;
        if (checkpoint_dir) o.checkpoint_dir = std::filesystem::path(checkpoint_dir);
        o.log = logger(log, user);
        const auto table = eval::run_comparison(origin->dataset, perturbed ? &perturbed->dataset : nullptr, o);
        put_string(csv, table.csv());
    });
}

wc_status wc_sweep(const wc_dataset* origin, const char* config_json, const char* checkpoint_dir, wc_log_fn log,
                   void* user, char** csv) {
    return guarded([&] {
        need(origin, "origin");
        need(csv, "csv");
        const auto c = parse_config(config_json);
        std::optional<std::filesystem::path> dir;
        if (checkpoint_dir) dir = std::filesystem::path(checkpoint_dir);
        const auto table =
            eval::overhead_sweep(origin->dataset, c.sweep_fractions, c.seeds, c.train, dir, logger(log, user));
        put_string(csv, table.csv());
    });
}

wc_status wc_report(const char* checkpoint_dir, const wc_dataset* origin, const wc_dataset* perturbed, char** csv) {
    return guarded([&] {
        need(checkpoint_dir, "checkpoint_dir");
        need(origin, "origin");
        need(csv, "csv");
        const auto table =
            eval::report_from_checkpoints(checkpoint_dir, origin->dataset, perturbed ? &perturbed->dataset : nullptr);
        put_string(csv, table.csv());
    });
}

} // extern "C"
