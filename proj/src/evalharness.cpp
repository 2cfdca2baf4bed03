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

#include "weicsip/evalharness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "weicsip/error.hpp"
#include "weicsip/ops.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace weicsip::eval {

namespace fs = std::filesystem;
using numerics::Tensor;

// ---- metrics ---------------------------------------------------------------

double nmse(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat) {
    require(h.size() == h_hat.size(), ErrorCode::shape_mismatch, "H_hat", "shape differs from H");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        err += std::norm(h[i] - h_hat[i]);
        ref += std::norm(h[i]);
    }
    require(ref > 0.0, ErrorCode::numerical, "H", "NMSE of an all-zero reference is undefined");
    return err / ref;
}

double cosine_similarity(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat,
                         std::size_t antenna_pairs) {
    require(h.size() == h_hat.size(), ErrorCode::shape_mismatch, "H_hat", "shape differs from H");
    require(antenna_pairs >= 1 && h.size() % antenna_pairs == 0, ErrorCode::shape_mismatch, "antenna_pairs",
            "block size is not a multiple of the antenna-pair count");
    std::vector<std::complex<double>> inner(antenna_pairs);
    std::vector<double> nh(antenna_pairs, 0.0), nhat(antenna_pairs, 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const std::size_t a = i % antenna_pairs;
        inner[a] += h[i] * std::conj(h_hat[i]);
        nh[a] += std::norm(h[i]);
        nhat[a] += std::norm(h_hat[i]);
    }
    double num = 0.0, den = 0.0, total_h = 0.0, total_hat = 0.0;
    for (std::size_t a = 0; a < antenna_pairs; ++a) {
        num += std::abs(inner[a]);
        den += std::sqrt(nh[a]) * std::sqrt(nhat[a]);
        total_h += nh[a];
        total_hat += nhat[a];
    }
    require(total_h > 0.0, ErrorCode::numerical, "H", "cosine similarity of a zero tensor");
    // A zero prediction points nowhere; it scores no similarity.
    return total_hat > 0.0 && den > 0.0 ? num / den : 0.0;
}

// ---- configuration ---------------------------------------------------------

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorCode::invalid_argument, "train.epochs", "must be positive");
    require(batch_size >= 1, ErrorCode::invalid_argument, "train.batch_size", "must be positive");
    require(lr_feature > 0 && lr_dps > 0 && lr_predictor > 0, ErrorCode::invalid_argument, "train.lr",
            "learning rates must be positive");
    require(pilot_fraction > 0 && pilot_fraction <= 1, ErrorCode::invalid_argument, "train.pilot_fraction",
            "must lie in (0, 1]");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"lr_feature", c.lr_feature},
            {"lr_dps", c.lr_dps},
            {"lr_predictor", c.lr_predictor},
            {"pilot_fraction", c.pilot_fraction},
            {"tau", c.model.tau},
            {"leaky_slope", c.model.leaky_slope},
            {"unroll", c.model.unroll}};
}

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    require(j.is_object(), ErrorCode::schema, where, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
        require(known, ErrorCode::schema, where + "." + it.key(), "unknown key");
    }
}

bool same_kind(const nlohmann::json& value, const nlohmann::json& reference) {
    if (reference.is_number_float()) return value.is_number();
    if (reference.is_number_unsigned())
        return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    if (reference.is_number_integer()) return value.is_number_integer();
    return value.type() == reference.type();
}

// Compares each value against the preset's value for the same key, so a type
// error names the exact key rather than its section.
void check_types(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where) {
    if (!j.is_object() || !reference.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto ref = reference.find(it.key());
        if (ref == reference.end()) continue;
        const std::string field = where + "." + it.key();
        if (ref->is_object()) {
            check_types(*it, *ref, field);
            continue;
        }
        require(same_kind(*it, *ref), ErrorCode::schema, field,
                "expected " + std::string(ref->is_number_unsigned() ? "a non-negative integer" : ref->type_name()) +
                    ", got " + it->type_name());
        if (ref->is_array() && !ref->empty())
            for (std::size_t k = 0; k < it->size(); ++k)
                require(same_kind((*it)[k], ref->front()), ErrorCode::schema, field + "[" + std::to_string(k) + "]",
                        std::string("expected ") + ref->front().type_name());
    }
}

template <class F>
auto section(const std::string& where, F&& parse) {
    try {
        return parse();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, where, e.what());
    }
}

} // namespace

TrainConfig train_config_from_json(const nlohmann::json& train, const nlohmann::json& model) {
    TrainConfig c;
    if (!model.is_null()) {
        check_keys(model,
                   {"feature_channels", "feature_kernel", "feature_stride", "feature_padding", "pool", "prox_kernel",
                    "head_hidden", "head_kernel", "head_residual"},
                   "model");
        c.model = section("model", [&] { return predictor::predictor_config_from_json(model); });
    }
    if (!train.is_null()) {
        check_keys(train,
                   {"epochs", "batch_size", "seed", "lr_feature", "lr_dps", "lr_predictor", "pilot_fraction", "tau",
                    "leaky_slope", "unroll"},
                   "train");
        section("train", [&] {
            c.epochs = train.value("epochs", c.epochs);
            c.batch_size = train.value("batch_size", c.batch_size);
            c.seed = train.value("seed", c.seed);
            c.lr_feature = train.value("lr_feature", c.lr_feature);
            c.lr_dps = train.value("lr_dps", c.lr_dps);
            c.lr_predictor = train.value("lr_predictor", c.lr_predictor);
            c.pilot_fraction = train.value("pilot_fraction", c.pilot_fraction);
            c.model.tau = train.value("tau", c.model.tau);
            c.model.leaky_slope = train.value("leaky_slope", c.model.leaky_slope);
            c.model.unroll = train.value("unroll", c.model.unroll);
            return 0;
        });
    }
    c.validate();
    c.model.validate();
    return c;
}

predictor::PredictorConfig model_config_for(const channel::Dataset& d, const TrainConfig& c) {
    predictor::PredictorConfig m = c.model;
    m.n_t = d.grid.n_t;
    m.n_c = d.grid.n_c;
    m.m_t = d.grid.m_t;
    m.n_r = d.grid.n_r;
    m.n_pilots = sampler::pilots_for_fraction(c.pilot_fraction, d.grid.cells());
    m.view_count = d.camera.view_count;
    m.view_width = d.camera.view_width;
    m.view_height = d.camera.view_height;
    m.validate();
    return m;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    check_keys(j, {"scene", "grid", "camera", "trace", "dataset", "model", "train", "compare", "sweep"}, "config");
    RunConfig c = desk_preset();
    const nlohmann::json reference = to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) check_types(*it, reference.at(it.key()), it.key());
    if (j.contains("scene")) {
        nlohmann::json s = j["scene"];
        require(s.is_object(), ErrorCode::schema, "scene", "expected an object");
        c.scene_seed = section("scene.seed", [&] { return s.value("seed", c.scene_seed); });
        c.perturb_seed = section("scene.perturb_seed", [&] { return s.value("perturb_seed", c.perturb_seed); });
        s.erase("seed");
        s.erase("perturb_seed");
        check_keys(s,
                   {"length", "width", "road_offset", "road_width", "buildings_per_group", "vehicle_count",
                    "building_half_min", "building_half_max", "building_height_min", "building_height_max",
                    "building_gap", "bs_height", "house_half", "building_reflectivity", "vehicle_reflectivity",
                    "max_retries"},
                   "scene");
        c.scene = section("scene", [&] { return scene::scene_config_from_json(s); });
    }
    if (j.contains("grid")) {
        check_keys(j["grid"], {"f_c", "delta_f", "bandwidth", "symbol_duration", "n_c", "n_t", "m_t", "n_r", "antenna_spacing"},
                   "grid");
        c.dataset.grid = section("grid", [&] { return channel::grid_config_from_json(j["grid"]); });
        c.dataset.trace.f_c = c.dataset.grid.f_c;
    }
    if (j.contains("camera")) {
        check_keys(j["camera"], {"view_count", "view_width", "view_height", "camera_height", "max_range", "near_plane"},
                   "camera");
        c.dataset.camera = section("camera", [&] { return scene::camera_config_from_json(j["camera"]); });
    }
    if (j.contains("trace")) {
        check_keys(j["trace"], {"max_paths", "ms_speed"}, "trace");
        section("trace", [&] {
            c.dataset.trace.max_paths = j["trace"].value("max_paths", c.dataset.trace.max_paths);
            c.dataset.trace.ms_speed = j["trace"].value("ms_speed", c.dataset.trace.ms_speed);
            return 0;
        });
    }
    if (j.contains("dataset")) {
        check_keys(j["dataset"], {"spacing", "seed", "ms_height"}, "dataset");
        section("dataset", [&] {
            c.dataset.spacing = j["dataset"].value("spacing", c.dataset.spacing);
            c.dataset.ms_height = j["dataset"].value("ms_height", c.dataset.ms_height);
            c.dataset_seed = j["dataset"].value("seed", c.dataset_seed);
            return 0;
        });
        require(c.dataset.spacing > 0, ErrorCode::schema, "dataset.spacing", "must be positive");
    }
    if (j.contains("train") || j.contains("model")) {
        nlohmann::json model = j.value("model", nlohmann::json());
        nlohmann::json train = j.value("train", nlohmann::json());
        // Unspecified fields keep the preset values.
        nlohmann::json base_model = predictor::to_json(c.train.model);
        if (model.is_object()) {
            check_keys(model,
                       {"feature_channels", "feature_kernel", "feature_stride", "feature_padding", "pool",
                        "prox_kernel", "head_hidden", "head_kernel", "head_residual"},
                       "model");
            base_model.update(model);
        }
        nlohmann::json base_train = to_json(c.train);
        if (train.is_object()) {
            check_keys(train,
                       {"epochs", "batch_size", "seed", "lr_feature", "lr_dps", "lr_predictor", "pilot_fraction",
                        "tau", "leaky_slope", "unroll"},
                       "train");
            base_train.update(train);
        }
        TrainConfig t;
        t.model = section("model", [&] { return predictor::predictor_config_from_json(base_model); });
        section("train", [&] {
            t.epochs = base_train.at("epochs").get<std::size_t>();
            t.batch_size = base_train.at("batch_size").get<std::size_t>();
            t.seed = base_train.at("seed").get<std::uint64_t>();
            t.lr_feature = base_train.at("lr_feature").get<double>();
            t.lr_dps = base_train.at("lr_dps").get<double>();
            t.lr_predictor = base_train.at("lr_predictor").get<double>();
            t.pilot_fraction = base_train.at("pilot_fraction").get<double>();
            t.model.tau = base_train.at("tau").get<double>();
            t.model.leaky_slope = base_train.at("leaky_slope").get<double>();
            t.model.unroll = base_train.at("unroll").get<std::size_t>();
            return 0;
        });
        t.validate();
        t.model.validate();
        c.train = t;
    }
    if (j.contains("compare")) {
        check_keys(j["compare"], {"methods", "seeds", "fractions"}, "compare");
        section("compare", [&] {
            const auto& cmp = j["compare"];
            if (cmp.contains("methods")) {
                c.methods.clear();
                for (const auto& m : cmp["methods"]) c.methods.push_back(predictor::parse_method(m.get<std::string>()));
            }
            c.seeds = cmp.value("seeds", c.seeds);
            c.compare_fractions = cmp.value("fractions", c.compare_fractions);
            return 0;
        });
        require(!c.seeds.empty(), ErrorCode::schema, "compare.seeds", "need at least one seed");
        require(!c.methods.empty(), ErrorCode::schema, "compare.methods", "need at least one method");
    }
    if (j.contains("sweep")) {
        check_keys(j["sweep"], {"fractions"}, "sweep");
        c.sweep_fractions = section("sweep", [&] { return j["sweep"].value("fractions", c.sweep_fractions); });
    }
    for (double f : c.compare_fractions)
        require(f > 0 && f <= 1, ErrorCode::schema, "compare.fractions", "fractions must lie in (0, 1]");
    for (double f : c.sweep_fractions)
        require(f > 0 && f <= 1, ErrorCode::schema, "sweep.fractions", "fractions must lie in (0, 1]");
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json scene = scene::to_json(c.scene);
    scene["seed"] = c.scene_seed;
    scene["perturb_seed"] = c.perturb_seed;
    nlohmann::json model = predictor::to_json(c.train.model);
    for (const char* k : {"n_t", "n_c", "m_t", "n_r", "n_pilots", "view_count", "view_width", "view_height", "leaky_slope",
                          "tau", "unroll"})
        model.erase(k);
    nlohmann::json methods = nlohmann::json::array();
    for (auto m : c.methods) methods.push_back(predictor::to_string(m));
    return {{"scene", scene},
            {"grid", channel::to_json(c.dataset.grid)},
            {"camera", scene::to_json(c.dataset.camera)},
            {"trace", {{"max_paths", c.dataset.trace.max_paths}, {"ms_speed", c.dataset.trace.ms_speed}}},
            {"dataset",
             {{"spacing", c.dataset.spacing},
              {"seed", c.dataset_seed},
              {"ms_height", c.dataset.ms_height}}},
            {"model", model},
            {"train", to_json(c.train)},
            {"compare", {{"methods", methods}, {"seeds", c.seeds}, {"fractions", c.compare_fractions}}},
            {"sweep", {{"fractions", c.sweep_fractions}}}};
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::io, path.string(), "cannot open config file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, path.string(), e.what());
    }
    return run_config_from_json(j);
}

RunConfig desk_preset() {
    RunConfig c;
    c.dataset.grid = channel::GridConfig{};
    c.dataset.grid.n_c = 24;
    c.dataset.grid.n_t = 3;
    c.dataset.grid.m_t = 16;
    c.dataset.grid.n_r = 1;
    c.dataset.camera = scene::CameraConfig{};
    c.dataset.trace = channel::TraceConfig{};
    c.dataset.trace.f_c = c.dataset.grid.f_c;
    c.dataset.spacing = 0.65;
    c.train.epochs = 100;
    c.train.batch_size = 32;
    c.train.pilot_fraction = 0.125;
    // A stride-4 first convolution keeps the twelve-run comparison inside a
    // single-core budget without hurting the environment methods.
    c.train.model.feature_stride = 4;
    return c;
}

RunConfig full_preset() {
    RunConfig c = desk_preset();
    c.train.model.feature_stride = 1;
    c.dataset.grid.n_c = 69;
    c.dataset.grid.m_t = 128;
    c.dataset.camera.view_width = 150;
    c.dataset.camera.view_height = 200;
    c.dataset.spacing = 0.26;
    c.train.epochs = 200;
    c.seeds = {1};
    return c;
}

// ---- training and evaluation ------------------------------------------------

namespace {

struct Batch {
    Tensor h_full;
    Tensor images;
};

Batch make_batch(const channel::Dataset& d, std::span<const std::size_t> idx, const channel::NormalizationStats& stats,
                 bool with_images) {
    const auto& g = d.grid;
    std::vector<double> h;
    h.reserve(idx.size() * g.numel() * 2);
    std::vector<double> img;
    for (auto i : idx) {
        const auto& s = d.samples.at(i);
        require(s.csi.matches(g), ErrorCode::shape_mismatch, "dataset", "sample grid differs from dataset grid");
        const auto norm = channel::normalized_values(s.csi, stats);
        const auto slices = predictor::to_slices(norm, g.n_t, g.n_c, g.m_t, g.n_r);
        h.insert(h.end(), slices.begin(), slices.end());
        if (with_images) img.insert(img.end(), s.image.data.begin(), s.image.data.end());
    }
    Batch b;
    b.h_full = Tensor::from({idx.size() * g.antenna_pairs(), 2, g.n_t, g.n_c}, std::move(h));
    if (with_images)
        b.images = Tensor::from({idx.size(), 1, d.camera.view_height, d.camera.view_count * d.camera.view_width},
                                std::move(img));
    return b;
}

void check_compatible(const Model& model, const channel::Dataset& d) {
    const auto& c = model.config();
    require(c.n_t == d.grid.n_t && c.n_c == d.grid.n_c && c.m_t == d.grid.m_t && c.n_r == d.grid.n_r,
            ErrorCode::shape_mismatch, "grid", "checkpoint grid does not match the dataset grid");
    require(c.view_count == d.camera.view_count && c.view_width == d.camera.view_width &&
                c.view_height == d.camera.view_height,
            ErrorCode::shape_mismatch, "camera", "checkpoint image size does not match the dataset");
}

constexpr std::size_t eval_batch = 32;

// Training allocates and frees the same multi-megabyte buffers every step.
// Keeping them on the heap instead of fresh mmap regions avoids a page fault
// per 4 KiB on every reuse.
void keep_freed_buffers() {
#if defined(__GLIBC__)
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    });
#endif
}

std::vector<std::vector<double>> snapshot(const Model& m) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : m.params().named()) out.emplace_back(t.data().begin(), t.data().end());
    return out;
}

void restore(Model& m, const std::vector<std::vector<double>>& snap) {
    auto named = m.params().named();
    for (std::size_t i = 0; i < named.size(); ++i) std::copy(snap[i].begin(), snap[i].end(), named[i].second.data().begin());
}

} // namespace

Metrics evaluate_with(const channel::Dataset& dataset, std::span<const std::size_t> indices,
                      const channel::NormalizationStats& stats,
                      const std::function<std::vector<std::complex<double>>(std::size_t)>& predict) {
    require(!indices.empty(), ErrorCode::invalid_argument, "split", "nothing to evaluate");
    Metrics m;
    const std::size_t pairs = dataset.grid.antenna_pairs();
    for (auto i : indices) {
        const auto& truth = dataset.samples.at(i).csi.values;
        const auto pred = channel::denormalized_values(predict(i), stats);
        m.indices.push_back(i);
        m.per_sample_nmse.push_back(nmse(truth, pred));
        m.per_sample_cosine.push_back(cosine_similarity(truth, pred, pairs));
    }
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < m.indices.size(); ++k) {
        a += m.per_sample_nmse[k];
        b += m.per_sample_cosine[k];
    }
    m.nmse = a / static_cast<double>(m.indices.size());
    m.cosine = b / static_cast<double>(m.indices.size());
    return m;
}

Metrics evaluate(const Model& model, const channel::Dataset& dataset, std::span<const std::size_t> indices,
                 const channel::NormalizationStats& stats) {
    check_compatible(model, dataset);
    numerics::NoGradGuard no_grad;
    const auto& g = dataset.grid;
    const bool env = predictor::uses_environment(model.kind());
    const std::size_t per_sample = g.numel() * 2;

    // Predictions for all requested samples, computed in fixed-size batches.
    std::vector<std::vector<std::complex<double>>> preds(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += eval_batch) {
        const std::size_t count = std::min(eval_batch, indices.size() - start);
        auto idx = indices.subspan(start, count);
        Batch b = make_batch(dataset, idx, stats, env);
        Tensor out = model.forward(b.h_full, b.images, sampler::Mode::eval, nullptr);
        for (std::size_t k = 0; k < count; ++k)
            preds[start + k] = predictor::from_slices(out.data().subspan(k * per_sample, per_sample), g.n_t, g.n_c,
                                                      g.m_t, g.n_r);
    }
    std::size_t cursor = 0;
    return evaluate_with(dataset, indices, stats, [&](std::size_t) { return std::move(preds[cursor++]); });
}

Metrics evaluate(const Model& model, const channel::Dataset& dataset, const std::string& split) {
    require(dataset.stats.has_value(), ErrorCode::invalid_argument, "dataset", "dataset is not normalized");
    return evaluate(model, dataset, dataset.split(split), *dataset.stats);
}

double mean_loss(const Model& model, const channel::Dataset& dataset, std::span<const std::size_t> indices) {
    require(dataset.stats.has_value(), ErrorCode::invalid_argument, "dataset", "dataset is not normalized");
    check_compatible(model, dataset);
    numerics::NoGradGuard no_grad;
    const bool env = predictor::uses_environment(model.kind());
    double total = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += eval_batch) {
        const std::size_t count = std::min(eval_batch, indices.size() - start);
        Batch b = make_batch(dataset, indices.subspan(start, count), *dataset.stats, env);
        Tensor out = model.forward(b.h_full, b.images, sampler::Mode::eval, nullptr);
        total += predictor::loss_mse(out, b.h_full, count, dataset.grid.antenna_pairs()).item() * static_cast<double>(count);
    }
    return total / static_cast<double>(indices.size());
}

TrainResult train(MethodKind kind, const channel::Dataset& dataset, const TrainConfig& config) {
    config.validate();
    keep_freed_buffers();
    require(dataset.stats.has_value(), ErrorCode::invalid_argument, "dataset", "dataset is not normalized");
    require(!dataset.splits.train.empty() && !dataset.splits.validation.empty(), ErrorCode::invalid_argument,
            "splits", "training and validation splits must be non-empty");
    const auto start = std::chrono::steady_clock::now();
    const auto& stats = *dataset.stats;
    const std::size_t pairs = dataset.grid.antenna_pairs();
    const bool env = predictor::uses_environment(kind);

    TrainResult result{Model(model_config_for(dataset, config), kind, config.seed), {}, 0, 0.0, 0.0, 0.0, 0.0};
    Model& model = result.model;
    numerics::Adam adam(model.param_groups(config.lr_feature, config.lr_dps, config.lr_predictor));
    std::mt19937_64 order_rng(predictor::derive_seed(config.seed, 10));
    std::mt19937_64 noise_rng(predictor::derive_seed(config.seed, 11));

    result.initial_train_loss = mean_loss(model, dataset, dataset.splits.train);
    std::vector<std::size_t> order = dataset.splits.train;
    std::vector<std::vector<double>> best;
    double best_val = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - b0);
            Batch b = make_batch(dataset, std::span(order).subspan(b0, count), stats, env);
            Tensor pred = model.forward(b.h_full, b.images, sampler::Mode::train, &noise_rng);
            Tensor loss = predictor::loss_mse(pred, b.h_full, count, pairs);
            require(std::isfinite(loss.item()), ErrorCode::numerical, "train",
                    "loss diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b0 / config.batch_size));
            adam.zero_grad();
            numerics::backward(loss);
            adam.step();
            loss_sum += loss.item() * static_cast<double>(count);
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        const double val = evaluate(model, dataset, dataset.splits.validation, stats).nmse;
        result.curves.push_back({epoch, train_loss, val});
        if (val < best_val) {
            best_val = val;
            best = snapshot(model);
            result.best_epoch = epoch;
        }
        if (config.verbose)
            std::fprintf(stderr, "[%s seed %llu] epoch %zu loss %.6g val_nmse %.6g\n", predictor::to_string(kind).c_str(),
                         static_cast<unsigned long long>(config.seed), epoch, train_loss, val);
    }
    restore(model, best);
    result.best_val_nmse = best_val;
    result.final_train_loss = mean_loss(model, dataset, dataset.splits.train);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

void write_curves_csv(const fs::path& path, const std::vector<EpochRecord>& curves) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::io, path.string(), "cannot open for writing");
    out << "epoch,train_loss,val_nmse\n";
    for (const auto& r : curves) out << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.val_nmse) << "\n";
}

void write_per_sample_csv(const fs::path& path, const Metrics& m) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::io, path.string(), "cannot open for writing");
    out << "index,nmse,cosine\n";
    for (std::size_t k = 0; k < m.indices.size(); ++k)
        out << m.indices[k] << "," << format_double(m.per_sample_nmse[k]) << "," << format_double(m.per_sample_cosine[k])
            << "\n";
}

// ---- experiments ------------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_fraction(double a, double b) { return std::abs(a - b) < 1e-12; }

} // namespace

std::vector<ReportRow> ReportTable::medians(const std::string& scene) const {
    std::vector<ReportRow> out;
    for (const auto& r : rows) {
        if (r.scene != scene || r.seed == "median") continue;
        const bool seen = std::any_of(out.begin(), out.end(), [&](const ReportRow& o) {
            return o.method == r.method && same_fraction(o.pilot_fraction, r.pilot_fraction);
        });
        if (!seen) out.push_back(*median(r.method, r.pilot_fraction, scene));
    }
    return out;
}

std::optional<ReportRow> ReportTable::median(const std::string& method, double fraction, const std::string& scene) const {
    std::vector<double> n, c;
    std::string split;
    for (const auto& r : rows)
        if (r.method == method && same_fraction(r.pilot_fraction, fraction) && r.scene == scene && r.seed != "median") {
            n.push_back(r.nmse);
            c.push_back(r.cosine);
            split = r.split;
        }
    if (n.empty()) return std::nullopt;
    return ReportRow{method, fraction, "median", split, scene, median_of(n), median_of(c)};
}

std::string ReportTable::csv(bool include_medians) const {
    std::ostringstream out;
    out << report_header << "\n";
    auto line = [&](const ReportRow& r) {
        out << r.method << "," << format_double(r.pilot_fraction) << "," << r.seed << "," << r.split << "," << r.scene
            << "," << format_double(r.nmse) << "," << format_double(r.cosine) << "\n";
    };
    for (const auto& r : rows) line(r);
    if (include_medians)
        for (const char* scene : {"origin", "new"})
            for (const auto& r : medians(scene)) line(r);
    return out.str();
}

std::string checkpoint_name(MethodKind kind, double fraction, std::uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_f%.6f_s%llu", predictor::to_string(kind).c_str(), fraction,
                  static_cast<unsigned long long>(seed));
    return buf;
}

namespace {

void add_rows(ReportTable& table, const Model& model, MethodKind kind, double fraction, std::uint64_t seed,
              const channel::Dataset& origin, const channel::Dataset* perturbed) {
    const auto test = evaluate(model, origin, origin.splits.test, *origin.stats);
    table.rows.push_back({predictor::to_string(kind), fraction, std::to_string(seed), "test", "origin", test.nmse, test.cosine});
    if (perturbed) {
        std::vector<std::size_t> all(perturbed->samples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto m = evaluate(model, *perturbed, all, *origin.stats);
        table.rows.push_back({predictor::to_string(kind), fraction, std::to_string(seed), "all", "new", m.nmse, m.cosine});
    }
}

} // namespace

ReportTable run_comparison(const channel::Dataset& origin, const channel::Dataset* perturbed,
                           const ExperimentOptions& options) {
    require(!options.seeds.empty(), ErrorCode::invalid_argument, "seeds", "need at least one seed");
    require(origin.stats.has_value(), ErrorCode::invalid_argument, "dataset", "origin dataset is not normalized");
    const auto start = std::chrono::steady_clock::now();
    ReportTable table;
    nlohmann::json runs = nlohmann::json::array();
    for (double fraction : options.fractions)
        for (auto kind : options.methods)
            for (auto seed : options.seeds) {
                TrainConfig cfg = options.train;
                cfg.pilot_fraction = fraction;
                cfg.seed = seed;
                TrainResult res = train(kind, origin, cfg);
                add_rows(table, res.model, kind, fraction, seed, origin, perturbed);
                if (options.log) {
                    const auto& r = table.rows[table.rows.size() - (perturbed ? 2 : 1)];
                    options.log(checkpoint_name(kind, fraction, seed) + ": test nmse " + format_double(r.nmse) +
                                " cosine " + format_double(r.cosine) + " (best epoch " + std::to_string(res.best_epoch) +
                                ", " + std::to_string(static_cast<int>(res.seconds)) + " s)");
                }
                if (options.checkpoint_dir) {
                    const std::string name = checkpoint_name(kind, fraction, seed);
                    const fs::path dir = *options.checkpoint_dir / name;
                    res.model.save(dir, {{"epoch", res.best_epoch},
                                         {"pilot_fraction", fraction},
                                         {"train", to_json(cfg)},
                                         {"normalization", {{"scale", origin.stats->scale}}},
                                         {"metrics", {{"test_nmse", table.rows.back().nmse}}}});
                    write_curves_csv(dir / "curves.csv", res.curves);
                    runs.push_back({{"name", name}, {"method", predictor::to_string(kind)}, {"pilot_fraction", fraction},
                                    {"seed", seed}});
                }
            }
    if (options.checkpoint_dir) std::ofstream(*options.checkpoint_dir / "runs.json") << runs.dump(2) << "\n";
    table.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return table;
}

ReportTable overhead_sweep(const channel::Dataset& origin, const std::vector<double>& fractions,
                           const std::vector<std::uint64_t>& seeds, const TrainConfig& train_cfg,
                           std::optional<fs::path> checkpoint_dir, std::function<void(const std::string&)> log) {
    for (double f : fractions) require(f > 0 && f <= 1, ErrorCode::invalid_argument, "fractions", "must lie in (0, 1]");
    ExperimentOptions o;
    o.methods = {MethodKind::wei_csip, MethodKind::rswoei};
    o.seeds = seeds;
    o.fractions = fractions;
    o.train = train_cfg;
    o.checkpoint_dir = std::move(checkpoint_dir);
    o.log = std::move(log);
    return run_comparison(origin, nullptr, o);
}

ReportTable report_from_checkpoints(const fs::path& dir, const channel::Dataset& origin,
                                    const channel::Dataset* perturbed) {
    require(origin.stats.has_value(), ErrorCode::invalid_argument, "dataset", "origin dataset is not normalized");
    std::ifstream in(dir / "runs.json");
    require(static_cast<bool>(in), ErrorCode::io, (dir / "runs.json").string(), "no run index");
    nlohmann::json runs;
    in >> runs;
    ReportTable table;
    for (const auto& r : runs) {
        const Model model = Model::load(dir / r.at("name").get<std::string>());
        add_rows(table, model, model.kind(), r.at("pilot_fraction").get<double>(), r.at("seed").get<std::uint64_t>(),
                 origin, perturbed);
    }
    return table;
}

} // namespace weicsip::eval
