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

#include "weicsip/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "weicsip/error.hpp"

namespace weicsip::channel {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

const std::vector<std::size_t>& Dataset::split(const std::string& name) const {
    if (name == "train") return splits.train;
    if (name == "test") return splits.test;
    if (name == "validation" || name == "val") return splits.validation;
    throw Error(ErrorCode::invalid_argument, "split", "unknown split '" + name + "'");
}

SplitCounts split_counts(std::size_t n) {
    const auto train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
    const auto test = std::min(n - train, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
    return {train, test, n - train - test};
}

Splits make_splits(std::span<const std::size_t> road_of_item, std::uint64_t seed) {
    std::size_t roads = 0;
    for (auto r : road_of_item) roads = std::max(roads, r + 1);
    std::vector<std::vector<std::size_t>> per_road(roads);
    for (std::size_t i = 0; i < road_of_item.size(); ++i) per_road[road_of_item[i]].push_back(i);

    std::vector<std::size_t> order;
    order.reserve(road_of_item.size());
    for (std::size_t k = 0; order.size() < road_of_item.size(); ++k)
        for (const auto& items : per_road)
            if (k < items.size()) order.push_back(items[k]);

    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const SplitCounts c = split_counts(order.size());
    Splits s;
    s.train.assign(order.begin(), order.begin() + static_cast<long>(c.train));
    s.test.assign(order.begin() + static_cast<long>(c.train), order.begin() + static_cast<long>(c.train + c.test));
    s.validation.assign(order.begin() + static_cast<long>(c.train + c.test), order.end());
    return s;
}

Dataset build_dataset(const scene::Scene& scene, const DatasetOptions& options, std::uint64_t seed) {
    options.grid.validate();
    require(options.spacing > 0, ErrorCode::invalid_argument, "spacing", "must be positive");
    require(options.trace.f_c == options.grid.f_c, ErrorCode::invalid_argument, "trace.f_c",
            "must equal the grid carrier frequency");
    const auto positions = scene::ms_positions(scene, options.spacing, options.ms_height);
    require(!positions.empty(), ErrorCode::infeasible, "spacing", "no mobile-station positions on the roads");

    Dataset d;
    d.grid = options.grid;
    d.camera = options.camera;
    d.trace = options.trace;
    d.scene_fingerprint = scene.fingerprint();
    d.seed = seed;
    d.spacing = options.spacing;
    d.samples.reserve(positions.size());
    std::vector<std::size_t> roads;
    for (const auto& pos : positions) {
        Sample s;
        s.image = scene::render_views(scene, pos.position, pos.heading, options.camera);
        const auto paths = trace_paths(scene, scene.bs_position, pos.position, pos.heading, options.trace);
        require(!paths.empty(), ErrorCode::infeasible, "trace", "mobile station has no propagation path");
        s.csi = synthesize_csi(paths, options.grid);
        s.csi.ms_position = pos.position;
        s.heading = pos.heading;
        s.road = pos.road;
        roads.push_back(pos.road);
        d.samples.push_back(std::move(s));
    }
    d.splits = make_splits(roads, seed);
    return d;
}

void normalize(Dataset& dataset) {
    require(!dataset.splits.train.empty(), ErrorCode::invalid_argument, "splits.train", "training split is empty");
    double acc = 0.0;
    for (auto i : dataset.splits.train) acc += dataset.samples.at(i).csi.power();
    const double mean = acc / static_cast<double>(dataset.splits.train.size());
    require(mean > 0.0 && std::isfinite(mean), ErrorCode::numerical, "splits.train", "training CSI has zero power");
    dataset.stats = NormalizationStats{std::sqrt(mean), mean};
}

std::vector<std::complex<double>> normalized_values(const CsiBlock& block, const NormalizationStats& stats) {
    std::vector<std::complex<double>> out(block.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = block.values[i] / stats.scale;
    return out;
}

std::vector<std::complex<double>> denormalized_values(std::span<const std::complex<double>> values,
                                                      const NormalizationStats& stats) {
    std::vector<std::complex<double>> out(values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i] * stats.scale;
    return out;
}

void write_blob(const fs::path& path, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, path.string(), "cannot open for writing");
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    require(static_cast<bool>(out), ErrorCode::io, path.string(), "write failed");
}

std::vector<double> read_blob(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::io, path.string(), "cannot open for reading");
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == expected * sizeof(double), ErrorCode::schema, path.string(),
            "expected " + std::to_string(expected * sizeof(double)) + " bytes, found " + std::to_string(bytes));
    in.seekg(0);
    std::vector<double> out(expected);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    require(static_cast<bool>(in), ErrorCode::io, path.string(), "read failed");
    return out;
}

void save_dataset(const Dataset& d, const fs::path& dir, const scene::Scene* scene) {
    fs::create_directories(dir);
    const std::size_t n = d.samples.size();
    require(n > 0, ErrorCode::invalid_argument, "dataset", "nothing to save");
    const std::size_t pixels = d.samples[0].image.data.size();
    const std::size_t cells = d.grid.numel();

    std::vector<double> images, csi, positions;
    images.reserve(n * pixels);
    csi.reserve(n * cells * 2);
    positions.reserve(n * 4);
    nlohmann::json roads = nlohmann::json::array();
    for (const auto& s : d.samples) {
        images.insert(images.end(), s.image.data.begin(), s.image.data.end());
        for (const auto& v : s.csi.values) {
            csi.push_back(v.real());
            csi.push_back(v.imag());
        }
        positions.insert(positions.end(), {s.csi.ms_position.x, s.csi.ms_position.y, s.csi.ms_position.z, s.heading});
        roads.push_back(s.road);
    }
    write_blob(dir / "images.bin", images);
    write_blob(dir / "csi.bin", csi);
    write_blob(dir / "positions.bin", positions);

    nlohmann::json manifest = {
        {"format", "weicsip-dataset/1"},
        {"grid", to_json(d.grid)},
        {"camera", scene::to_json(d.camera)},
        {"trace", to_json(d.trace)},
        {"scene_fingerprint", d.scene_fingerprint},
        {"seed", d.seed},
        {"spacing", d.spacing},
        {"count", n},
        {"roads", roads},
        {"splits", {{"train", d.splits.train}, {"test", d.splits.test}, {"validation", d.splits.validation}}},
        {"shapes",
         {{"images", {n, d.camera.view_height, d.camera.view_count * d.camera.view_width}},
          {"csi", {n, d.grid.n_t, d.grid.n_c, d.grid.m_t, d.grid.n_r, 2}},
          {"positions", {n, 4}}}},
        {"blobs", {{"images", "images.bin"}, {"csi", "csi.bin"}, {"positions", "positions.bin"}}},
    };
    if (d.stats) manifest["normalization"] = {{"scale", d.stats->scale}, {"mean_train_power", d.stats->mean_train_power}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
    if (scene) std::ofstream(dir / "scene.json") << scene::to_json(*scene).dump(2) << "\n";
}

Dataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    require(static_cast<bool>(in), ErrorCode::io, (dir / "manifest.json").string(), "cannot open dataset manifest");
    nlohmann::json m;
    try {
        in >> m;
        require(m.at("format").get<std::string>() == "weicsip-dataset/1", ErrorCode::schema, "format",
                "unsupported dataset format");
        Dataset d;
        d.grid = grid_config_from_json(m.at("grid"));
        d.camera = scene::camera_config_from_json(m.at("camera"));
        d.trace = trace_config_from_json(m.at("trace"));
        d.scene_fingerprint = m.at("scene_fingerprint").get<std::string>();
        d.seed = m.at("seed").get<std::uint64_t>();
        d.spacing = m.at("spacing").get<double>();
        const auto n = m.at("count").get<std::size_t>();
        const std::size_t w = d.camera.view_count * d.camera.view_width, h = d.camera.view_height;
        const std::size_t cells = d.grid.numel();
        const auto images = read_blob(dir / "images.bin", n * w * h);
        const auto csi = read_blob(dir / "csi.bin", n * cells * 2);
        const auto positions = read_blob(dir / "positions.bin", n * 4);
        const auto& roads = m.at("roads");
        require(roads.size() == n, ErrorCode::schema, "roads", "length differs from count");

        d.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = d.samples[i];
            s.image.view_count = d.camera.view_count;
            s.image.view_width = d.camera.view_width;
            s.image.view_height = d.camera.view_height;
            s.image.data.assign(images.begin() + static_cast<long>(i * w * h),
                                images.begin() + static_cast<long>((i + 1) * w * h));
            s.csi = CsiBlock{d.grid.n_t, d.grid.n_c, d.grid.m_t, d.grid.n_r, std::vector<std::complex<double>>(cells), {}};
            for (std::size_t k = 0; k < cells; ++k) s.csi.values[k] = {csi[(i * cells + k) * 2], csi[(i * cells + k) * 2 + 1]};
            s.csi.ms_position = {positions[i * 4], positions[i * 4 + 1], positions[i * 4 + 2]};
            s.image.ms_position = s.csi.ms_position;
            s.heading = positions[i * 4 + 3];
            s.road = roads[i].get<std::size_t>();
        }
        const auto& sp = m.at("splits");
        d.splits.train = sp.at("train").get<std::vector<std::size_t>>();
        d.splits.test = sp.at("test").get<std::vector<std::size_t>>();
        d.splits.validation = sp.at("validation").get<std::vector<std::size_t>>();
        for (const auto* list : {&d.splits.train, &d.splits.test, &d.splits.validation})
            for (auto idx : *list) require(idx < n, ErrorCode::schema, "splits", "index out of range");
        if (m.contains("normalization"))
            d.stats = NormalizationStats{m["normalization"].at("scale").get<double>(),
                                         m["normalization"].at("mean_train_power").get<double>()};
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "manifest", e.what());
    }
}

} // namespace weicsip::channel
