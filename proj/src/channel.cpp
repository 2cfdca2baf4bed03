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

#include "weicsip/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "weicsip/error.hpp"

namespace weicsip::channel {

using geometry::Vec3;

void GridConfig::validate() const {
    require(n_c >= 1, ErrorCode::invalid_argument, "grid.n_c", "must be at least 1");
    require(n_t >= 1, ErrorCode::invalid_argument, "grid.n_t", "must be at least 1");
    require(m_t >= 1, ErrorCode::invalid_argument, "grid.m_t", "must be at least 1");
    require(n_r >= 1, ErrorCode::invalid_argument, "grid.n_r", "must be at least 1");
    require(f_c > 0 && delta_f > 0 && bandwidth > 0, ErrorCode::invalid_argument, "grid.frequency",
            "carrier, spacing and bandwidth must be positive");
    require(static_cast<double>(n_c) * delta_f <= bandwidth * (1 + 1e-12), ErrorCode::invalid_argument, "grid.n_c",
            "subcarriers exceed the bandwidth");
    require(symbol_duration >= 0 && antenna_spacing > 0, ErrorCode::invalid_argument, "grid.timing",
            "symbol duration must be ≥ 0 and antenna spacing > 0");
}

namespace {

struct Face {
    int axis;    // 0: x-plane, 1: y-plane
    double sign; // outward normal direction along axis
};

bool occluded(const scene::Scene& scene, Vec3 a, Vec3 b, std::size_t skip_a, std::size_t skip_b) {
    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        if (i == skip_a || i == skip_b) continue;
        if (geometry::segment_hits_box(a, b, scene.scatterers[i].box(), 1e-6)) return true;
    }
    return false;
}

Path make_path(std::complex<double> coefficient, double length, Vec3 bs, Vec3 first_hop, Vec3 ms, Vec3 last_hop,
               double ms_heading, const TraceConfig& config) {
    const double lambda = speed_of_light / config.f_c;
    Path p;
    p.delay = length / speed_of_light;
    p.gain = coefficient * (1.0 / length) * std::polar(1.0, -2.0 * std::numbers::pi * length / lambda);
    const Vec3 depart = normalized(first_hop - bs);
    p.aod = std::asin(std::clamp(depart.x, -1.0, 1.0));
    const Vec3 arrive = normalized(last_hop - ms);
    const Vec3 axis{std::cos(ms_heading), std::sin(ms_heading), 0.0};
    p.aoa = std::asin(std::clamp(dot(arrive, axis), -1.0, 1.0));
    p.doppler = config.ms_speed * dot(axis, arrive) * config.f_c / speed_of_light;
    return p;
}

} // namespace

std::vector<Path> trace_paths(const scene::Scene& scene, Vec3 bs, Vec3 ms, double ms_heading,
                              const TraceConfig& config) {
    require(config.max_paths >= 1, ErrorCode::invalid_argument, "trace.max_paths", "must be at least 1");
    require(config.f_c > 0, ErrorCode::invalid_argument, "trace.f_c", "must be positive");
    require(norm(ms - bs) > 0.0, ErrorCode::invalid_argument, "ms_position", "coincides with the base station");

    const std::size_t none = scene.scatterers.size();
    const std::size_t mount = scene.scatterers.empty() ? none : scene.bs_mount;
    std::vector<Path> paths;

    if (!occluded(scene, bs, ms, mount, none)) {
        Path los = make_path(1.0, norm(ms - bs), bs, ms, ms, bs, ms_heading, config);
        los.line_of_sight = true;
        paths.push_back(los);
    }

    constexpr Face faces[] = {{0, -1.0}, {0, 1.0}, {1, -1.0}, {1, 1.0}};
    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        const auto& sc = scene.scatterers[i];
        const auto box = sc.box();
        const Vec3 lo = box.lo(), hi = box.hi();
        for (const Face& f : faces) {
            const double plane = f.axis == 0 ? (f.sign > 0 ? hi.x : lo.x) : (f.sign > 0 ? hi.y : lo.y);
            const double bs_c = f.axis == 0 ? bs.x : bs.y;
            const double ms_c = f.axis == 0 ? ms.x : ms.y;
            if ((bs_c - plane) * f.sign <= 0.0 || (ms_c - plane) * f.sign <= 0.0) continue;

            Vec3 image = bs;
            (f.axis == 0 ? image.x : image.y) = 2.0 * plane - bs_c;
            const double image_c = 2.0 * plane - bs_c;
            const double t = (plane - image_c) / (ms_c - image_c);
            const Vec3 hit = image + t * (ms - image);
            const double along = f.axis == 0 ? hit.y : hit.x;
            const double along_lo = f.axis == 0 ? lo.y : lo.x;
            const double along_hi = f.axis == 0 ? hi.y : hi.x;
            if (along < along_lo || along > along_hi || hit.z < lo.z || hit.z > hi.z) continue;
            if (occluded(scene, bs, hit, mount, i) || occluded(scene, hit, ms, i, none)) continue;

            paths.push_back(make_path(sc.reflectivity, norm(ms - image), bs, hit, ms, hit, ms_heading, config));
        }
    }

    std::stable_sort(paths.begin(), paths.end(),
                     [](const Path& a, const Path& b) { return std::abs(a.gain) > std::abs(b.gain); });
    if (paths.size() > config.max_paths) paths.resize(config.max_paths);
    return paths;
}

double CsiBlock::power() const {
    double acc = 0.0;
    for (const auto& v : values) acc += std::norm(v);
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

CsiBlock synthesize_csi(std::span<const Path> paths, const GridConfig& grid) {
    grid.validate();
    require(!paths.empty(), ErrorCode::invalid_argument, "paths", "need at least one path");
    CsiBlock out{grid.n_t, grid.n_c, grid.m_t, grid.n_r, std::vector<std::complex<double>>(grid.numel()), {}};
    const double two_pi = 2.0 * std::numbers::pi;
    const double spacing = grid.antenna_spacing / grid.wavelength();

    std::vector<std::complex<double>> time(grid.n_t), freq(grid.n_c), tx(grid.m_t), rx(grid.n_r);
    for (const Path& path : paths) {
        for (std::size_t p = 0; p < grid.n_t; ++p)
            time[p] = std::polar(1.0, two_pi * path.doppler * static_cast<double>(p) * grid.symbol_duration);
        for (std::size_t q = 0; q < grid.n_c; ++q)
            freq[q] = std::polar(1.0, -two_pi * grid.subcarrier_offset(q) * path.delay);
        for (std::size_t m = 0; m < grid.m_t; ++m)
            tx[m] = std::polar(1.0, two_pi * spacing * static_cast<double>(m) * std::sin(path.aod));
        for (std::size_t n = 0; n < grid.n_r; ++n)
            rx[n] = std::polar(1.0, two_pi * spacing * static_cast<double>(n) * std::sin(path.aoa));
        for (std::size_t p = 0; p < grid.n_t; ++p)
            for (std::size_t q = 0; q < grid.n_c; ++q) {
                const std::complex<double> tf = path.gain * time[p] * freq[q];
                for (std::size_t m = 0; m < grid.m_t; ++m) {
                    const std::complex<double> tfm = tf * tx[m];
                    for (std::size_t n = 0; n < grid.n_r; ++n) out.at(p, q, m, n) += tfm * rx[n];
                }
            }
    }
    return out;
}

nlohmann::json to_json(const GridConfig& g) {
    return {{"f_c", g.f_c},   {"delta_f", g.delta_f}, {"bandwidth", g.bandwidth}, {"symbol_duration", g.symbol_duration},
            {"n_c", g.n_c},   {"n_t", g.n_t},         {"m_t", g.m_t},             {"n_r", g.n_r},
            {"antenna_spacing", g.antenna_spacing}};
}

GridConfig grid_config_from_json(const nlohmann::json& j) {
    GridConfig g;
    g.f_c = j.value("f_c", g.f_c);
    g.antenna_spacing = speed_of_light / g.f_c / 2.0;
    g.delta_f = j.value("delta_f", g.delta_f);
    g.bandwidth = j.value("bandwidth", g.bandwidth);
    g.symbol_duration = j.value("symbol_duration", g.symbol_duration);
    g.n_c = j.value("n_c", g.n_c);
    g.n_t = j.value("n_t", g.n_t);
    g.m_t = j.value("m_t", g.m_t);
    g.n_r = j.value("n_r", g.n_r);
    g.antenna_spacing = j.value("antenna_spacing", g.antenna_spacing);
    g.validate();
    return g;
}

nlohmann::json to_json(const TraceConfig& t) {
    return {{"max_paths", t.max_paths}, {"ms_speed", t.ms_speed}, {"f_c", t.f_c}};
}

TraceConfig trace_config_from_json(const nlohmann::json& j) {
    TraceConfig t;
    t.max_paths = j.value("max_paths", t.max_paths);
    t.ms_speed = j.value("ms_speed", t.ms_speed);
    t.f_c = j.value("f_c", t.f_c);
    return t;
}

} // namespace weicsip::channel
