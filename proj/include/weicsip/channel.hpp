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

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "weicsip/scene.hpp"

namespace weicsip::channel {

inline constexpr double speed_of_light = 299792458.0;

/// Time-frequency-antenna grid of one CSI snapshot.
struct GridConfig {
    double f_c = 6.775e9;
    double delta_f = 120e3;
    double bandwidth = 100e6;
    double symbol_duration = 0.25e-3; // spacing of the N_T snapshots
    std::size_t n_c = 24;
    std::size_t n_t = 3;
    std::size_t m_t = 16;
    std::size_t n_r = 1;
    double antenna_spacing = speed_of_light / 6.775e9 / 2.0;

    double wavelength() const { return speed_of_light / f_c; }
    /// Offset of subcarrier q from the carrier, centred on the band.
    double subcarrier_offset(std::size_t q) const {
        return (static_cast<double>(q) - 0.5 * static_cast<double>(n_c - 1)) * delta_f;
    }
    std::size_t cells() const { return n_t * n_c; }
    std::size_t antenna_pairs() const { return m_t * n_r; }
    std::size_t numel() const { return cells() * antenna_pairs(); }
    void validate() const;

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct Path {
    std::complex<double> gain;
    double delay = 0.0;       // s
    double aod = 0.0;         // rad from broadside of the BS array (axis +x)
    double aoa = 0.0;         // rad from broadside of the MS array (axis = heading)
    double doppler = 0.0;     // Hz
    bool line_of_sight = false;
};

struct TraceConfig {
    std::size_t max_paths = 15;
    double ms_speed = 10.0; // m/s along the road heading
    double f_c = 6.775e9;

    friend bool operator==(const TraceConfig&, const TraceConfig&) = default;
};

/// LOS (when unobstructed) plus one specular reflection per visible vertical
/// scatterer face, strongest first, at most `max_paths`.
std::vector<Path> trace_paths(const scene::Scene& scene, scene::Vec3 bs, scene::Vec3 ms, double ms_heading,
                              const TraceConfig& config);

/// Complex channel over symbols × subcarriers × TX × RX, row-major in that order.
struct CsiBlock {
    std::size_t n_t = 0, n_c = 0, m_t = 0, n_r = 0;
    std::vector<std::complex<double>> values;
    scene::Vec3 ms_position;

    std::size_t index(std::size_t p, std::size_t q, std::size_t m, std::size_t n) const {
        return ((p * n_c + q) * m_t + m) * n_r + n;
    }
    std::complex<double>& at(std::size_t p, std::size_t q, std::size_t m, std::size_t n) { return values[index(p, q, m, n)]; }
    const std::complex<double>& at(std::size_t p, std::size_t q, std::size_t m, std::size_t n) const {
        return values[index(p, q, m, n)];
    }
    bool matches(const GridConfig& g) const { return n_t == g.n_t && n_c == g.n_c && m_t == g.m_t && n_r == g.n_r; }
    double power() const; // mean |h|²
};

CsiBlock synthesize_csi(std::span<const Path> paths, const GridConfig& grid);

nlohmann::json to_json(const GridConfig& grid);
GridConfig grid_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TraceConfig& trace);
TraceConfig trace_config_from_json(const nlohmann::json& j);

} // namespace weicsip::channel
