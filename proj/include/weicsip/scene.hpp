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
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "weicsip/geometry.hpp"

namespace weicsip::scene {

using geometry::Vec3;

enum class ScattererKind { building, vehicle };

struct Scatterer {
    Vec3 center;
    Vec3 half_extents;
    ScattererKind kind = ScattererKind::building;
    std::complex<double> reflectivity{0.7, 0.0};

    geometry::Box box() const { return {center, half_extents}; }
    friend bool operator==(const Scatterer&, const Scatterer&) = default;
};

/// Axis-aligned road strip. Mobile stations drive along `heading` (radians,
/// 0 = +x) on the lane opposite the parked vehicles.
struct Road {
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    double heading = 0.0;

    bool horizontal() const { return (x_max - x_min) >= (y_max - y_min); }
    double half_width() const { return 0.5 * (horizontal() ? y_max - y_min : x_max - x_min); }
    double centerline() const { return horizontal() ? 0.5 * (y_min + y_max) : 0.5 * (x_min + x_max); }
    bool contains_xy(double x, double y, double slack = 0.0) const {
        return x >= x_min - slack && x <= x_max + slack && y >= y_min - slack && y <= y_max + slack;
    }
    friend bool operator==(const Road&, const Road&) = default;
};

struct SceneConfig {
    double length = 200.0; // x extent, metres
    double width = 200.0;  // y extent, metres
    double road_offset = 45.0;
    double road_width = 12.0;
    std::size_t buildings_per_group = 4;
    std::size_t vehicle_count = 24;
    double building_half_min = 4.0;
    double building_half_max = 10.0;
    double building_height_min = 8.0;
    double building_height_max = 30.0;
    double building_gap = 2.0;
    double bs_height = 19.0;
    double house_half = 6.0;
    std::complex<double> building_reflectivity{0.7, 0.0};
    std::complex<double> vehicle_reflectivity{0.5, 0.0};
    std::size_t max_retries = 2000;

    friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

/// Urban layout: two horizontal and two vertical roads, building groups in the
/// four corner blocks, the base-station house in the centre block.
struct Scene {
    SceneConfig config;
    std::vector<Scatterer> scatterers;
    std::vector<Road> roads;
    Vec3 bs_position;
    std::uint64_t seed = 0;

    /// Index of the house the base station is mounted on (never occludes the
    /// base station's own rays).
    std::size_t bs_mount = 0;

    bool in_bounds(double x, double y) const {
        return std::abs(x) <= 0.5 * config.length && std::abs(y) <= 0.5 * config.width;
    }
    std::string fingerprint() const;
    friend bool operator==(const Scene&, const Scene&) = default;
};

Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Resamples buildings and vehicles; roads and base station are kept.
Scene perturb_scene(const Scene& scene, std::uint64_t seed);

/// Mobile-station positions along the driving lane of every road, `spacing`
/// metres apart, in road order. Intersections are included.
struct MsPosition {
    Vec3 position;
    double heading = 0.0;
    std::size_t road = 0;
};
std::vector<MsPosition> ms_positions(const Scene& scene, double spacing, double height = 2.0);

struct CameraConfig {
    std::size_t view_count = 4;   // N_A
    std::size_t view_width = 32;  // w
    std::size_t view_height = 32; // h
    double camera_height = 2.0;
    double max_range = 150.0;
    double near_plane = 1.0;

    friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

/// Panorama of N_A inverse-distance views. Stored row-major as
/// height rows × (N_A·w) columns, one channel.
struct PanoramicImage {
    std::size_t view_count = 0, view_width = 0, view_height = 0;
    std::vector<double> data;
    Vec3 ms_position;

    std::size_t width() const { return view_count * view_width; }
    std::size_t height() const { return view_height; }
    std::size_t channels() const { return 1; }
    double at(std::size_t row, std::size_t col) const { return data[row * width() + col]; }
};

/// Renders views clockwise starting at `heading`. Pixel value is
/// clamp(near_plane / hit distance, 0, 1), 0 without a hit within range.
PanoramicImage render_views(const Scene& scene, Vec3 ms_position, double heading, const CameraConfig& camera);

nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraConfig& camera);
CameraConfig camera_config_from_json(const nlohmann::json& j);

} // namespace weicsip::scene
