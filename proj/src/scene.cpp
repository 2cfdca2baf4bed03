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

#include "weicsip/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <random>

#include "weicsip/error.hpp"

namespace weicsip::scene {

namespace {

constexpr double car_half[3] = {2.2, 0.9, 0.75};
constexpr double truck_half[3] = {4.5, 1.25, 1.6};
constexpr double vehicle_gap = 1.0;

bool footprints_overlap(const Scatterer& a, const Scatterer& b, double gap) {
    return std::abs(a.center.x - b.center.x) < a.half_extents.x + b.half_extents.x + gap &&
           std::abs(a.center.y - b.center.y) < a.half_extents.y + b.half_extents.y + gap;
}

bool overlaps_road(const Scatterer& s, const Road& r) {
    return s.center.x + s.half_extents.x > r.x_min && s.center.x - s.half_extents.x < r.x_max &&
           s.center.y + s.half_extents.y > r.y_min && s.center.y - s.half_extents.y < r.y_max;
}

void validate(const SceneConfig& c) {
    require(c.length > 0 && c.width > 0, ErrorCode::invalid_argument, "scene.bounds", "extents must be positive");
    require(c.road_width > 0, ErrorCode::invalid_argument, "scene.road_width", "must be positive");
    require(c.road_offset + 0.5 * c.road_width < 0.5 * std::min(c.length, c.width), ErrorCode::invalid_argument,
            "scene.road_offset", "roads must lie inside the bounds");
    require(c.house_half > 0 && c.house_half < c.road_offset - 0.5 * c.road_width, ErrorCode::invalid_argument,
            "scene.house_half", "base-station house must fit in the centre block");
    require(c.building_half_min > 0 && c.building_half_min <= c.building_half_max, ErrorCode::invalid_argument,
            "scene.building_half", "need 0 < min ≤ max");
    require(c.building_height_min > 0 && c.building_height_min <= c.building_height_max, ErrorCode::invalid_argument,
            "scene.building_height", "need 0 < min ≤ max");
    require(c.bs_height > 2.0 * truck_half[2], ErrorCode::invalid_argument, "scene.bs_height",
            "base station must be above every vehicle");
    require(std::abs(c.building_reflectivity) <= 1.0 && std::abs(c.vehicle_reflectivity) <= 1.0,
            ErrorCode::invalid_argument, "scene.reflectivity", "magnitude must not exceed 1");
}

std::vector<Road> make_roads(const SceneConfig& c) {
    const double hx = 0.5 * c.length, hy = 0.5 * c.width, hw = 0.5 * c.road_width;
    std::vector<Road> roads;
    for (double sign : {-1.0, 1.0}) {
        const double y = sign * c.road_offset;
        roads.push_back({-hx, hx, y - hw, y + hw, 0.0});
    }
    for (double sign : {-1.0, 1.0}) {
        const double x = sign * c.road_offset;
        roads.push_back({x - hw, x + hw, -hy, hy, 0.5 * std::numbers::pi});
    }
    return roads;
}

Scatterer bs_house(const SceneConfig& c) {
    const double h = c.bs_height - 1.0;
    return {{0.0, 0.0, 0.5 * h}, {c.house_half, c.house_half, 0.5 * h}, ScattererKind::building, c.building_reflectivity};
}

// Buildings and vehicles drawn from `seed`; the house is always entry 0.
std::vector<Scatterer> place_scatterers(const SceneConfig& c, const std::vector<Road>& roads, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    std::vector<Scatterer> out{bs_house(c)};
    const double inner = c.road_offset + 0.5 * c.road_width + c.building_gap;
    const double outer_x = 0.5 * c.length - c.building_gap;
    const double outer_y = 0.5 * c.width - c.building_gap;
    require(outer_x - inner >= 2 * c.building_half_min && outer_y - inner >= 2 * c.building_half_min,
            ErrorCode::infeasible, "scene.building_groups", "corner blocks are too small for any building");

    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0}) {
            std::size_t placed = 0, tries = 0;
            while (placed < c.buildings_per_group) {
                require(tries++ < c.max_retries, ErrorCode::infeasible, "scene.buildings_per_group",
                        "could not place building group after " + std::to_string(c.max_retries) + " attempts");
                const double hx = uniform(c.building_half_min, std::min(c.building_half_max, 0.5 * (outer_x - inner)));
                const double hy = uniform(c.building_half_min, std::min(c.building_half_max, 0.5 * (outer_y - inner)));
                const double height = uniform(c.building_height_min, c.building_height_max);
                const double cx = sx * uniform(inner + hx, outer_x - hx);
                const double cy = sy * uniform(inner + hy, outer_y - hy);
                Scatterer b{{cx, cy, 0.5 * height}, {hx, hy, 0.5 * height}, ScattererKind::building,
                            c.building_reflectivity};
                bool clash = std::any_of(out.begin(), out.end(),
                                         [&](const Scatterer& o) { return footprints_overlap(b, o, c.building_gap); });
                if (clash) continue;
                out.push_back(b);
                ++placed;
            }
        }

    std::size_t placed = 0, tries = 0;
    while (placed < c.vehicle_count) {
        require(tries++ < c.max_retries * std::max<std::size_t>(1, c.vehicle_count), ErrorCode::infeasible,
                "scene.vehicle_count", "could not place vehicles without overlap");
        const std::size_t ri = placed % roads.size();
        const Road& road = roads[ri];
        const bool truck = unit(rng) < 0.3;
        const double* half = truck ? truck_half : car_half;
        const double lane = road.centerline() + 0.5 * road.half_width();
        Scatterer v;
        v.kind = ScattererKind::vehicle;
        v.reflectivity = c.vehicle_reflectivity;
        if (road.horizontal()) {
            const double s = uniform(road.x_min + half[0], road.x_max - half[0]);
            v.center = {s, lane, half[2]};
            v.half_extents = {half[0], half[1], half[2]};
        } else {
            const double s = uniform(road.y_min + half[0], road.y_max - half[0]);
            v.center = {lane, s, half[2]};
            v.half_extents = {half[1], half[0], half[2]};
        }
        bool clash = false;
        for (std::size_t r = 0; r < roads.size() && !clash; ++r)
            if (r != ri && overlaps_road(v, roads[r])) clash = true;
        for (const auto& o : out)
            if (!clash && o.kind == ScattererKind::vehicle && footprints_overlap(v, o, vehicle_gap)) clash = true;
        if (clash) continue;
        out.push_back(v);
        ++placed;
    }
    return out;
}

} // namespace

std::string Scene::fingerprint() const {
    const std::string text = to_json(*this).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
    validate(config);
    Scene s;
    s.config = config;
    s.seed = seed;
    s.roads = make_roads(config);
    s.bs_position = {0.0, 0.0, config.bs_height};
    s.scatterers = place_scatterers(config, s.roads, seed);
    s.bs_mount = 0;
    return s;
}

Scene perturb_scene(const Scene& scene, std::uint64_t seed) {
    Scene out = scene;
    // Decorrelate from the original layout stream even when seeds coincide.
    std::uint64_t stream = seed ^ 0x9e3779b97f4a7c15ULL;
    do {
        out.scatterers = place_scatterers(scene.config, scene.roads, stream++);
    } while (out.scatterers == scene.scatterers);
    out.seed = seed;
    return out;
}

std::vector<MsPosition> ms_positions(const Scene& scene, double spacing, double height) {
    require(spacing > 0, ErrorCode::invalid_argument, "spacing", "must be positive");
    constexpr double margin = 1.0;
    std::vector<MsPosition> out;
    for (std::size_t r = 0; r < scene.roads.size(); ++r) {
        const Road& road = scene.roads[r];
        const double lane = road.centerline() - 0.5 * road.half_width();
        const double lo = (road.horizontal() ? road.x_min : road.y_min) + margin;
        const double hi = (road.horizontal() ? road.x_max : road.y_max) - margin;
        for (std::size_t k = 0;; ++k) {
            const double s = lo + static_cast<double>(k) * spacing;
            if (s > hi) break;
            Vec3 p = road.horizontal() ? Vec3{s, lane, height} : Vec3{lane, s, height};
            out.push_back({p, road.heading, r});
        }
    }
    return out;
}

PanoramicImage render_views(const Scene& scene, Vec3 ms_position, double heading, const CameraConfig& camera) {
    require(camera.view_count >= 1, ErrorCode::invalid_argument, "camera.view_count", "need at least one view");
    require(camera.view_width >= 1 && camera.view_height >= 1, ErrorCode::invalid_argument, "camera.view_size",
            "views need positive pixel extents");
    require(camera.near_plane > 0 && camera.max_range > camera.near_plane, ErrorCode::invalid_argument,
            "camera.range", "need 0 < near_plane < max_range");
    require(scene.in_bounds(ms_position.x, ms_position.y), ErrorCode::invalid_argument, "ms_position",
            "outside the scene bounds");

    PanoramicImage img;
    img.view_count = camera.view_count;
    img.view_width = camera.view_width;
    img.view_height = camera.view_height;
    img.ms_position = ms_position;
    img.data.assign(img.width() * img.height(), 0.0);

    const Vec3 eye{ms_position.x, ms_position.y, camera.camera_height};
    std::vector<geometry::Box> boxes;
    for (const auto& s : scene.scatterers) {
        const auto box = s.box();
        const Vec3 lo = box.lo(), hi = box.hi();
        const Vec3 nearest{std::clamp(eye.x, lo.x, hi.x), std::clamp(eye.y, lo.y, hi.y), std::clamp(eye.z, lo.z, hi.z)};
        if (norm(nearest - eye) < camera.max_range) boxes.push_back(box);
    }

    const double step = 2.0 * std::numbers::pi / static_cast<double>(camera.view_count);
    const double focal = 0.5 * static_cast<double>(camera.view_width) / std::tan(0.5 * step);
    const double half_w = 0.5 * static_cast<double>(camera.view_width);
    const double half_h = 0.5 * static_cast<double>(camera.view_height);
    for (std::size_t v = 0; v < camera.view_count; ++v) {
        const double yaw = heading - static_cast<double>(v) * step;
        const Vec3 forward{std::cos(yaw), std::sin(yaw), 0.0};
        const Vec3 right{std::sin(yaw), -std::cos(yaw), 0.0};
        for (std::size_t row = 0; row < camera.view_height; ++row) {
            const double up = (half_h - static_cast<double>(row) - 0.5) / focal;
            for (std::size_t col = 0; col < camera.view_width; ++col) {
                const double side = (static_cast<double>(col) + 0.5 - half_w) / focal;
                const Vec3 dir = normalized(forward + side * right + Vec3{0.0, 0.0, up});
                double best = camera.max_range;
                bool hit = false;
                for (const auto& box : boxes)
                    if (auto t = geometry::ray_box(eye, dir, box, 0.0, best)) {
                        best = *t;
                        hit = true;
                    }
                if (hit)
                    img.data[row * img.width() + v * camera.view_width + col] =
                        std::clamp(camera.near_plane / best, 0.0, 1.0);
            }
        }
    }
    return img;
}

namespace {

nlohmann::json vec_json(Vec3 v) { return {v.x, v.y, v.z}; }
Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
nlohmann::json cx_json(std::complex<double> c) { return {c.real(), c.imag()}; }
std::complex<double> cx_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

} // namespace

nlohmann::json to_json(const SceneConfig& c) {
    return {{"length", c.length},
            {"width", c.width},
            {"road_offset", c.road_offset},
            {"road_width", c.road_width},
            {"buildings_per_group", c.buildings_per_group},
            {"vehicle_count", c.vehicle_count},
            {"building_half_min", c.building_half_min},
            {"building_half_max", c.building_half_max},
            {"building_height_min", c.building_height_min},
            {"building_height_max", c.building_height_max},
            {"building_gap", c.building_gap},
            {"bs_height", c.bs_height},
            {"house_half", c.house_half},
            {"building_reflectivity", cx_json(c.building_reflectivity)},
            {"vehicle_reflectivity", cx_json(c.vehicle_reflectivity)},
            {"max_retries", c.max_retries}};
}

SceneConfig scene_config_from_json(const nlohmann::json& j) {
    SceneConfig c;
    c.length = j.value("length", c.length);
    c.width = j.value("width", c.width);
    c.road_offset = j.value("road_offset", c.road_offset);
    c.road_width = j.value("road_width", c.road_width);
    c.buildings_per_group = j.value("buildings_per_group", c.buildings_per_group);
    c.vehicle_count = j.value("vehicle_count", c.vehicle_count);
    c.building_half_min = j.value("building_half_min", c.building_half_min);
    c.building_half_max = j.value("building_half_max", c.building_half_max);
    c.building_height_min = j.value("building_height_min", c.building_height_min);
    c.building_height_max = j.value("building_height_max", c.building_height_max);
    c.building_gap = j.value("building_gap", c.building_gap);
    c.bs_height = j.value("bs_height", c.bs_height);
    c.house_half = j.value("house_half", c.house_half);
    if (j.contains("building_reflectivity")) c.building_reflectivity = cx_from(j.at("building_reflectivity"));
    if (j.contains("vehicle_reflectivity")) c.vehicle_reflectivity = cx_from(j.at("vehicle_reflectivity"));
    c.max_retries = j.value("max_retries", c.max_retries);
    return c;
}

nlohmann::json to_json(const CameraConfig& c) {
    return {{"view_count", c.view_count},   {"view_width", c.view_width}, {"view_height", c.view_height},
            {"camera_height", c.camera_height}, {"max_range", c.max_range},   {"near_plane", c.near_plane}};
}

CameraConfig camera_config_from_json(const nlohmann::json& j) {
    CameraConfig c;
    c.view_count = j.value("view_count", c.view_count);
    c.view_width = j.value("view_width", c.view_width);
    c.view_height = j.value("view_height", c.view_height);
    c.camera_height = j.value("camera_height", c.camera_height);
    c.max_range = j.value("max_range", c.max_range);
    c.near_plane = j.value("near_plane", c.near_plane);
    return c;
}

nlohmann::json to_json(const Scene& s) {
    nlohmann::json scatterers = nlohmann::json::array();
    for (const auto& sc : s.scatterers)
        scatterers.push_back({{"center", vec_json(sc.center)},
                              {"half_extents", vec_json(sc.half_extents)},
                              {"kind", sc.kind == ScattererKind::building ? "building" : "vehicle"},
                              {"reflectivity", cx_json(sc.reflectivity)}});
    nlohmann::json roads = nlohmann::json::array();
    for (const auto& r : s.roads)
        roads.push_back({{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max},
                         {"heading", r.heading}});
    return {{"bounds", {s.config.length, s.config.width}},
            {"config", to_json(s.config)},
            {"scatterers", scatterers},
            {"roads", roads},
            {"bs_position", vec_json(s.bs_position)},
            {"bs_mount", s.bs_mount},
            {"seed", s.seed}};
}

Scene scene_from_json(const nlohmann::json& j) {
    try {
        Scene s;
        s.config = scene_config_from_json(j.at("config"));
        for (const auto& sc : j.at("scatterers")) {
            const std::string kind = sc.at("kind").get<std::string>();
            require(kind == "building" || kind == "vehicle", ErrorCode::schema, "scatterers.kind",
                    "unknown kind '" + kind + "'");
            Scatterer out{vec_from(sc.at("center")), vec_from(sc.at("half_extents")),
                          kind == "building" ? ScattererKind::building : ScattererKind::vehicle,
                          cx_from(sc.at("reflectivity"))};
            require(out.half_extents.x > 0 && out.half_extents.y > 0 && out.half_extents.z > 0, ErrorCode::schema,
                    "scatterers.half_extents", "must be positive");
            require(std::abs(out.reflectivity) <= 1.0, ErrorCode::schema, "scatterers.reflectivity",
                    "magnitude must not exceed 1");
            s.scatterers.push_back(out);
        }
        for (const auto& r : j.at("roads"))
            s.roads.push_back({r.at("x_min").get<double>(), r.at("x_max").get<double>(), r.at("y_min").get<double>(),
                               r.at("y_max").get<double>(), r.at("heading").get<double>()});
        s.bs_position = vec_from(j.at("bs_position"));
        s.bs_mount = j.value("bs_mount", std::size_t{0});
        s.seed = j.at("seed").get<std::uint64_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "scene", e.what());
    }
}

} // namespace weicsip::scene
