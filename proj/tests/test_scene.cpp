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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "weicsip/error.hpp"
#include "weicsip/scene.hpp"

using namespace weicsip;
using namespace weicsip::scene;

namespace {

Scene empty_scene() {
    Scene s;
    s.config = SceneConfig{};
    s.bs_position = {0.0, 0.0, 19.0};
    return s;
}

Scatterer cube(Vec3 center, double half) {
    Scatterer s;
    s.center = center;
    s.half_extents = {half, half, half};
    return s;
}

bool overlaps(const Scatterer& s, const Road& r) {
    const auto lo = s.box().lo(), hi = s.box().hi();
    return lo.x < r.x_max && hi.x > r.x_min && lo.y < r.y_max && hi.y > r.y_min;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ok;
}

} // namespace

TEST_CASE("generated scenes are deterministic and satisfy the layout invariants") {
    const SceneConfig cfg;
    for (std::uint64_t seed : {1u, 7u, 42u, 1234u}) {
        const Scene a = generate_scene(cfg, seed);
        CHECK(a == generate_scene(cfg, seed));
        CHECK(a.fingerprint() == generate_scene(cfg, seed).fingerprint());
        REQUIRE(a.roads.size() == 4);

        std::size_t buildings = 0, vehicles = 0;
        double tallest_vehicle = 0.0;
        for (const auto& s : a.scatterers) {
            const auto lo = s.box().lo(), hi = s.box().hi();
            CHECK(s.half_extents.x > 0);
            CHECK(s.half_extents.y > 0);
            CHECK(s.half_extents.z > 0);
            CHECK(std::abs(s.reflectivity) <= 1.0);
            CHECK(std::abs(lo.x) <= 100.0);
            CHECK(std::abs(hi.x) <= 100.0);
            CHECK(std::abs(lo.y) <= 100.0);
            CHECK(std::abs(hi.y) <= 100.0);
            if (s.kind == ScattererKind::building) {
                ++buildings;
                for (const auto& r : a.roads) CHECK_FALSE(overlaps(s, r));
            } else {
                ++vehicles;
                tallest_vehicle = std::max(tallest_vehicle, hi.z);
                const auto on_road = std::count_if(a.roads.begin(), a.roads.end(), [&](const Road& r) {
                    return r.contains_xy(s.center.x, s.center.y);
                });
                CHECK(on_road >= 1);
            }
        }
        CHECK(vehicles == cfg.vehicle_count);
        // four corner groups plus the house the base station stands on
        CHECK(buildings == 4 * cfg.buildings_per_group + 1);
        CHECK(a.bs_position.z > tallest_vehicle);
        CHECK(a.bs_position.z == doctest::Approx(cfg.bs_height));
    }
    CHECK_FALSE(generate_scene(cfg, 1) == generate_scene(cfg, 2));
}

TEST_CASE("zero vehicles leaves buildings only") {
    SceneConfig cfg;
    cfg.vehicle_count = 0;
    const Scene s = generate_scene(cfg, 3);
    CHECK_FALSE(s.scatterers.empty());
    for (const auto& sc : s.scatterers) CHECK(sc.kind == ScattererKind::building);
}

TEST_CASE("impossible layouts and bad extents are reported") {
    SceneConfig crowded;
    crowded.buildings_per_group = 200;
    crowded.max_retries = 50;
    CHECK(code_of([&] { generate_scene(crowded, 1); }) == ErrorCode::infeasible);
    SceneConfig bad;
    bad.length = -1.0;
    CHECK(code_of([&] { generate_scene(bad, 1); }) == ErrorCode::invalid_argument);
}

TEST_CASE("perturbation keeps roads and base station and moves scatterers") {
    const Scene base = generate_scene(SceneConfig{}, 7);
    const Scene p = perturb_scene(base, 8);
    CHECK(p.roads == base.roads);
    CHECK(p.bs_position == base.bs_position);
    CHECK(p.scatterers.size() == base.scatterers.size());
    CHECK_FALSE(p.scatterers == base.scatterers);
    CHECK(p == perturb_scene(base, 8));
    for (const auto& s : p.scatterers)
        if (s.kind == ScattererKind::building)
            for (const auto& r : p.roads) CHECK_FALSE(overlaps(s, r));
}

TEST_CASE("scene json roundtrip is exact") {
    const Scene a = generate_scene(SceneConfig{}, 11);
    const Scene b = scene_from_json(nlohmann::json::parse(to_json(a).dump()));
    CHECK(a == b);
    CHECK(a.fingerprint() == b.fingerprint());
    auto j = to_json(a);
    j["scatterers"][0]["kind"] = "tree";
    CHECK(code_of([&] { scene_from_json(j); }) == ErrorCode::schema);
}

TEST_CASE("mobile-station positions lie on their roads") {
    const Scene s = generate_scene(SceneConfig{}, 7);
    const auto pos = ms_positions(s, 0.65);
    CHECK(pos.size() > 1000);
    for (const auto& p : pos) {
        CHECK(s.roads[p.road].contains_xy(p.position.x, p.position.y));
        CHECK(p.heading == s.roads[p.road].heading);
    }
    CHECK(code_of([&] { ms_positions(s, 0.0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("panorama shape and value range") {
    CameraConfig large;
    large.view_width = 150;
    large.view_height = 200;
    const Scene s = generate_scene(SceneConfig{}, 7);
    const auto pos = ms_positions(s, 10.0);
    const auto img = render_views(s, pos[3].position, pos[3].heading, large);
    CHECK(img.width() == 600);
    CHECK(img.height() == 200);
    CHECK(img.channels() == 1);
    CHECK(img.data.size() == 600 * 200);
    bool any = false;
    for (double v : img.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        any = any || v > 0.0;
    }
    CHECK(any);

    const auto again = render_views(s, pos[3].position, pos[3].heading, large);
    CHECK(again.data == img.data);
}

TEST_CASE("empty scene renders all zero and out-of-bounds positions are rejected") {
    const Scene s = empty_scene();
    const auto img = render_views(s, {10.0, -45.0, 2.0}, 0.0, CameraConfig{});
    CHECK(std::all_of(img.data.begin(), img.data.end(), [](double v) { return v == 0.0; }));
    CHECK(code_of([&] { render_views(s, {150.0, 0.0, 2.0}, 0.0, CameraConfig{}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("a cube dead ahead appears only in the first view") {
    Scene s = empty_scene();
    s.scatterers.push_back(cube({20.0, 0.0, 2.0}, 2.0));
    const CameraConfig cam;
    const auto img = render_views(s, {0.0, 0.0, 2.0}, 0.0, cam);
    double view0 = 0.0;
    for (std::size_t row = 0; row < img.height(); ++row)
        for (std::size_t col = 0; col < img.width(); ++col) {
            const double v = img.at(row, col);
            if (col < cam.view_width)
                view0 += v;
            else
                CHECK(v == 0.0);
        }
    CHECK(view0 > 0.0);
    // The centre ray hits the near face at distance 18.
    const std::size_t mid = cam.view_width / 2;
    CHECK(img.at(cam.view_height / 2, mid) == doctest::Approx(cam.near_plane / 18.0).epsilon(1e-3));
}

TEST_CASE("turning by one view width cyclically permutes the views") {
    Scene s = empty_scene();
    s.scatterers.push_back(cube({25.0, 3.0, 3.0}, 3.0));
    s.scatterers.push_back(cube({-4.0, 30.0, 5.0}, 5.0));
    s.scatterers.push_back(cube({-18.0, -22.0, 4.0}, 2.5));
    const CameraConfig cam;
    const double step = std::numbers::pi / 2.0;
    const Vec3 eye{1.0, -2.0, 2.0};
    const auto a = render_views(s, eye, 0.0, cam);
    const auto b = render_views(s, eye, -step, cam);
    std::size_t differing = 0;
    for (std::size_t row = 0; row < a.height(); ++row)
        for (std::size_t v = 0; v < cam.view_count; ++v)
            for (std::size_t col = 0; col < cam.view_width; ++col) {
                const double va = a.at(row, ((v + 1) % cam.view_count) * cam.view_width + col);
                const double vb = b.at(row, v * cam.view_width + col);
                differing += std::abs(va - vb) > 1e-12;
            }
    CHECK(differing == 0);
}

TEST_CASE("pixel values fall as the only scatterer recedes") {
    const CameraConfig cam;
    double previous = 2.0;
    for (double d = 6.0; d < 120.0; d += 7.5) {
        Scene s = empty_scene();
        // Wide and tall enough that the centre pixel's ray hits at every range.
        auto slab = cube({d, 0.0, 2.0}, 1.0);
        slab.half_extents = {1.0, 6.0, 10.0};
        s.scatterers.push_back(slab);
        const auto img = render_views(s, {0.0, 0.0, 2.0}, 0.0, cam);
        const double v = img.at(cam.view_height / 2, cam.view_width / 2);
        CHECK(v > 0.0);
        CHECK(v < previous);
        previous = v;
    }
}
