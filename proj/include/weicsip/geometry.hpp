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

#include <cmath>
#include <optional>

namespace weicsip::geometry {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

/// Axis-aligned box given by centre and half extents.
struct Box {
    Vec3 center;
    Vec3 half;

    Vec3 lo() const { return center - half; }
    Vec3 hi() const { return center + half; }
    bool contains(Vec3 p, double slack = 0.0) const {
        return std::abs(p.x - center.x) <= half.x + slack && std::abs(p.y - center.y) <= half.y + slack &&
               std::abs(p.z - center.z) <= half.z + slack;
    }
};

/// Nearest ray parameter t in (t_min, t_max) where origin + t·dir enters the
/// box (slab test). `dir` need not be normalized.
std::optional<double> ray_box(Vec3 origin, Vec3 dir, const Box& box, double t_min, double t_max);

/// True when the open segment a→b passes through the box interior, ignoring
/// the first and last `margin` metres of the segment.
bool segment_hits_box(Vec3 a, Vec3 b, const Box& box, double margin = 1e-6);

} // namespace weicsip::geometry
