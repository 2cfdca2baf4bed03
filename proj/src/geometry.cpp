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

#include "weicsip/geometry.hpp"

#include <algorithm>
#include <limits>

namespace weicsip::geometry {

std::optional<double> ray_box(Vec3 origin, Vec3 dir, const Box& box, double t_min, double t_max) {
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const Vec3 lo_v = box.lo(), hi_v = box.hi();
    const double lo[3] = {lo_v.x, lo_v.y, lo_v.z};
    const double hi[3] = {hi_v.x, hi_v.y, hi_v.z};
    double enter = -std::numeric_limits<double>::infinity();
    double leave = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a];
        double t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        enter = std::max(enter, t0);
        leave = std::min(leave, t1);
        if (enter > leave) return std::nullopt;
    }
    if (enter > t_min && enter < t_max) return enter;
    return std::nullopt;
}

bool segment_hits_box(Vec3 a, Vec3 b, const Box& box, double margin) {
    const Vec3 d = b - a;
    const double len = norm(d);
    if (len <= 2 * margin) return false;
    const double t_lo = margin / len, t_hi = 1.0 - margin / len;
    const double o[3] = {a.x, a.y, a.z};
    const double dv[3] = {d.x, d.y, d.z};
    const Vec3 lo_v = box.lo(), hi_v = box.hi();
    const double lo[3] = {lo_v.x, lo_v.y, lo_v.z};
    const double hi[3] = {hi_v.x, hi_v.y, hi_v.z};
    double enter = t_lo, leave = t_hi;
    for (int k = 0; k < 3; ++k) {
        if (dv[k] == 0.0) {
            if (o[k] <= lo[k] || o[k] >= hi[k]) return false;
            continue;
        }
        double t0 = (lo[k] - o[k]) / dv[k];
        double t1 = (hi[k] - o[k]) / dv[k];
        if (t0 > t1) std::swap(t0, t1);
        enter = std::max(enter, t0);
        leave = std::min(leave, t1);
        if (enter >= leave) return false;
    }
    return true;
}

} // namespace weicsip::geometry
