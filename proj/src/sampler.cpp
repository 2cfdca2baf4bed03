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

#include "weicsip/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "weicsip/error.hpp"
#include "weicsip/ops.hpp"

namespace weicsip::sampler {

std::size_t PilotPattern::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<double> PilotPattern::mask_values() const { return {mask.begin(), mask.end()}; }

std::size_t pilots_for_fraction(double fraction, std::size_t grid_size) {
    require(fraction > 0.0 && fraction <= 1.0, ErrorCode::invalid_argument, "pilot_fraction", "must lie in (0, 1]");
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(grid_size)));
    return std::clamp<std::size_t>(n, 1, grid_size);
}

std::vector<double> init_logits(std::size_t n_pilots, std::size_t grid_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    std::vector<double> out(n_pilots * grid_size);
    for (auto& v : out) v = dist(rng);
    return out;
}

namespace {

void check_dims(std::size_t n_pilots, std::size_t grid_size) {
    require(grid_size >= 1, ErrorCode::invalid_argument, "grid", "pilot grid is empty");
    require(n_pilots >= 1, ErrorCode::invalid_argument, "n_pilots", "need at least one pilot");
    require(n_pilots <= grid_size, ErrorCode::invalid_argument, "n_pilots",
            std::to_string(n_pilots) + " pilots exceed the " + std::to_string(grid_size) + "-cell grid");
}

double gumbel(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = dist(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    return -std::log(-std::log(u));
}

} // namespace

PilotPattern dps_sample(std::span<const double> logits, std::size_t n_pilots, std::size_t rows, std::size_t cols,
                        double tau, Mode mode, std::mt19937_64* rng, std::vector<double>* noise_out) {
    const std::size_t g = rows * cols;
    check_dims(n_pilots, g);
    require(tau > 0.0, ErrorCode::invalid_argument, "tau", "temperature must be positive");
    require(logits.size() == n_pilots * g, ErrorCode::shape_mismatch, "logits",
            "expected " + std::to_string(n_pilots * g) + " logits, got " + std::to_string(logits.size()));
    require(mode == Mode::eval || rng != nullptr, ErrorCode::invalid_argument, "rng", "train mode needs a generator");

    PilotPattern p;
    p.rows = rows;
    p.cols = cols;
    p.n_pilots = n_pilots;
    p.mask.assign(g, 0);
    p.origin = Origin::dps;
    p.logits.assign(logits.begin(), logits.end());
    p.tau = tau;
    if (noise_out) noise_out->assign(n_pilots * g, 0.0);

    for (std::size_t r = 0; r < n_pilots; ++r) {
        std::size_t best = g;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < g; ++c) {
            double noise = 0.0;
            if (mode == Mode::train) {
                noise = gumbel(*rng);
                if (noise_out) (*noise_out)[r * g + c] = noise;
            }
            if (p.mask[c]) continue;
            const double score = logits[r * g + c] + noise;
            if (best == g || score > best_score) {
                best = c;
                best_score = score;
            }
        }
        p.mask[best] = 1;
        p.cells.push_back(best);
    }
    return p;
}

namespace {

// Row r's masked probabilities: cells chosen by rows < r get probability 0.
void masked_row_probs(std::span<const double> logits, std::span<const std::size_t> cells, std::size_t r,
                      std::size_t g, double tau, std::vector<double>& row, std::vector<double>& probs) {
    row.assign(logits.begin() + static_cast<long>(r * g), logits.begin() + static_cast<long>((r + 1) * g));
    for (std::size_t k = 0; k < r; ++k) row[cells[k]] = -std::numeric_limits<double>::infinity();
    probs.resize(g);
    numerics::softmax_tau_into(row, tau, probs);
}

} // namespace

std::vector<double> dps_soft_mask(std::span<const double> logits, std::span<const std::size_t> cells,
                                  std::size_t grid_size, double tau) {
    std::vector<double> out(grid_size, 0.0), row, probs;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        masked_row_probs(logits, cells, r, grid_size, tau, row, probs);
        for (std::size_t c = 0; c < grid_size; ++c) out[c] += probs[c];
    }
    return out;
}

std::vector<double> dps_backward(std::span<const double> upstream, std::span<const double> logits,
                                 std::span<const std::size_t> cells, std::size_t grid_size, double tau) {
    require(upstream.size() == grid_size, ErrorCode::shape_mismatch, "upstream", "gradient must cover the grid");
    require(logits.size() == cells.size() * grid_size, ErrorCode::shape_mismatch, "logits",
            "expected one row per selected cell");
    std::vector<double> grad(logits.size(), 0.0), row, probs;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        masked_row_probs(logits, cells, r, grid_size, tau, row, probs);
        double dot = 0.0;
        for (std::size_t c = 0; c < grid_size; ++c) dot += probs[c] * upstream[c];
        for (std::size_t c = 0; c < grid_size; ++c) grad[r * grid_size + c] = probs[c] * (upstream[c] - dot) / tau;
    }
    return grad;
}

numerics::Tensor dps_mask(const numerics::Tensor& logits, std::size_t rows, std::size_t cols, double tau, Mode mode,
                          std::mt19937_64* rng, PilotPattern& pattern) {
    const std::size_t g = rows * cols;
    require(logits.numel() % g == 0, ErrorCode::shape_mismatch, "logits", "size must be a multiple of the grid");
    pattern = dps_sample(logits.data(), logits.numel() / g, rows, cols, tau, mode, rng);
    auto cells = pattern.cells;
    return numerics::Tensor::make_result({rows, cols}, pattern.mask_values(), {logits},
                                         [cells = std::move(cells), g, tau](numerics::Node& self) {
        const auto& l = self.parents[0]->data;
        const auto grad = dps_backward(self.grad, l, cells, g, tau);
        auto dst = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += grad[i];
    });
}

PilotPattern random_pattern(std::size_t n_pilots, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    const std::size_t g = rows * cols;
    check_dims(n_pilots, g);
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n_pilots entries are a uniform draw.
    for (std::size_t i = 0; i < n_pilots; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, g - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    PilotPattern p;
    p.rows = rows;
    p.cols = cols;
    p.n_pilots = n_pilots;
    p.mask.assign(g, 0);
    p.origin = Origin::random;
    p.cells.assign(order.begin(), order.begin() + static_cast<long>(n_pilots));
    for (auto c : p.cells) p.mask[c] = 1;
    return p;
}

std::vector<std::complex<double>> apply_mask(std::span<const std::complex<double>> slice, const PilotPattern& pattern) {
    require(slice.size() == pattern.grid_size(), ErrorCode::shape_mismatch, "H_slice",
            "slice has " + std::to_string(slice.size()) + " cells, pattern has " + std::to_string(pattern.grid_size()));
    std::vector<std::complex<double>> out(slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) out[i] = pattern.mask[i] ? slice[i] : std::complex<double>{};
    return out;
}

nlohmann::json to_json(const PilotPattern& p) {
    std::vector<std::size_t> sorted = p.cells;
    std::sort(sorted.begin(), sorted.end());
    return {{"rows", p.rows},
            {"cols", p.cols},
            {"n_pilots", p.n_pilots},
            {"origin", p.origin == Origin::dps ? "dps" : "random"},
            {"cells", sorted},
            {"selection_order", p.cells},
            {"tau", p.tau}};
}

PilotPattern pattern_from_json(const nlohmann::json& j) {
    try {
        PilotPattern p;
        p.rows = j.at("rows").get<std::size_t>();
        p.cols = j.at("cols").get<std::size_t>();
        p.n_pilots = j.at("n_pilots").get<std::size_t>();
        const auto origin = j.at("origin").get<std::string>();
        require(origin == "dps" || origin == "random", ErrorCode::schema, "origin", "unknown origin '" + origin + "'");
        p.origin = origin == "dps" ? Origin::dps : Origin::random;
        p.cells = j.contains("selection_order") ? j.at("selection_order").get<std::vector<std::size_t>>()
                                                : j.at("cells").get<std::vector<std::size_t>>();
        p.tau = j.value("tau", 2.0);
        p.mask.assign(p.grid_size(), 0);
        for (auto c : p.cells) {
            require(c < p.grid_size() && !p.mask[c], ErrorCode::schema, "cells", "duplicate or out-of-range cell");
            p.mask[c] = 1;
        }
        require(p.cells.size() == p.n_pilots, ErrorCode::schema, "cells", "count differs from n_pilots");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "pattern", e.what());
    }
}

} // namespace weicsip::sampler
