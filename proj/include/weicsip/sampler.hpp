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
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "weicsip/tensor.hpp"

namespace weicsip::sampler {

enum class Origin { dps, random };
enum class Mode { train, eval };

/// Binary time-frequency pilot mask with exactly `n_pilots` ones.
struct PilotPattern {
    std::size_t rows = 0; // N_T
    std::size_t cols = 0; // N_c
    std::size_t n_pilots = 0;
    std::vector<std::uint8_t> mask;  // rows × cols, row-major
    std::vector<std::size_t> cells;  // chosen cells in selection order
    Origin origin = Origin::random;
    std::vector<double> logits;      // n_pilots × (rows·cols), DPS only
    double tau = 2.0;

    std::size_t grid_size() const { return rows * cols; }
    std::size_t count() const;
    std::vector<double> mask_values() const;
    friend bool operator==(const PilotPattern&, const PilotPattern&) = default;
};

/// N_p for a pilot fraction of a grid, rounded to nearest, at least 1.
std::size_t pilots_for_fraction(double fraction, std::size_t grid_size);

/// I.i.d. uniform logits in [−0.1, 0.1].
std::vector<double> init_logits(std::size_t n_pilots, std::size_t grid_size, std::uint64_t seed);

/// Row r picks argmax(logit + noise) among cells not taken by rows < r.
/// Train mode adds Gumbel noise −log(−log u) per cell (every cell of every row
/// is drawn, in row-major order, and copied to `noise_out` when given); eval
/// mode is noiseless and deterministic.
PilotPattern dps_sample(std::span<const double> logits, std::size_t n_pilots, std::size_t rows, std::size_t cols,
                        double tau, Mode mode, std::mt19937_64* rng, std::vector<double>* noise_out = nullptr);

/// Straight-through gradient: each row's one-hot is differentiated as
/// softmax_τ of that row's logits with earlier selections masked out.
std::vector<double> dps_backward(std::span<const double> upstream, std::span<const double> logits,
                                 std::span<const std::size_t> cells, std::size_t grid_size, double tau);

/// Soft relaxation Σ_r softmax_τ(masked row r); the function whose Jacobian
/// dps_backward applies.
std::vector<double> dps_soft_mask(std::span<const double> logits, std::span<const std::size_t> cells,
                                  std::size_t grid_size, double tau);

/// Graph op: forward value is the hard mask, backward uses dps_backward.
/// The sampled pattern is written to `pattern`.
numerics::Tensor dps_mask(const numerics::Tensor& logits, std::size_t rows, std::size_t cols, double tau, Mode mode,
                          std::mt19937_64* rng, PilotPattern& pattern);

/// Uniform choice of `n_pilots` distinct cells.
PilotPattern random_pattern(std::size_t n_pilots, std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Hadamard product of a rows × cols slice with the mask.
std::vector<std::complex<double>> apply_mask(std::span<const std::complex<double>> slice, const PilotPattern& pattern);

nlohmann::json to_json(const PilotPattern& pattern);
PilotPattern pattern_from_json(const nlohmann::json& j);

} // namespace weicsip::sampler
