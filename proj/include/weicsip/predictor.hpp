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
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "weicsip/optim.hpp"
#include "weicsip/sampler.hpp"
#include "weicsip/tensor.hpp"

namespace weicsip::predictor {

using numerics::Tensor;

enum class MethodKind { rswoei, rswei, dwoei, wei_csip };

constexpr bool uses_environment(MethodKind k) { return k == MethodKind::rswei || k == MethodKind::wei_csip; }
constexpr bool uses_dps(MethodKind k) { return k == MethodKind::dwoei || k == MethodKind::wei_csip; }
std::string to_string(MethodKind k);
/// Accepts "RSWOEI", "RSWEI", "DWOEI", "WEI-CSIP" (case-insensitive).
MethodKind parse_method(const std::string& name);
inline constexpr MethodKind all_methods[] = {MethodKind::rswoei, MethodKind::rswei, MethodKind::dwoei,
                                             MethodKind::wei_csip};

struct PredictorConfig {
    // CSI grid
    std::size_t n_t = 3, n_c = 24, m_t = 16, n_r = 1;
    std::size_t n_pilots = 9;
    // panorama
    std::size_t view_count = 4, view_width = 32, view_height = 32;
    // feature extractor: three conv + leaky layers, then max-pool
    std::vector<std::size_t> feature_channels{8, 16, 16};
    std::size_t feature_kernel = 3;
    std::size_t feature_stride = 1; // first conv only
    std::size_t feature_padding = 1;
    std::size_t pool = 2;
    // unrolled proximal iterations
    std::size_t unroll = 2; // N_o
    std::size_t prox_kernel = 3;
    // fusion head
    std::size_t head_hidden = 16;
    std::size_t head_kernel = 3;
    bool head_residual = false;
    double leaky_slope = 0.0005;
    double tau = 2.0;

    std::size_t feature_out() const { return feature_channels.back(); }
    std::size_t cells() const { return n_t * n_c; }
    std::size_t pairs() const { return m_t * n_r; }
    std::size_t image_width() const { return view_count * view_width; }
    void validate() const;
    friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

nlohmann::json to_json(const PredictorConfig& c);
PredictorConfig predictor_config_from_json(const nlohmann::json& j);

/// Every trainable tensor, grouped for the optimizer.
struct ModelParams {
    std::vector<Tensor> feature_w, feature_b; // empty without the environment branch
    std::vector<Tensor> prox_w, prox_b, alpha;
    Tensor head_w1, head_b1, head_w2, head_b2;
    Tensor logits; // undefined unless the method uses DPS

    /// (name, tensor) in a fixed order; used by checkpoints.
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::size_t count() const;
};

class Model {
public:
    Model(PredictorConfig config, MethodKind kind, std::uint64_t seed);

    const PredictorConfig& config() const { return config_; }
    MethodKind kind() const { return kind_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

    /// Optimizer groups "feature", "dps", "predictor" (empty groups omitted).
    std::vector<numerics::ParamGroup> param_groups(double lr_feature, double lr_dps, double lr_predictor) const;

    /// Deployment pattern: the fixed random pattern, or the eval-mode DPS
    /// selection from the current logits.
    sampler::PilotPattern pattern() const;
    const sampler::PilotPattern& random_pattern() const { return random_pattern_; }
    void set_random_pattern(sampler::PilotPattern p);

    /// Mask tensor for a pattern; rejects patterns from the wrong sampler.
    Tensor mask_tensor(const sampler::PilotPattern& pattern) const;
    /// Mask for one forward pass. DPS kinds sample through the graph (train
    /// mode draws Gumbel noise from `rng`); random kinds return the fixed mask.
    Tensor sample_mask(sampler::Mode mode, std::mt19937_64* rng, sampler::PilotPattern& used) const;

    /// `images` is B×1×h×(N_A·w). Returns B×C_f×n_t×n_c (bilinear-resized).
    Tensor extract_features(const Tensor& images) const;
    /// Conv stack and pool only, before the resize.
    Tensor extract_features_raw(const Tensor& images) const;

    /// S¹ = α⁰·H_p; Sᵏ⁺¹ = Xᵏ + αᵏ(H_p − Xᵏ⊙A); Xᵏ⁺¹ = prox_k(Sᵏ⁺¹). `h_partial`
    /// is (B·pairs)×2×n_t×n_c.
    Tensor proximal_unroll(const Tensor& h_partial, const Tensor& mask) const;

    /// Ĥ from masked slices, mask and images (images ignored for kinds without
    /// the environment branch; pass an undefined tensor).
    Tensor predict(const Tensor& h_partial, const Tensor& mask, const Tensor& images) const;

    /// Full pass from complete slices: sample mask, apply it, predict.
    Tensor forward(const Tensor& h_full, const Tensor& images, sampler::Mode mode, std::mt19937_64* rng,
                   sampler::PilotPattern* used = nullptr) const;

    void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
    static Model load(const std::filesystem::path& dir, nlohmann::json* extra = nullptr);

private:
    Tensor conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) const;

    PredictorConfig config_;
    MethodKind kind_;
    std::uint64_t seed_;
    ModelParams params_;
    sampler::PilotPattern random_pattern_;
};

/// Independent, well-mixed seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Complex block (n_t × n_c × m_t × n_r, row-major) → pairs×2×n_t×n_c reals.
std::vector<double> to_slices(std::span<const std::complex<double>> block, std::size_t n_t, std::size_t n_c,
                              std::size_t m_t, std::size_t n_r);
std::vector<std::complex<double>> from_slices(std::span<const double> slices, std::size_t n_t, std::size_t n_c,
                                              std::size_t m_t, std::size_t n_r);

/// L_H = (1/(M_t·N_r)) Σ_{i,j} ‖H_ij − Ĥ_ij‖²_F on complex blocks.
double loss_mse(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat,
                std::size_t antenna_pairs);
/// Graph version on slice tensors, averaged over `batch` samples.
Tensor loss_mse(const Tensor& predicted, const Tensor& target, std::size_t batch, std::size_t antenna_pairs);

} // namespace weicsip::predictor
