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

#include "weicsip/predictor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "weicsip/dataset.hpp"
#include "weicsip/error.hpp"
#include "weicsip/ops.hpp"

namespace weicsip::predictor {

namespace fs = std::filesystem;
using numerics::Shape;

std::string to_string(MethodKind k) {
    switch (k) {
    case MethodKind::rswoei: return "RSWOEI";
    case MethodKind::rswei: return "RSWEI";
    case MethodKind::dwoei: return "DWOEI";
    case MethodKind::wei_csip: return "WEI-CSIP";
    }
    return "?";
}

MethodKind parse_method(const std::string& name) {
    std::string up;
    for (char ch : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    for (auto k : all_methods)
        if (to_string(k) == up) return k;
    if (up == "WEICSIP" || up == "WEI_CSIP") return MethodKind::wei_csip;
    throw Error(ErrorCode::invalid_argument, "method",
                "unknown method '" + name + "' (expected RSWOEI, RSWEI, DWOEI or WEI-CSIP)");
}

void PredictorConfig::validate() const {
    require(n_t >= 1 && n_c >= 1 && m_t >= 1 && n_r >= 1, ErrorCode::invalid_argument, "model.grid",
            "grid extents must be positive");
    require(n_pilots >= 1 && n_pilots <= cells(), ErrorCode::invalid_argument, "model.n_pilots",
            "must lie in [1, n_t·n_c]");
    require(unroll >= 1, ErrorCode::invalid_argument, "model.unroll", "at least one proximal iteration is required");
    require(feature_channels.size() == 3, ErrorCode::invalid_argument, "model.feature_channels",
            "the feature extractor has exactly three conv layers");
    for (auto c : feature_channels)
        require(c >= 1, ErrorCode::invalid_argument, "model.feature_channels", "channel counts must be positive");
    require(feature_kernel % 2 == 1 && prox_kernel % 2 == 1 && head_kernel % 2 == 1, ErrorCode::invalid_argument,
            "model.kernel", "kernel sizes must be odd");
    require(feature_stride >= 1 && pool >= 1, ErrorCode::invalid_argument, "model.pool", "stride and pool must be positive");
    require(head_hidden >= 1, ErrorCode::invalid_argument, "model.head_hidden", "must be positive");
    require(leaky_slope >= 0.0 && leaky_slope < 1.0, ErrorCode::invalid_argument, "model.leaky_slope", "must lie in [0,1)");
    require(tau > 0.0, ErrorCode::invalid_argument, "model.tau", "must be positive");
}

nlohmann::json to_json(const PredictorConfig& c) {
    return {{"n_t", c.n_t},
            {"n_c", c.n_c},
            {"m_t", c.m_t},
            {"n_r", c.n_r},
            {"n_pilots", c.n_pilots},
            {"view_count", c.view_count},
            {"view_width", c.view_width},
            {"view_height", c.view_height},
            {"feature_channels", c.feature_channels},
            {"feature_kernel", c.feature_kernel},
            {"feature_stride", c.feature_stride},
            {"feature_padding", c.feature_padding},
            {"pool", c.pool},
            {"unroll", c.unroll},
            {"prox_kernel", c.prox_kernel},
            {"head_hidden", c.head_hidden},
            {"head_kernel", c.head_kernel},
            {"head_residual", c.head_residual},
            {"leaky_slope", c.leaky_slope},
            {"tau", c.tau}};
}

PredictorConfig predictor_config_from_json(const nlohmann::json& j) {
    PredictorConfig c;
    c.n_t = j.value("n_t", c.n_t);
    c.n_c = j.value("n_c", c.n_c);
    c.m_t = j.value("m_t", c.m_t);
    c.n_r = j.value("n_r", c.n_r);
    c.n_pilots = j.value("n_pilots", c.n_pilots);
    c.view_count = j.value("view_count", c.view_count);
    c.view_width = j.value("view_width", c.view_width);
    c.view_height = j.value("view_height", c.view_height);
    c.feature_channels = j.value("feature_channels", c.feature_channels);
    c.feature_kernel = j.value("feature_kernel", c.feature_kernel);
    c.feature_stride = j.value("feature_stride", c.feature_stride);
    c.feature_padding = j.value("feature_padding", c.feature_padding);
    c.pool = j.value("pool", c.pool);
    c.unroll = j.value("unroll", c.unroll);
    c.prox_kernel = j.value("prox_kernel", c.prox_kernel);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.head_kernel = j.value("head_kernel", c.head_kernel);
    c.head_residual = j.value("head_residual", c.head_residual);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.tau = j.value("tau", c.tau);
    c.validate();
    return c;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < feature_w.size(); ++i) {
        out.emplace_back("feature.conv" + std::to_string(i) + ".weight", feature_w[i]);
        out.emplace_back("feature.conv" + std::to_string(i) + ".bias", feature_b[i]);
    }
    for (std::size_t k = 0; k < prox_w.size(); ++k) {
        out.emplace_back("prox" + std::to_string(k) + ".weight", prox_w[k]);
        out.emplace_back("prox" + std::to_string(k) + ".bias", prox_b[k]);
        out.emplace_back("alpha" + std::to_string(k), alpha[k]);
    }
    out.emplace_back("head.conv0.weight", head_w1);
    out.emplace_back("head.conv0.bias", head_b1);
    out.emplace_back("head.conv1.weight", head_w2);
    out.emplace_back("head.conv1.bias", head_b2);
    if (logits.defined()) out.emplace_back("dps.logits", logits);
    return out;
}

std::size_t ModelParams::count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named()) n += t.numel();
    return n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) { return derive_seed(seed, tag); }

Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(numerics::shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor conv_weight(std::size_t out, std::size_t in, std::size_t k, double gain, std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in * k * k);
    return uniform_param({out, in, k, k}, gain * std::sqrt(3.0 / fan_in), rng);
}

// Identity on channel c plus small Gaussian noise.
Tensor near_identity(std::size_t channels, std::size_t k, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> v(channels * channels * k * k);
    for (auto& x : v) x = noise(rng);
    for (std::size_t c = 0; c < channels; ++c) v[((c * channels + c) * k + k / 2) * k + k / 2] += 1.0;
    return Tensor::from({channels, channels, k, k}, std::move(v), true);
}

} // namespace

Model::Model(PredictorConfig config, MethodKind kind, std::uint64_t seed)
    : config_(std::move(config)), kind_(kind), seed_(seed) {
    config_.validate();
    const double relu_gain = std::sqrt(2.0 / (1.0 + config_.leaky_slope * config_.leaky_slope));

    // Shared stages draw from the same stream for every method kind, so
    // methods with equal seeds start from the same predictor weights.
    // Only methods with the environment branch own a feature extractor.
    if (uses_environment(kind_)) {
        std::mt19937_64 feature_rng(substream(seed, 1));
        std::size_t in = 1;
        for (auto c : config_.feature_channels) {
            params_.feature_w.push_back(conv_weight(c, in, config_.feature_kernel, relu_gain, feature_rng));
            params_.feature_b.push_back(Tensor::zeros({c}, true));
            in = c;
        }
    }

    std::mt19937_64 pred_rng(substream(seed, 2));
    for (std::size_t k = 0; k < config_.unroll; ++k) {
        params_.prox_w.push_back(near_identity(2, config_.prox_kernel, pred_rng));
        params_.prox_b.push_back(Tensor::zeros({2}, true));
        params_.alpha.push_back(Tensor::scalar(1.0, true));
    }
    const std::size_t head_in = 2 + config_.feature_out();
    params_.head_w1 = conv_weight(config_.head_hidden, head_in, config_.head_kernel, relu_gain, pred_rng);
    params_.head_b1 = Tensor::zeros({config_.head_hidden}, true);
    params_.head_w2 = conv_weight(2, config_.head_hidden, config_.head_kernel, 1.0, pred_rng);
    params_.head_b2 = Tensor::zeros({2}, true);

    if (uses_dps(kind_)) {
        params_.logits = Tensor::from({config_.n_pilots, config_.cells()},
                                      sampler::init_logits(config_.n_pilots, config_.cells(), substream(seed, 3)), true);
    } else {
        random_pattern_ = sampler::random_pattern(config_.n_pilots, config_.n_t, config_.n_c, substream(seed, 4));
    }
}

std::vector<numerics::ParamGroup> Model::param_groups(double lr_feature, double lr_dps, double lr_predictor) const {
    std::vector<numerics::ParamGroup> groups;
    if (uses_environment(kind_)) {
        numerics::ParamGroup g{"feature", lr_feature, {}};
        for (std::size_t i = 0; i < params_.feature_w.size(); ++i) {
            g.params.push_back(params_.feature_w[i]);
            g.params.push_back(params_.feature_b[i]);
        }
        groups.push_back(std::move(g));
    }
    if (uses_dps(kind_)) groups.push_back({"dps", lr_dps, {params_.logits}});
    numerics::ParamGroup g{"predictor", lr_predictor, {}};
    for (std::size_t k = 0; k < params_.prox_w.size(); ++k) {
        g.params.push_back(params_.prox_w[k]);
        g.params.push_back(params_.prox_b[k]);
        g.params.push_back(params_.alpha[k]);
    }
    for (const auto& t : {params_.head_w1, params_.head_b1, params_.head_w2, params_.head_b2}) g.params.push_back(t);
    groups.push_back(std::move(g));
    return groups;
}

sampler::PilotPattern Model::pattern() const {
    if (!uses_dps(kind_)) return random_pattern_;
    return sampler::dps_sample(params_.logits.data(), config_.n_pilots, config_.n_t, config_.n_c, config_.tau,
                               sampler::Mode::eval, nullptr);
}

void Model::set_random_pattern(sampler::PilotPattern p) {
    require(!uses_dps(kind_), ErrorCode::invalid_argument, "pattern", "DPS methods derive their pattern from logits");
    require(p.rows == config_.n_t && p.cols == config_.n_c && p.n_pilots == config_.n_pilots && p.count() == p.n_pilots,
            ErrorCode::shape_mismatch, "pattern", "pattern does not match the model grid");
    random_pattern_ = std::move(p);
}

Tensor Model::mask_tensor(const sampler::PilotPattern& pattern) const {
    const auto expected = uses_dps(kind_) ? sampler::Origin::dps : sampler::Origin::random;
    require(pattern.origin == expected, ErrorCode::invalid_argument, "pattern",
            to_string(kind_) + " expects a " + (uses_dps(kind_) ? "DPS" : "random") + " pilot pattern");
    require(pattern.rows == config_.n_t && pattern.cols == config_.n_c, ErrorCode::shape_mismatch, "pattern",
            "pattern grid does not match the model");
    return Tensor::from({config_.n_t, config_.n_c}, pattern.mask_values());
}

Tensor Model::sample_mask(sampler::Mode mode, std::mt19937_64* rng, sampler::PilotPattern& used) const {
    if (uses_dps(kind_))
        return sampler::dps_mask(params_.logits, config_.n_t, config_.n_c, config_.tau, mode, rng, used);
    used = random_pattern_;
    return mask_tensor(used);
}

Tensor Model::conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) const {
    return numerics::conv2d(x, w, b, stride, pad);
}

Tensor Model::extract_features_raw(const Tensor& images) const {
    require(uses_environment(kind_), ErrorCode::invalid_argument, "method",
            to_string(kind_) + " has no environment branch");
    require(images.rank() == 4 && images.dim(1) == 1 && images.dim(2) == config_.view_height &&
                images.dim(3) == config_.image_width(),
            ErrorCode::shape_mismatch, "image",
            "expected B×1×" + std::to_string(config_.view_height) + "×" + std::to_string(config_.image_width()) +
                ", got " + numerics::shape_str(images.shape()));
    Tensor x = images;
    for (std::size_t i = 0; i < params_.feature_w.size(); ++i) {
        x = conv(x, params_.feature_w[i], params_.feature_b[i], i == 0 ? config_.feature_stride : 1,
                 config_.feature_padding);
        x = numerics::leaky_relu(x, config_.leaky_slope);
    }
    return numerics::max_pool2d(x, config_.pool, config_.pool);
}

Tensor Model::extract_features(const Tensor& images) const {
    return numerics::resize_bilinear(extract_features_raw(images), config_.n_t, config_.n_c);
}

Tensor Model::proximal_unroll(const Tensor& h_partial, const Tensor& mask) const {
    require(h_partial.rank() == 4 && h_partial.dim(1) == 2 && h_partial.dim(2) == config_.n_t &&
                h_partial.dim(3) == config_.n_c,
            ErrorCode::shape_mismatch, "H_partial",
            "expected N×2×" + std::to_string(config_.n_t) + "×" + std::to_string(config_.n_c) + ", got " +
                numerics::shape_str(h_partial.shape()));
    const std::size_t pad = config_.prox_kernel / 2;
    Tensor x;
    for (std::size_t k = 0; k < config_.unroll; ++k) {
        Tensor s = k == 0 ? numerics::scale_by(h_partial, params_.alpha[0])
                          : numerics::add(x, numerics::scale_by(numerics::sub(h_partial, numerics::mask_planes(x, mask)),
                                                                params_.alpha[k]));
        x = conv(s, params_.prox_w[k], params_.prox_b[k], 1, pad);
    }
    return x;
}

Tensor Model::predict(const Tensor& h_partial, const Tensor& mask, const Tensor& images) const {
    require(h_partial.rank() == 4 && h_partial.dim(0) % config_.pairs() == 0, ErrorCode::shape_mismatch, "H_partial",
            "batch axis must be a multiple of the antenna-pair count");
    const std::size_t batch = h_partial.dim(0) / config_.pairs();
    const Tensor x = proximal_unroll(h_partial, mask);

    // The first head conv acts on concat(X, features). It is evaluated as
    // conv(X, W_x) + conv(features, W_f): the feature term is shared by all
    // antenna pairs of a sample, so it is computed once per sample.
    const std::size_t pad = config_.head_kernel / 2;
    const Tensor w_x = numerics::slice_channels(params_.head_w1, 0, 2);
    Tensor z = conv(x, w_x, params_.head_b1, 1, pad);
    if (uses_environment(kind_)) {
        require(images.defined() && images.dim(0) == batch, ErrorCode::shape_mismatch, "image",
                "need one panorama per sample");
        const Tensor w_f = numerics::slice_channels(params_.head_w1, 2, 2 + config_.feature_out());
        const Tensor f = conv(extract_features(images), w_f, Tensor(), 1, pad);
        z = numerics::add(z, numerics::repeat_samples(f, config_.pairs()));
    }
    z = numerics::leaky_relu(z, config_.leaky_slope);
    z = conv(z, params_.head_w2, params_.head_b2, 1, pad);
    return config_.head_residual ? numerics::add(z, x) : z;
}

Tensor Model::forward(const Tensor& h_full, const Tensor& images, sampler::Mode mode, std::mt19937_64* rng,
                      sampler::PilotPattern* used) const {
    sampler::PilotPattern pattern;
    const Tensor mask = sample_mask(mode, rng, pattern);
    if (used) *used = pattern;
    return predict(numerics::mask_planes(h_full, mask), mask, images);
}

void Model::save(const fs::path& dir, const nlohmann::json& extra) const {
    fs::create_directories(dir);
    std::vector<double> blob;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : params_.named()) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}});
        blob.insert(blob.end(), t.data().begin(), t.data().end());
    }
    channel::write_blob(dir / "params.bin", blob);
    nlohmann::json manifest = {{"format", "weicsip-checkpoint/1"},
                               {"method", to_string(kind_)},
                               {"seed", seed_},
                               {"config", to_json(config_)},
                               {"tensors", tensors},
                               {"param_count", blob.size()},
                               {"pattern", sampler::to_json(pattern())},
                               {"blobs", {{"params", "params.bin"}}}};
    for (auto it = extra.begin(); extra.is_object() && it != extra.end(); ++it) manifest[it.key()] = it.value();
    std::ofstream out(dir / "checkpoint.json");
    out << manifest.dump(2) << "\n";
    require(static_cast<bool>(out), ErrorCode::io, (dir / "checkpoint.json").string(), "write failed");
}

Model Model::load(const fs::path& dir, nlohmann::json* extra) {
    std::ifstream in(dir / "checkpoint.json");
    require(static_cast<bool>(in), ErrorCode::io, (dir / "checkpoint.json").string(), "cannot open checkpoint");
    try {
        nlohmann::json m;
        in >> m;
        require(m.at("format").get<std::string>() == "weicsip-checkpoint/1", ErrorCode::schema, "format",
                "unsupported checkpoint format");
        Model model(predictor_config_from_json(m.at("config")), parse_method(m.at("method").get<std::string>()),
                    m.at("seed").get<std::uint64_t>());
        const auto blob = channel::read_blob(dir / "params.bin", m.at("param_count").get<std::size_t>());
        auto named = model.params_.named();
        const auto& tensors = m.at("tensors");
        require(tensors.size() == named.size(), ErrorCode::schema, "tensors", "parameter list does not match the model");
        for (std::size_t i = 0; i < named.size(); ++i) {
            const auto& entry = tensors[i];
            auto& [name, t] = named[i];
            require(entry.at("name").get<std::string>() == name, ErrorCode::schema, "tensors",
                    "expected '" + name + "' at position " + std::to_string(i));
            require(entry.at("shape").get<Shape>() == t.shape(), ErrorCode::schema, name, "shape differs from config");
            const auto offset = entry.at("offset").get<std::size_t>();
            require(offset + t.numel() <= blob.size(), ErrorCode::schema, name, "blob too short");
            std::copy_n(blob.begin() + static_cast<long>(offset), t.numel(), t.data().begin());
        }
        if (!uses_dps(model.kind_)) model.set_random_pattern(sampler::pattern_from_json(m.at("pattern")));
        if (extra) *extra = m;
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "checkpoint", e.what());
    }
}

std::vector<double> to_slices(std::span<const std::complex<double>> block, std::size_t n_t, std::size_t n_c,
                              std::size_t m_t, std::size_t n_r) {
    require(block.size() == n_t * n_c * m_t * n_r, ErrorCode::shape_mismatch, "csi", "block size does not match grid");
    const std::size_t cells = n_t * n_c, pairs = m_t * n_r;
    std::vector<double> out(pairs * 2 * cells);
    for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t a = 0; a < pairs; ++a) {
            const auto v = block[cell * pairs + a];
            out[(a * 2) * cells + cell] = v.real();
            out[(a * 2 + 1) * cells + cell] = v.imag();
        }
    return out;
}

std::vector<std::complex<double>> from_slices(std::span<const double> slices, std::size_t n_t, std::size_t n_c,
                                              std::size_t m_t, std::size_t n_r) {
    const std::size_t cells = n_t * n_c, pairs = m_t * n_r;
    require(slices.size() == pairs * 2 * cells, ErrorCode::shape_mismatch, "slices", "size does not match grid");
    std::vector<std::complex<double>> out(cells * pairs);
    for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t a = 0; a < pairs; ++a)
            out[cell * pairs + a] = {slices[(a * 2) * cells + cell], slices[(a * 2 + 1) * cells + cell]};
    return out;
}

double loss_mse(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat,
                std::size_t antenna_pairs) {
    require(h.size() == h_hat.size(), ErrorCode::shape_mismatch, "H_hat", "shape differs from H");
    require(antenna_pairs >= 1, ErrorCode::invalid_argument, "antenna_pairs", "must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += std::norm(h[i] - h_hat[i]);
    return acc / static_cast<double>(antenna_pairs);
}

Tensor loss_mse(const Tensor& predicted, const Tensor& target, std::size_t batch, std::size_t antenna_pairs) {
    return numerics::scale(numerics::squared_error(predicted, target),
                           1.0 / static_cast<double>(batch * antenna_pairs));
}

} // namespace weicsip::predictor
