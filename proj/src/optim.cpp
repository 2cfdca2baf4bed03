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

#include "weicsip/optim.hpp"

#include <cmath>

#include "weicsip/error.hpp"

namespace weicsip::numerics {

Adam::Adam(std::vector<ParamGroup> groups, Options options) : groups_(std::move(groups)), options_(options) {
    std::size_t total = 0;
    for (const auto& g : groups_) {
        require(g.lr >= 0.0 && std::isfinite(g.lr), ErrorCode::invalid_argument, g.name, "learning rate must be finite and ≥ 0");
        for (const auto& p : g.params) total += p.numel();
    }
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
}

void Adam::step() {
    for (const auto& g : groups_)
        for (const auto& p : g.params)
            for (double d : p.grad())
                require(std::isfinite(d), ErrorCode::numerical, g.name, "non-finite gradient");

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(options_.beta1, t);
    const double c2 = 1.0 - std::pow(options_.beta2, t);
    std::size_t offset = 0;
    for (auto& g : groups_)
        for (auto& p : g.params) {
            auto values = p.data();
            auto grad = p.grad();
            for (std::size_t i = 0; i < values.size(); ++i, ++offset) {
                const double d = grad.empty() ? 0.0 : grad[i];
                m_[offset] = options_.beta1 * m_[offset] + (1.0 - options_.beta1) * d;
                v_[offset] = options_.beta2 * v_[offset] + (1.0 - options_.beta2) * d * d;
                const double mhat = m_[offset] / c1;
                const double vhat = v_[offset] / c2;
                values[i] -= g.lr * mhat / (std::sqrt(vhat) + options_.eps);
            }
        }
}

void Adam::zero_grad() {
    for (auto& g : groups_)
        for (auto& p : g.params) p.zero_grad();
}

GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double eps, double floor) {
    require(eps >= 1e-7 && eps <= 1e-4, ErrorCode::invalid_argument, "eps", "finite-difference step must lie in [1e-7, 1e-4]");
    for (auto& p : params) p.zero_grad();
    backward(loss());

    GradCheckResult worst;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        std::vector<double> analytic(p.numel(), 0.0);
        if (!p.grad().empty()) analytic.assign(p.grad().begin(), p.grad().end());
        auto values = p.data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = loss().item();
            values[i] = saved - eps;
            const double down = loss().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            const double rel = std::abs(analytic[i] - numeric) / denom;
            if (rel >= worst.max_rel_error) worst = {rel, pi, i, analytic[i], numeric};
        }
    }
    return worst;
}

} // namespace weicsip::numerics
