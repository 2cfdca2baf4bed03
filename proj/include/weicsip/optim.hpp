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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "weicsip/tensor.hpp"

namespace weicsip::numerics {

struct ParamGroup {
    std::string name;
    double lr = 1e-3;
    std::vector<Tensor> params;
};

/// Adaptive-moment optimizer with bias correction, one learning rate per
/// parameter group.
class Adam {
public:
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(std::vector<ParamGroup> groups) : Adam(std::move(groups), Options{}) {}
    Adam(std::vector<ParamGroup> groups, Options options);

    /// Applies one update from the accumulated gradients. Throws naming the
    /// group when a gradient is non-finite; nothing is updated in that case.
    void step();
    void zero_grad();

    std::size_t steps() const { return steps_; }
    const std::vector<ParamGroup>& groups() const { return groups_; }
    const Options& options() const { return options_; }

    /// Moment buffers, flattened in group/parameter order (for checkpoints).
    std::vector<double>& first_moments() { return m_; }
    std::vector<double>& second_moments() { return v_; }
    void set_steps(std::size_t s) { steps_ = s; }

private:
    std::vector<ParamGroup> groups_;
    Options options_;
    std::vector<double> m_, v_;
    std::size_t steps_ = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t param_index = 0;   // index into the parameter list
    std::size_t element_index = 0; // flat index inside that parameter
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares analytic gradients of `loss` w.r.t. `params` against central
/// finite differences with step `eps`. The relative error of an element is
/// |a − n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double eps,
                           double floor = 1e-8);

} // namespace weicsip::numerics
