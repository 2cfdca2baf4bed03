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
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace weicsip::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;

/// Backward rule of an operation. Reads `self.grad` and accumulates into the
/// parents' gradients.
using BackwardFn = std::function<void(Node& self)>;

/// One value in the computation graph. Leaves have no parents and no rule.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;

    std::span<double> grad_buffer(); // allocates zeros on first use
};

/// Dense row-major double tensor with reverse-mode autodiff.
///
/// Copies share storage. Operations return new tensors that remember their
/// parents when any input requires a gradient; otherwise no graph is kept.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    /// Builds an operation result. `parents` that do not require gradients are
    /// dropped; when none remain the rule is discarded.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<Tensor> parents, BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    /// Empty span when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    /// Same values, different shape (numel must agree). Gradients flow.
    Tensor reshape(Shape shape) const;
    /// Copy of the values with no graph history.
    Tensor detach() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

/// While alive, operations on this thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool active();

private:
    bool previous_;
};

/// Runs reverse-mode differentiation from a scalar loss. Every node reachable
/// through gradient-requiring edges is visited exactly once, in reverse
/// topological order; gradients accumulate additively.
void backward(const Tensor& loss);

} // namespace weicsip::numerics
