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

#include "weicsip/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "weicsip/error.hpp"

namespace weicsip::numerics {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::span<double> Node::grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
}

namespace {

thread_local bool grad_disabled = false;

void check_shape(const Shape& shape) {
    for (std::size_t i = 0; i < shape.size(); ++i)
        require(shape[i] > 0, ErrorCode::shape_mismatch, "dim" + std::to_string(i),
                "extents must be positive, got " + shape_str(shape));
}

} // namespace

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }
bool NoGradGuard::active() { return grad_disabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    auto node = std::make_shared<Node>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    require(values.size() == shape_numel(shape), ErrorCode::shape_mismatch, "data",
            "expected " + std::to_string(shape_numel(shape)) + " values for shape " + shape_str(shape) +
                ", got " + std::to_string(values.size()));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           BackwardFn backward) {
    Tensor out = from(std::move(shape), std::move(values));
    if (grad_disabled) return out;
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (any) {
        out.node_->requires_grad = true;
        for (auto& p : parents) out.node_->parents.push_back(p.node_);
        out.node_->backward = std::move(backward);
    }
    return out;
}


std::size_t Tensor::dim(std::size_t axis) const {
    require(axis < rank(), ErrorCode::shape_mismatch, "axis", "axis out of range");
    return node_->shape[axis];
}


double Tensor::item() const {
    require(numel() == 1, ErrorCode::shape_mismatch, "item", "tensor is not a scalar");
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::grad_mut() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::reshape(Shape shape) const {
    require(shape_numel(shape) == numel(), ErrorCode::shape_mismatch, "reshape",
            "cannot view " + shape_str(this->shape()) + " as " + shape_str(shape));
    return make_result(std::move(shape), node_->data, {*this}, [](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor Tensor::detach() const { return from(shape(), node_->data); }

void backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, ErrorCode::shape_mismatch, "loss",
            "backward requires a scalar loss");
    Node* root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS; `order` ends up topologically sorted with the
    // root last.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward) continue;
        node->grad_buffer();
        node->backward(*node);
    }
    // Interior gradients are not needed once propagated.
    for (Node* node : order)
        if (node->backward) std::vector<double>().swap(node->grad);
}

} // namespace weicsip::numerics
