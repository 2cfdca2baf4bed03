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
#include <optional>
#include <span>

#include "weicsip/tensor.hpp"

namespace weicsip::numerics {

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// `alpha` is a single-element tensor multiplying every entry of `x`.
Tensor scale_by(const Tensor& x, const Tensor& alpha);

Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);
/// Σ (a − b)², both shapes equal.
Tensor squared_error(const Tensor& a, const Tensor& b);

Tensor leaky_relu(const Tensor& x, double slope);

/// 2-D convolution (cross-correlation). `input` is C×H×W or N×C×H×W,
/// `kernel` is O×C×k×k, `bias` has O entries (pass an undefined tensor for no
/// bias).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Windowed maximum over the trailing two axes. Ties route the gradient to
/// the first maximum in row-major scan order.
Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride);

/// Bilinear resampling of the trailing two axes with half-pixel centres.
Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);

/// Concatenates two N×C×H×W tensors along C.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Channels [begin, end) of an N×C×H×W tensor.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end);

/// N×C×H×W → (N·times)×C×H×W, sample n repeated in rows n·times … n·times+times−1.
Tensor repeat_samples(const Tensor& x, std::size_t times);

/// Multiplies every H×W plane of `x` by `mask` (H×W, or H·W entries).
Tensor mask_planes(const Tensor& x, const Tensor& mask);

/// Temperature softmax over a vector, max-subtracted.
Tensor softmax_tau(const Tensor& logits, double tau);

/// Plain softmax_τ values, no graph; shared by the sampler.
void softmax_tau_into(std::span<const double> logits, double tau, std::span<double> out);

} // namespace weicsip::numerics
