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

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "weicsip/error.hpp"
#include "weicsip/ops.hpp"
#include "weicsip/optim.hpp"

using namespace weicsip;
using namespace weicsip::numerics;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool grad = true) {
    const std::size_t n = shape_numel(shape);
    return Tensor::from(std::move(shape), oracle::random_values(n, rng), grad);
}

// Weighted sum so every output element carries a distinct upstream gradient.
Tensor probe(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

double check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
    return grad_check(f, std::move(params), 1e-6).max_rel_error;
}

} // namespace

TEST_CASE("conv2d matches the nested-loop oracle exactly") {
    std::mt19937_64 rng(3);
    struct Case {
        std::size_t n, c, h, w, o, k, stride, pad;
        bool bias;
    };
    for (const Case cs : {Case{1, 1, 5, 5, 1, 3, 1, 0, false}, Case{2, 3, 7, 9, 4, 3, 1, 1, true},
                          Case{3, 2, 8, 6, 5, 3, 2, 1, true}, Case{1, 4, 6, 11, 2, 5, 2, 2, false},
                          Case{2, 2, 4, 4, 3, 1, 1, 0, true}, Case{40, 2, 3, 24, 2, 3, 1, 1, true},
                          Case{1, 1, 9, 5, 2, 2, 3, 0, true}, Case{3, 5, 9, 13, 8, 3, 2, 1, true},
                          Case{2, 16, 3, 24, 2, 3, 1, 1, true}, Case{2, 3, 10, 12, 6, 3, 1, 1, false}}) {
        CAPTURE(cs.c);
        CAPTURE(cs.k);
        const auto x = oracle::random_values(cs.n * cs.c * cs.h * cs.w, rng);
        const auto k = oracle::random_values(cs.o * cs.c * cs.k * cs.k, rng);
        const auto b = oracle::random_values(cs.o, rng);
        std::size_t oh = 0, ow = 0;
        const auto expect = oracle::conv2d(x, cs.n, cs.c, cs.h, cs.w, k, cs.o, cs.k, cs.bias ? &b : nullptr, cs.stride,
                                           cs.pad, oh, ow);
        const Tensor y = conv2d(Tensor::from({cs.n, cs.c, cs.h, cs.w}, x), Tensor::from({cs.o, cs.c, cs.k, cs.k}, k),
                                cs.bias ? Tensor::from({cs.o}, b) : Tensor(), cs.stride, cs.pad);
        REQUIRE(y.shape() == Shape{cs.n, cs.o, oh, ow});
        double worst = 0.0;
        for (std::size_t i = 0; i < expect.size(); ++i) worst = std::max(worst, std::abs(y.data()[i] - expect[i]));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("conv2d accepts a single C×H×W image") {
    const Tensor x = Tensor::full({1, 3, 3}, 1.0);
    const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor y = conv2d(x, k, Tensor(), 1, 1);
    REQUIRE(y.shape() == Shape{1, 3, 3});
    CHECK(y.data()[4] == 9.0);
    CHECK(y.data()[0] == 4.0);
}

TEST_CASE("conv2d shape errors name the dimension") {
    const Tensor x = Tensor::zeros({1, 2, 4, 4});
    try {
        conv2d(x, Tensor::zeros({1, 3, 3, 3}), Tensor(), 1, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::shape_mismatch);
        CHECK(e.field() == "conv2d.channels");
    }
    try {
        conv2d(Tensor::zeros({1, 2, 2, 8}), Tensor::zeros({1, 2, 5, 5}), Tensor(), 1, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.field() == "conv2d.height");
    }
}

TEST_CASE("max_pool2d matches the oracle and routes ties to the first maximum") {
    std::mt19937_64 rng(5);
    const auto x = oracle::random_values(2 * 3 * 8 * 10, rng);
    std::size_t oh = 0, ow = 0;
    const auto expect = oracle::max_pool(x, 6, 8, 10, 2, 2, oh, ow);
    const Tensor y = max_pool2d(Tensor::from({2, 3, 8, 10}, x), 2, 2);
    REQUIRE(y.shape() == Shape{2, 3, oh, ow});
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == expect[i]);

    Tensor t = Tensor::full({1, 1, 2, 2}, 1.0, true);
    backward(sum(max_pool2d(t, 2, 2)));
    CHECK(t.grad()[0] == 1.0);
    CHECK(t.grad()[1] == 0.0);
    CHECK(t.grad()[2] == 0.0);
    CHECK(t.grad()[3] == 0.0);

    try {
        max_pool2d(Tensor::zeros({1, 1, 1, 4}), 2, 2);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.field() == "max_pool2d.height");
    }
}

TEST_CASE("resize_bilinear matches the half-pixel oracle") {
    std::mt19937_64 rng(8);
    const auto x = oracle::random_values(2 * 5 * 7, rng);
    for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{3, 24}, {5, 7}, {10, 3}, {1, 1}}) {
        const auto expect = oracle::resize_bilinear(x, 2, 5, 7, oh, ow);
        const Tensor y = resize_bilinear(Tensor::from({1, 2, 5, 7}, x), oh, ow);
        REQUIRE(y.numel() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-14));
    }
    // Same size is the identity.
    const Tensor same = resize_bilinear(Tensor::from({1, 2, 5, 7}, x), 5, 7);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same.data()[i] == x[i]);
}

TEST_CASE("softmax_tau reference values") {
    const Tensor p = softmax_tau(Tensor::from({2}, {2.0, 0.0}), 2.0);
    CHECK(p.data()[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p.data()[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    // Large logits do not overflow.
    const Tensor q = softmax_tau(Tensor::from({3}, {1000.0, 1000.0, -1000.0}), 1.0);
    CHECK(q.data()[0] == doctest::Approx(0.5));
    CHECK(q.data()[2] == 0.0);
    // Masked entries get probability zero.
    std::vector<double> out(3);
    softmax_tau_into(std::vector<double>{1.0, -INFINITY, 1.0}, 2.0, out);
    CHECK(out[1] == 0.0);
    CHECK(out[0] == doctest::Approx(0.5));
}

TEST_CASE("leaky_relu uses the slope as the subgradient at zero") {
    Tensor x = Tensor::from({3}, {-2.0, 0.0, 3.0}, true);
    const Tensor y = leaky_relu(x, 0.1);
    CHECK(y.data()[0] == doctest::Approx(-0.2));
    CHECK(y.data()[1] == 0.0);
    CHECK(y.data()[2] == 3.0);
    backward(sum(y));
    CHECK(x.grad()[0] == doctest::Approx(0.1));
    CHECK(x.grad()[1] == doctest::Approx(0.1));
    CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("finite-difference gradients of every differentiable operation") {
    std::mt19937_64 rng(11);
    const double tol = 1e-4;

    SUBCASE("elementwise and reductions") {
        Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng), w = random_tensor({2, 3}, rng, false);
        Tensor alpha = Tensor::from({1}, {0.7}, true);
        CHECK(check([&] { return probe(add(a, b), w); }, {a, b}) < tol);
        CHECK(check([&] { return probe(sub(a, b), w); }, {a, b}) < tol);
        CHECK(check([&] { return probe(mul(a, b), w); }, {a, b}) < tol);
        CHECK(check([&] { return probe(scale(a, -1.5), w); }, {a}) < tol);
        CHECK(check([&] { return probe(scale_by(a, alpha), w); }, {a, alpha}) < tol);
        CHECK(check([&] { return sum_squares(a); }, {a}) < tol);
        CHECK(check([&] { return squared_error(a, b); }, {a, b}) < tol);
        CHECK(check([&] { return probe(a.reshape({3, 2}), w.reshape({3, 2})); }, {a}) < tol);
    }
    SUBCASE("leaky_relu away from the kink") {
        auto v = oracle::random_values(12, rng);
        for (auto& x : v)
            if (std::abs(x) < 0.05) x += 0.1;
        Tensor x = Tensor::from({12}, v, true);
        Tensor w = random_tensor({12}, rng, false);
        CHECK(check([&] { return probe(leaky_relu(x, 0.0005), w); }, {x}) < tol);
        CHECK(check([&] { return probe(leaky_relu(x, 0.2), w); }, {x}) < tol);
    }
    SUBCASE("conv2d with stride, padding and bias") {
        Tensor x = random_tensor({2, 3, 6, 7}, rng);
        Tensor k = random_tensor({4, 3, 3, 3}, rng);
        Tensor b = random_tensor({4}, rng);
        Tensor w1 = random_tensor({2, 4, 6, 7}, rng, false);
        Tensor w2 = random_tensor({2, 4, 3, 4}, rng, false);
        CHECK(check([&] { return probe(conv2d(x, k, b, 1, 1), w1); }, {x, k, b}) < tol);
        CHECK(check([&] { return probe(conv2d(x, k, b, 2, 1), w2); }, {x, k, b}) < tol);
        // Few output channels take the direct path.
        Tensor k2 = random_tensor({2, 3, 3, 3}, rng);
        Tensor b2 = random_tensor({2}, rng);
        Tensor w3 = random_tensor({2, 2, 6, 7}, rng, false);
        Tensor w4 = random_tensor({2, 2, 3, 4}, rng, false);
        CHECK(check([&] { return probe(conv2d(x, k2, b2, 1, 1), w3); }, {x, k2, b2}) < tol);
        CHECK(check([&] { return probe(conv2d(x, k2, b2, 2, 1), w4); }, {x, k2, b2}) < tol);
    }
    SUBCASE("max_pool2d without ties") {
        Tensor x = random_tensor({1, 2, 4, 6}, rng);
        Tensor w = random_tensor({1, 2, 2, 3}, rng, false);
        CHECK(check([&] { return probe(max_pool2d(x, 2, 2), w); }, {x}) < tol);
    }
    SUBCASE("resize, concat, repeat, mask") {
        Tensor x = random_tensor({2, 2, 5, 7}, rng);
        Tensor y = random_tensor({2, 3, 5, 7}, rng);
        Tensor m = random_tensor({5, 7}, rng);
        Tensor w_resize = random_tensor({2, 2, 3, 24}, rng, false);
        Tensor w_cat = random_tensor({2, 5, 5, 7}, rng, false);
        Tensor w_rep = random_tensor({6, 2, 5, 7}, rng, false);
        Tensor w_mask = random_tensor({2, 2, 5, 7}, rng, false);
        CHECK(check([&] { return probe(resize_bilinear(x, 3, 24), w_resize); }, {x}) < tol);
        CHECK(check([&] { return probe(concat_channels(x, y), w_cat); }, {x, y}) < tol);
        CHECK(check([&] { return probe(repeat_samples(x, 3), w_rep); }, {x}) < tol);
        CHECK(check([&] { return probe(mask_planes(x, m), w_mask); }, {x, m}) < tol);
        Tensor w_slice = random_tensor({2, 2, 5, 7}, rng, false);
        CHECK(check([&] { return probe(slice_channels(y, 1, 3), w_slice); }, {y}) < tol);
    }
    SUBCASE("softmax_tau") {
        Tensor z = random_tensor({6}, rng);
        Tensor w = random_tensor({6}, rng, false);
        CHECK(check([&] { return probe(softmax_tau(z, 2.0), w); }, {z}) < tol);
        CHECK(check([&] { return probe(softmax_tau(z, 0.5), w); }, {z}) < tol);
    }
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
    const Tensor y = add(mul(x, x), x); // x² + x
    backward(sum(y));
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    CHECK(x.grad()[1] == doctest::Approx(-3.0));
}

TEST_CASE("no graph is recorded under NoGradGuard") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor y;
    {
        NoGradGuard guard;
        y = mul(x, x);
    }
    CHECK_FALSE(y.requires_grad());
    CHECK_FALSE(NoGradGuard::active());
}

TEST_CASE("backward requires a scalar") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(mul(x, x)), Error);
}

TEST_CASE("Adam: one hand-computed step per group") {
    Tensor a = Tensor::from({2}, {1.0, -1.0}, true);
    Tensor b = Tensor::from({1}, {0.5}, true);
    Adam opt({{"feature", 0.1, {a}}, {"dps", 0.01, {b}}});
    a.grad_mut()[0] = 2.0;
    a.grad_mut()[1] = -0.5;
    b.grad_mut()[0] = 3.0;
    opt.step();
    // First step: m̂ = g, v̂ = g², update = lr · g / (|g| + ε).
    auto step = [](double lr, double g) { return lr * g / (std::abs(g) + 1e-8); };
    CHECK(a.data()[0] == doctest::Approx(1.0 - step(0.1, 2.0)).epsilon(1e-15));
    CHECK(a.data()[1] == doctest::Approx(-1.0 - step(0.1, -0.5)).epsilon(1e-15));
    CHECK(b.data()[0] == doctest::Approx(0.5 - step(0.01, 3.0)).epsilon(1e-15));

    // Second step with a new gradient, bias-corrected moments by hand.
    opt.zero_grad();
    a.grad_mut()[0] = 1.0;
    const double a0 = a.data()[0];
    opt.step();
    const double m = 0.9 * (0.1 * 2.0) + 0.1 * 1.0;
    const double v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK(a.data()[0] == doctest::Approx(a0 - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
    CHECK(opt.steps() == 2);
}

TEST_CASE("Adam rejects non-finite gradients and names the group") {
    Tensor a = Tensor::from({1}, {1.0}, true);
    Adam opt({{"predictor", 0.1, {a}}});
    a.grad_mut()[0] = NAN;
    try {
        opt.step();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::numerical);
        CHECK(std::string(e.what()).find("predictor") != std::string::npos);
    }
    CHECK(a.data()[0] == 1.0);
}

TEST_CASE("grad_check reports a deliberately wrong gradient") {
    Tensor x = Tensor::from({3}, {0.3, -0.2, 0.9}, true);
    // Forward is Σx², backward claims 3x.
    auto wrong = [&] {
        std::vector<double> v(1, 0.0);
        for (double e : x.data()) v[0] += e * e;
        return Tensor::make_result({1}, std::move(v), {x}, [](Node& self) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * self.parents[0]->data[i] * self.grad[0];
        });
    };
    const auto r = grad_check(wrong, {x}, 1e-6);
    CHECK(r.max_rel_error > 0.3);
    CHECK_THROWS_AS(grad_check(wrong, {x}, 1e-2), Error);
}
