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

#include "weicsip/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "weicsip/error.hpp"

namespace weicsip::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Reductions in a fixed order. Eigen's reductions peel up to the first
// aligned packet, which makes the rounding depend on where the buffer landed.
template <class F>
double reduce(std::size_t n, F&& term) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t k = 0; k < 4; ++k) acc[k] += term(i + k);
    for (; i < n; ++i) acc[0] += term(i);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}
double dot(const double* a, const double* b, std::size_t n) {
    return reduce(n, [&](std::size_t i) { return a[i] * b[i]; });
}
double total(const double* a, std::size_t n) {
    return reduce(n, [&](std::size_t i) { return a[i]; });
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorCode::shape_mismatch, op,
            "shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

bool wants_grad(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

// Geometry of an N×C×H×W view of a 3-D or 4-D tensor.
struct Nchw {
    std::size_t n, c, h, w;
};

Nchw as_nchw(const Tensor& t, const char* op) {
    if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
    require(t.rank() == 4, ErrorCode::shape_mismatch, op,
            "expected C×H×W or N×C×H×W, got " + shape_str(t.shape()));
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

struct ConvGeometry {
    std::size_t n, c, h, w;  // input
    std::size_t o, k;        // kernel
    std::size_t stride, pad;
    std::size_t oh, ow;

    std::size_t rows() const { return c * k * k; }
    std::size_t plane() const { return oh * ow; }
};

// Valid output-column range [lo, hi) whose input column ox·stride + kx − pad
// lies inside [0, w).
std::pair<std::size_t, std::size_t> valid_columns(const ConvGeometry& g, std::size_t kx) {
    const long off = static_cast<long>(kx) - static_cast<long>(g.pad);
    const long s = static_cast<long>(g.stride);
    long lo = off >= 0 ? 0 : (-off + s - 1) / s;
    long hi = static_cast<long>(g.w) - 1 - off < 0 ? 0 : (static_cast<long>(g.w) - 1 - off) / s + 1;
    lo = std::min<long>(lo, static_cast<long>(g.ow));
    hi = std::clamp<long>(hi, lo, static_cast<long>(g.ow));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Column matrix for images [n0, n0+count): rows (c,ky,kx), columns (image, oy, ox).
void im2col(const ConvGeometry& g, const double* input, std::size_t n0, std::size_t count, double* cols) {
    const std::size_t width = count * g.plane();
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double* row = cols + ((c * g.k + ky) * g.k + kx) * width;
                const auto [lo, hi] = valid_columns(g, kx);
                const long off = static_cast<long>(kx) - static_cast<long>(g.pad);
                for (std::size_t j = 0; j < count; ++j) {
                    const double* img = input + ((n0 + j) * g.c + c) * g.h * g.w;
                    double* dst = row + j * g.plane();
                    for (std::size_t oy = 0; oy < g.oh; ++oy) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                        double* out = dst + oy * g.ow;
                        if (iy < 0 || iy >= static_cast<long>(g.h)) {
                            std::fill(out, out + g.ow, 0.0);
                            continue;
                        }
                        const double* src = img + static_cast<std::size_t>(iy) * g.w;
                        std::fill(out, out + lo, 0.0);
                        if (g.stride == 1) {
                            std::copy(src + static_cast<long>(lo) + off, src + static_cast<long>(hi) + off, out + lo);
                        } else {
                            for (std::size_t ox = lo; ox < hi; ++ox)
                                out[ox] = src[static_cast<long>(ox * g.stride) + off];
                        }
                        std::fill(out + hi, out + g.ow, 0.0);
                    }
                }
            }
}

void col2im_add(const ConvGeometry& g, const double* cols, std::size_t n0, std::size_t count, double* grad_in) {
    const std::size_t width = count * g.plane();
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* row = cols + ((c * g.k + ky) * g.k + kx) * width;
                const auto [lo, hi] = valid_columns(g, kx);
                const long off = static_cast<long>(kx) - static_cast<long>(g.pad);
                for (std::size_t j = 0; j < count; ++j) {
                    double* img = grad_in + ((n0 + j) * g.c + c) * g.h * g.w;
                    const double* src = row + j * g.plane();
                    for (std::size_t oy = 0; oy < g.oh; ++oy) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                        if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                        double* dst = img + static_cast<std::size_t>(iy) * g.w;
                        const double* s = src + oy * g.ow;
                        for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<long>(ox * g.stride) + off] += s[ox];
                    }
                }
            }
}

// Direct stride-1 convolution for layers with few output channels, where an
// im2col buffer would be mostly memory traffic. Each image is zero-padded to
// Hp×Wp; with output rows laid out at the padded row stride, every kernel tap
// becomes one contiguous shifted multiply-add over the whole plane. Columns
// ox ≥ OW of that layout are scratch and discarded.
struct PaddedPlane {
    std::size_t hp, wp, span; // span = (oh − 1)·wp + ow, the touched extent

    explicit PaddedPlane(const ConvGeometry& g)
        : hp(g.h + 2 * g.pad), wp(g.w + 2 * g.pad), span((g.oh - 1) * (g.w + 2 * g.pad) + g.ow) {}
};

void pad_image(const ConvGeometry& g, const PaddedPlane& pp, const double* src, double* dst) {
    std::fill_n(dst, g.c * pp.hp * pp.wp, 0.0);
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t y = 0; y < g.h; ++y)
            std::copy_n(src + (c * g.h + y) * g.w, g.w, dst + (c * pp.hp + y + g.pad) * pp.wp + g.pad);
}

void direct_forward(const ConvGeometry& g, const double* x, const double* w, const double* bias, double* out) {
    const PaddedPlane pp(g);
    std::vector<double> in_pad(g.c * pp.hp * pp.wp), acc(g.o * pp.span);
    for (std::size_t n = 0; n < g.n; ++n) {
        pad_image(g, pp, x + n * g.c * g.h * g.w, in_pad.data());
        for (std::size_t o = 0; o < g.o; ++o) std::fill_n(acc.data() + o * pp.span, pp.span, bias ? bias[o] : 0.0);
        for (std::size_t c = 0; c < g.c; ++c)
            for (std::size_t ky = 0; ky < g.k; ++ky)
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const double* src = in_pad.data() + c * pp.hp * pp.wp + ky * pp.wp + kx;
                    for (std::size_t o = 0; o < g.o; ++o) {
                        const double wv = w[((o * g.c + c) * g.k + ky) * g.k + kx];
                        double* dst = acc.data() + o * pp.span;
                        for (std::size_t i = 0; i < pp.span; ++i) dst[i] += wv * src[i];
                    }
                }
        for (std::size_t o = 0; o < g.o; ++o)
            for (std::size_t y = 0; y < g.oh; ++y)
                std::copy_n(acc.data() + o * pp.span + y * pp.wp, g.ow, out + ((n * g.o + o) * g.oh + y) * g.ow);
    }
}

void direct_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy, double* gx,
                     double* gw, double* gb) {
    if (gb)
        for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t o = 0; o < g.o; ++o) {
                const double* row = dy + (n * g.o + o) * g.plane();
                gb[o] += total(row, g.plane());
            }
    if (!gx && !gw) return;
    const PaddedPlane pp(g);
    const std::size_t plane_p = pp.hp * pp.wp;
    std::vector<double> in_pad(gw ? g.c * plane_p : 0), gx_pad(gx ? g.c * plane_p : 0), dy_pad(g.o * pp.span, 0.0);
    for (std::size_t n = 0; n < g.n; ++n) {
        // Upstream gradient at the padded row stride, zero in scratch columns.
        for (std::size_t o = 0; o < g.o; ++o)
            for (std::size_t y = 0; y < g.oh; ++y)
                std::copy_n(dy + ((n * g.o + o) * g.oh + y) * g.ow, g.ow, dy_pad.data() + o * pp.span + y * pp.wp);
        if (gw) pad_image(g, pp, x + n * g.c * g.h * g.w, in_pad.data());
        if (gx) std::fill(gx_pad.begin(), gx_pad.end(), 0.0);
        for (std::size_t c = 0; c < g.c; ++c)
            for (std::size_t ky = 0; ky < g.k; ++ky)
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const std::size_t shift = c * plane_p + ky * pp.wp + kx;
                    for (std::size_t o = 0; o < g.o; ++o) {
                        const std::size_t wi = ((o * g.c + c) * g.k + ky) * g.k + kx;
                        const double* d = dy_pad.data() + o * pp.span;
                        if (gw) {
                            const double* src = in_pad.data() + shift;
                            gw[wi] += dot(d, src, pp.span);
                        }
                        if (gx) {
                            double* dst = gx_pad.data() + shift;
                            const double wv = w[wi];
                            for (std::size_t i = 0; i < pp.span; ++i) dst[i] += wv * d[i];
                        }
                    }
                }
        if (gx)
            for (std::size_t c = 0; c < g.c; ++c)
                for (std::size_t y = 0; y < g.h; ++y) {
                    const double* src = gx_pad.data() + (c * pp.hp + y + g.pad) * pp.wp + g.pad;
                    double* dst = gx + ((n * g.c + c) * g.h + y) * g.w;
                    for (std::size_t xx = 0; xx < g.w; ++xx) dst[xx] += src[xx];
                }
    }
}

constexpr std::size_t direct_max_outputs = 4;

std::size_t images_per_chunk(const ConvGeometry& g) {
    constexpr std::size_t target_columns = 1024;
    return std::max<std::size_t>(1, target_columns / g.plane());
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (!wants_grad(self, p)) continue;
            auto g = self.parents[p]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (wants_grad(self, 0)) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
            auto g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& x = self.parents[0]->data;
        const auto& y = self.parents[1]->data;
        if (wants_grad(self, 0)) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
        }
        if (wants_grad(self, 1)) {
            auto g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.numel());
    const double* px = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] * factor;
    return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor scale_by(const Tensor& x, const Tensor& alpha) {
    require(alpha.numel() == 1, ErrorCode::shape_mismatch, "alpha", "scale factor must have one element");
    const double a = alpha.data()[0];
    std::vector<double> out(x.numel());
    const double* px = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] * a;
    return Tensor::make_result(x.shape(), std::move(out), {x, alpha}, [](Node& self) {
        const auto& xv = self.parents[0]->data;
        const double av = self.parents[1]->data[0];
        if (wants_grad(self, 0)) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av;
        }
        if (wants_grad(self, 1)) {
            self.parents[1]->grad_buffer()[0] += dot(self.grad.data(), xv.data(), xv.size());
        }
    });
}

Tensor sum(const Tensor& x) {
    const double acc = total(x.data().data(), x.numel());
    return Tensor::make_result({1}, {acc}, {x}, [](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor sum_squares(const Tensor& x) {
    const double acc = dot(x.data().data(), x.data().data(), x.numel());
    return Tensor::make_result({1}, {acc}, {x}, [](Node& self) {
        const auto& xv = self.parents[0]->data;
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * xv[i] * self.grad[0];
    });
}

Tensor squared_error(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "squared_error");
    const double* x = a.data().data();
    const double* y = b.data().data();
    const double acc = reduce(a.numel(), [&](std::size_t i) { return (x[i] - y[i]) * (x[i] - y[i]); });
    return Tensor::make_result({1}, {acc}, {a, b}, [](Node& self) {
        const auto& x = self.parents[0]->data;
        const auto& y = self.parents[1]->data;
        const double s = 2.0 * self.grad[0];
        if (wants_grad(self, 0)) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * (x[i] - y[i]);
        }
        if (wants_grad(self, 1)) {
            auto g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s * (x[i] - y[i]);
        }
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    require(slope >= 0.0 && slope < 1.0, ErrorCode::invalid_argument, "slope", "must lie in [0,1)");
    std::vector<double> out(x.numel());
    const double* px = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = px[i];
        out[i] = v > 0.0 ? v : slope * v;
    }
    // Subgradient at exactly 0 is `slope`.
    return Tensor::make_result(x.shape(), std::move(out), {x}, [slope](Node& self) {
        const auto& xv = self.parents[0]->data;
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (xv[i] > 0.0 ? 1.0 : slope);
    });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    const Nchw in = as_nchw(input, "conv2d.input");
    require(kernel.rank() == 4, ErrorCode::shape_mismatch, "conv2d.kernel",
            "expected O×C×k×k, got " + shape_str(kernel.shape()));
    require(kernel.dim(1) == in.c, ErrorCode::shape_mismatch, "conv2d.channels",
            "kernel expects " + std::to_string(kernel.dim(1)) + " input channels, input has " +
                std::to_string(in.c));
    require(kernel.dim(2) == kernel.dim(3), ErrorCode::shape_mismatch, "conv2d.kernel",
            "kernel must be square, got " + shape_str(kernel.shape()));
    require(stride >= 1, ErrorCode::invalid_argument, "conv2d.stride", "stride must be at least 1");
    const std::size_t k = kernel.dim(2);
    require(k <= in.h + 2 * padding, ErrorCode::shape_mismatch, "conv2d.height",
            "kernel " + std::to_string(k) + " exceeds padded height " + std::to_string(in.h + 2 * padding));
    require(k <= in.w + 2 * padding, ErrorCode::shape_mismatch, "conv2d.width",
            "kernel " + std::to_string(k) + " exceeds padded width " + std::to_string(in.w + 2 * padding));
    const std::size_t o = kernel.dim(0);
    if (bias.defined())
        require(bias.numel() == o, ErrorCode::shape_mismatch, "conv2d.bias",
                "expected " + std::to_string(o) + " entries, got " + std::to_string(bias.numel()));

    ConvGeometry g{in.n, in.c, in.h, in.w, o, k, stride, padding,
                   (in.h + 2 * padding - k) / stride + 1, (in.w + 2 * padding - k) / stride + 1};

    Shape shape = input.rank() == 3 ? Shape{g.o, g.oh, g.ow} : Shape{g.n, g.o, g.oh, g.ow};
    const bool has_bias = bias.defined();
    std::vector<Tensor> parents{input, kernel};
    if (has_bias) parents.push_back(bias);

    if (g.o <= direct_max_outputs && g.stride == 1) {
        std::vector<double> out(g.n * g.o * g.plane());
        direct_forward(g, input.data().data(), kernel.data().data(), has_bias ? bias.data().data() : nullptr,
                       out.data());
        return Tensor::make_result(std::move(shape), std::move(out), std::move(parents), [g, has_bias](Node& self) {
            double* gx = wants_grad(self, 0) ? self.parents[0]->grad_buffer().data() : nullptr;
            double* gw = wants_grad(self, 1) ? self.parents[1]->grad_buffer().data() : nullptr;
            double* gb = has_bias && wants_grad(self, 2) ? self.parents[2]->grad_buffer().data() : nullptr;
            direct_backward(g, self.parents[0]->data.data(), self.parents[1]->data.data(), self.grad.data(), gx, gw, gb);
        });
    }

    std::vector<double> out(g.n * g.o * g.plane());
    const std::size_t chunk = images_per_chunk(g);
    std::vector<double> cols(g.rows() * std::min(chunk, g.n) * g.plane());
    ConstMapMat wmat(kernel.data().data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.rows()));
    RowMat y;
    for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
        const std::size_t count = std::min(chunk, g.n - n0);
        const auto width = static_cast<Eigen::Index>(count * g.plane());
        im2col(g, input.data().data(), n0, count, cols.data());
        ConstMapMat cmat(cols.data(), static_cast<Eigen::Index>(g.rows()), width);
        y.noalias() = wmat * cmat;
        for (std::size_t j = 0; j < count; ++j)
            for (std::size_t oc = 0; oc < g.o; ++oc) {
                const double b = bias.defined() ? bias.data()[oc] : 0.0;
                const double* src = y.data() + oc * static_cast<std::size_t>(width) + j * g.plane();
                double* dst = out.data() + ((n0 + j) * g.o + oc) * g.plane();
                for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p] + b;
            }
    }

    return Tensor::make_result(std::move(shape), std::move(out), std::move(parents), [g, has_bias](Node& self) {
        const bool need_in = wants_grad(self, 0);
        const bool need_w = wants_grad(self, 1);
        const bool need_b = has_bias && wants_grad(self, 2);
        const double* x = self.parents[0]->data.data();
        ConstMapMat wmat(self.parents[1]->data.data(), static_cast<Eigen::Index>(g.o),
                         static_cast<Eigen::Index>(g.rows()));
        std::span<double> gw = need_w ? self.parents[1]->grad_buffer() : std::span<double>{};
        std::span<double> gb = need_b ? self.parents[2]->grad_buffer() : std::span<double>{};
        std::span<double> gx = need_in ? self.parents[0]->grad_buffer() : std::span<double>{};

        const std::size_t chunk = images_per_chunk(g);
        std::vector<double> cols(g.rows() * std::min(chunk, g.n) * g.plane());
        RowMat dy, dcols;
        RowMat dw = RowMat::Zero(static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.rows()));
        for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
            const std::size_t count = std::min(chunk, g.n - n0);
            const auto width = static_cast<Eigen::Index>(count * g.plane());
            dy.resize(static_cast<Eigen::Index>(g.o), width);
            for (std::size_t j = 0; j < count; ++j)
                for (std::size_t oc = 0; oc < g.o; ++oc) {
                    const double* src = self.grad.data() + ((n0 + j) * g.o + oc) * g.plane();
                    std::copy(src, src + g.plane(), dy.data() + oc * static_cast<std::size_t>(width) + j * g.plane());
                }
            if (need_b)
                for (std::size_t oc = 0; oc < g.o; ++oc) gb[oc] += dy.row(static_cast<Eigen::Index>(oc)).sum();
            if (need_w) {
                im2col(g, x, n0, count, cols.data());
                ConstMapMat cmat(cols.data(), static_cast<Eigen::Index>(g.rows()), width);
                dw.noalias() += dy * cmat.transpose();
            }
            if (need_in) {
                dcols.noalias() = wmat.transpose() * dy;
                col2im_add(g, dcols.data(), n0, count, gx.data());
            }
        }
        if (need_w)
            for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dw.data()[i];
    });
}

Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
    require(input.rank() >= 2, ErrorCode::shape_mismatch, "max_pool2d", "input needs two spatial axes");
    require(window >= 1 && stride >= 1, ErrorCode::invalid_argument, "max_pool2d", "window and stride must be positive");
    const std::size_t h = input.dim(input.rank() - 2);
    const std::size_t w = input.dim(input.rank() - 1);
    require(window <= h, ErrorCode::shape_mismatch, "max_pool2d.height",
            "window " + std::to_string(window) + " larger than height " + std::to_string(h));
    require(window <= w, ErrorCode::shape_mismatch, "max_pool2d.width",
            "window " + std::to_string(window) + " larger than width " + std::to_string(w));
    const std::size_t oh = (h - window) / stride + 1;
    const std::size_t ow = (w - window) / stride + 1;
    const std::size_t planes = input.numel() / (h * w);

    std::vector<double> out(planes * oh * ow);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const double* x = input.data().data();
    for (std::size_t pl = 0; pl < planes; ++pl)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = pl * h * w + oy * stride * w + ox * stride;
                for (std::size_t ky = 0; ky < window; ++ky)
                    for (std::size_t kx = 0; kx < window; ++kx) {
                        const std::size_t idx = pl * h * w + (oy * stride + ky) * w + ox * stride + kx;
                        if (x[idx] > x[best]) best = idx;
                    }
                const std::size_t o = (pl * oh + oy) * ow + ox;
                out[o] = x[best];
                (*argmax)[o] = best;
            }

    Shape shape = input.shape();
    shape[shape.size() - 2] = oh;
    shape[shape.size() - 1] = ow;
    return Tensor::make_result(std::move(shape), std::move(out), {input}, [argmax](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < argmax->size(); ++i) g[(*argmax)[i]] += self.grad[i];
    });
}

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    require(input.rank() >= 2, ErrorCode::shape_mismatch, "resize_bilinear", "input needs two spatial axes");
    require(out_h >= 1 && out_w >= 1, ErrorCode::invalid_argument, "resize_bilinear", "output extents must be positive");
    const std::size_t h = input.dim(input.rank() - 2);
    const std::size_t w = input.dim(input.rank() - 1);
    const std::size_t planes = input.numel() / (h * w);

    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> t(out);
        const double ratio = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t i = 0; i < out; ++i) {
            double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            const std::size_t hi = std::min(lo + 1, in - 1);
            t[i] = {lo, hi, src - static_cast<double>(lo)};
        }
        return t;
    };
    auto ty = std::make_shared<std::vector<Tap>>(taps(h, out_h));
    auto tx = std::make_shared<std::vector<Tap>>(taps(w, out_w));

    std::vector<double> out(planes * out_h * out_w);
    const double* x = input.data().data();
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const double* src = x + pl * h * w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const Tap& a = (*ty)[oy];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const Tap& b = (*tx)[ox];
                const double top = src[a.lo * w + b.lo] * (1 - b.frac) + src[a.lo * w + b.hi] * b.frac;
                const double bot = src[a.hi * w + b.lo] * (1 - b.frac) + src[a.hi * w + b.hi] * b.frac;
                out[(pl * out_h + oy) * out_w + ox] = top * (1 - a.frac) + bot * a.frac;
            }
        }
    }

    Shape shape = input.shape();
    shape[shape.size() - 2] = out_h;
    shape[shape.size() - 1] = out_w;
    return Tensor::make_result(std::move(shape), std::move(out), {input},
                               [ty, tx, planes, h, w, out_h, out_w](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t pl = 0; pl < planes; ++pl) {
            double* dst = g.data() + pl * h * w;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const Tap& a = (*ty)[oy];
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const Tap& b = (*tx)[ox];
                    const double up = self.grad[(pl * out_h + oy) * out_w + ox];
                    dst[a.lo * w + b.lo] += up * (1 - a.frac) * (1 - b.frac);
                    dst[a.lo * w + b.hi] += up * (1 - a.frac) * b.frac;
                    dst[a.hi * w + b.lo] += up * a.frac * (1 - b.frac);
                    dst[a.hi * w + b.hi] += up * a.frac * b.frac;
                }
            }
        }
    });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.rank() == 4 && b.rank() == 4, ErrorCode::shape_mismatch, "concat_channels", "expected N×C×H×W inputs");
    require(a.dim(0) == b.dim(0), ErrorCode::shape_mismatch, "concat_channels.N", "batch sizes differ");
    require(a.dim(2) == b.dim(2), ErrorCode::shape_mismatch, "concat_channels.H", "heights differ");
    require(a.dim(3) == b.dim(3), ErrorCode::shape_mismatch, "concat_channels.W", "widths differ");
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
    std::vector<double> out(n * (ca + cb) * plane);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.data().data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
        std::copy_n(b.data().data() + i * cb * plane, cb * plane, out.data() + (i * (ca + cb) + ca) * plane);
    }
    return Tensor::make_result({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                               [n, ca, cb, plane](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = self.grad.data() + i * (ca + cb) * plane;
            if (wants_grad(self, 0)) {
                auto g = self.parents[0]->grad_buffer();
                for (std::size_t j = 0; j < ca * plane; ++j) g[i * ca * plane + j] += src[j];
            }
            if (wants_grad(self, 1)) {
                auto g = self.parents[1]->grad_buffer();
                for (std::size_t j = 0; j < cb * plane; ++j) g[i * cb * plane + j] += src[ca * plane + j];
            }
        }
    });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end) {
    require(x.rank() == 4, ErrorCode::shape_mismatch, "slice_channels", "expected N×C×H×W, got " + shape_str(x.shape()));
    require(begin < end && end <= x.dim(1), ErrorCode::shape_mismatch, "slice_channels.channels",
            "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " + std::to_string(x.dim(1)) +
                " channels");
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3), kept = end - begin;
    std::vector<double> out(n * kept * plane);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(x.data().data() + (i * c + begin) * plane, kept * plane, out.data() + i * kept * plane);
    return Tensor::make_result({n, kept, x.dim(2), x.dim(3)}, std::move(out), {x}, [=](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = self.grad.data() + i * kept * plane;
            double* dst = g.data() + (i * c + begin) * plane;
            for (std::size_t j = 0; j < kept * plane; ++j) dst[j] += src[j];
        }
    });
}

Tensor repeat_samples(const Tensor& x, std::size_t times) {
    require(x.rank() >= 1 && times >= 1, ErrorCode::invalid_argument, "repeat_samples", "need a batch axis and times ≥ 1");
    const std::size_t n = x.dim(0), per = x.numel() / n;
    std::vector<double> out(n * times * per);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < times; ++t)
            std::copy_n(x.data().data() + i * per, per, out.data() + (i * times + t) * per);
    Shape shape = x.shape();
    shape[0] = n * times;
    return Tensor::make_result(std::move(shape), std::move(out), {x}, [n, times, per](Node& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < times; ++t) {
                const double* src = self.grad.data() + (i * times + t) * per;
                for (std::size_t j = 0; j < per; ++j) g[i * per + j] += src[j];
            }
    });
}

Tensor mask_planes(const Tensor& x, const Tensor& mask) {
    require(x.rank() >= 2, ErrorCode::shape_mismatch, "mask_planes", "input needs two spatial axes");
    const std::size_t plane = x.dim(x.rank() - 2) * x.dim(x.rank() - 1);
    require(mask.numel() == plane, ErrorCode::shape_mismatch, "mask_planes.mask",
            "mask has " + std::to_string(mask.numel()) + " cells, plane has " + std::to_string(plane));
    const std::size_t planes = x.numel() / plane;
    std::vector<double> out(x.numel());
    const double* px = x.data().data();
    const double* pm = mask.data().data();
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < plane; ++i) out[p * plane + i] = px[p * plane + i] * pm[i];
    return Tensor::make_result(x.shape(), std::move(out), {x, mask}, [planes, plane](Node& self) {
        const auto& xv = self.parents[0]->data;
        const auto& mv = self.parents[1]->data;
        if (wants_grad(self, 0)) {
            auto g = self.parents[0]->grad_buffer();
            for (std::size_t p = 0; p < planes; ++p)
                for (std::size_t i = 0; i < plane; ++i) g[p * plane + i] += self.grad[p * plane + i] * mv[i];
        }
        if (wants_grad(self, 1)) {
            auto g = self.parents[1]->grad_buffer();
            for (std::size_t p = 0; p < planes; ++p)
                for (std::size_t i = 0; i < plane; ++i) g[i] += self.grad[p * plane + i] * xv[p * plane + i];
        }
    });
}

void softmax_tau_into(std::span<const double> logits, double tau, std::span<double> out) {
    require(tau > 0.0, ErrorCode::invalid_argument, "tau", "temperature must be positive");
    require(!logits.empty(), ErrorCode::invalid_argument, "logits", "softmax of an empty vector");
    double peak = -std::numeric_limits<double>::infinity();
    for (double l : logits) peak = std::max(peak, l);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::isinf(logits[i]) && logits[i] < 0 ? 0.0 : std::exp((logits[i] - peak) / tau);
        total += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
}

Tensor softmax_tau(const Tensor& logits, double tau) {
    std::vector<double> out(logits.numel());
    softmax_tau_into(logits.data(), tau, out);
    auto probs = std::make_shared<std::vector<double>>(out);
    return Tensor::make_result(logits.shape(), std::move(out), {logits}, [probs, tau](Node& self) {
        const auto& p = *probs;
        double dot = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * self.grad[i];
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < p.size(); ++i) g[i] += p[i] * (self.grad[i] - dot) / tau;
    });
}

} // namespace weicsip::numerics
