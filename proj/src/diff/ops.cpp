// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dipgs::diff {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
    if (a.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(a.shape()));
    }
}

template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    auto saved_in = a;
    return record(op, {a}, a.shape(), std::move(y),
                  [saved_in, dfdx](std::span<const double> g, GradSlots slots) {
                      auto& gx = *slots[0];
                      const auto xv = saved_in.values();
                      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xv[i]);
                  });
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
    return record("add", {a, b}, a.shape(), std::move(y), [](std::span<const double> g, GradSlots s) {
        for (int k = 0; k < 2; ++k) {
            if (!s[k]) continue;
            for (std::size_t i = 0; i < g.size(); ++i) (*s[k])[i] += g[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
    return record("sub", {a, b}, a.shape(), std::move(y), [](std::span<const double> g, GradSlots s) {
        if (s[0]) for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i];
        if (s[1]) for (std::size_t i = 0; i < g.size(); ++i) (*s[1])[i] -= g[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
    return record("mul", {a, b}, a.shape(), std::move(y), [a, b](std::span<const double> g, GradSlots s) {
        if (s[0]) for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i] * b[i];
        if (s[1]) for (std::size_t i = 0; i < g.size(); ++i) (*s[1])[i] += g[i] * a[i];
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * factor;
    return record("scale", {a}, a.shape(), std::move(y), [factor](std::span<const double> g, GradSlots s) {
        for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i] * factor;
    });
}

Tensor add_scalar(const Tensor& a, double offset) {
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + offset;
    return record("add_scalar", {a}, a.shape(), std::move(y), [](std::span<const double> g, GradSlots s) {
        for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i];
    });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

Tensor abs(const Tensor& a) {
    return unary(
        "abs", a, [](double x) { return std::abs(x); },
        [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.values()) total += v;
    return record("sum", {a}, {}, {total}, [](std::span<const double> g, GradSlots s) {
        for (auto& v : *s[0]) v += g[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ShapeError("mean of an empty tensor");
    double total = 0.0;
    for (double v : a.values()) total += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    return record("mean", {a}, {}, {total * inv}, [inv](std::span<const double> g, GradSlots s) {
        for (auto& v : *s[0]) v += g[0] * inv;
    });
}

Tensor activation(const Tensor& a, Activation kind) {
    switch (kind) {
    case Activation::leaky_relu:
        return unary(
            "leaky_relu", a, [](double x) { return x > 0 ? x : kLeakySlope * x; },
            [](double x) { return x > 0 ? 1.0 : kLeakySlope; });
    case Activation::sigmoid:
        return unary(
            "sigmoid", a, [](double x) { return sigmoid(x); },
            [](double x) {
                const double s = sigmoid(x);
                return s * (1.0 - s);
            });
    case Activation::tanh:
        return unary(
            "tanh", a, [](double x) { return std::tanh(x); },
            [](double x) {
                const double t = std::tanh(x);
                return 1.0 - t * t;
            });
    case Activation::exp:
        return unary(
            "exp", a, [](double x) { return std::exp(std::clamp(x, -kExpInputClamp, kExpInputClamp)); },
            [](double x) {
                if (x <= -kExpInputClamp || x >= kExpInputClamp) return 0.0;
                return std::exp(x);
            });
    }
    throw std::invalid_argument("unknown activation");
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (element_count(shape) != a.size()) {
        throw ShapeError("reshape " + to_string(a.shape()) + " -> " + to_string(shape));
    }
    std::vector<double> y(a.values().begin(), a.values().end());
    return record("reshape", {a}, std::move(shape), std::move(y), [](std::span<const double> g, GradSlots s) {
        for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i];
    });
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels of nothing");
    const auto& first = parts.front();
    require_rank("concat_channels", first, 3);
    const std::size_t h = first.dim(0), w = first.dim(1);
    std::vector<std::size_t> widths;
    std::size_t total_c = 0;
    for (const auto& p : parts) {
        require_rank("concat_channels", p, 3);
        if (p.dim(0) != h || p.dim(1) != w) {
            throw ShapeError("concat_channels: spatial mismatch " + to_string(first.shape()) + " vs " +
                             to_string(p.shape()));
        }
        widths.push_back(p.dim(2));
        total_c += p.dim(2);
    }
    std::vector<double> y(h * w * total_c);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].values();
        const std::size_t c = widths[k];
        for (std::size_t p = 0; p < h * w; ++p) {
            std::copy_n(src.data() + p * c, c, y.data() + p * total_c + offset);
        }
        offset += c;
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return record("concat_channels", std::move(inputs), {h, w, total_c}, std::move(y),
                  [widths, total_c, pixels = h * w](std::span<const double> g, GradSlots s) {
                      std::size_t off = 0;
                      for (std::size_t k = 0; k < widths.size(); ++k) {
                          const std::size_t c = widths[k];
                          if (s[k]) {
                              auto& gk = *s[k];
                              for (std::size_t p = 0; p < pixels; ++p) {
                                  for (std::size_t j = 0; j < c; ++j) gk[p * c + j] += g[p * total_c + off + j];
                              }
                          }
                          off += c;
                      }
                  });
}

Tensor channel_affine(const Tensor& x, std::span<const double> scale_c, std::span<const double> shift_c) {
    if (x.rank() == 0) throw ShapeError("channel_affine on a scalar");
    const std::size_t c = x.shape().back();
    if (scale_c.size() != c || shift_c.size() != c) throw ShapeError("channel_affine: channel count mismatch");
    std::vector<double> sc(scale_c.begin(), scale_c.end());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * sc[i % c] + shift_c[i % c];
    return record("channel_affine", {x}, x.shape(), std::move(y), [sc](std::span<const double> g, GradSlots s) {
        const std::size_t c = sc.size();
        for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i] * sc[i % c];
    });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, Padding padding) {
    require_rank("conv2d input", input, 3);
    require_rank("conv2d kernel", kernel, 4);
    require_rank("conv2d bias", bias, 1);
    const auto geom = make_conv_geometry(input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(1),
                                         kernel.dim(2), kernel.dim(3), stride, padding);
    if (bias.dim(0) != geom.out_c) throw ShapeError("conv2d bias length does not match output channels");
    std::vector<double> y(geom.out_h * geom.out_w * geom.out_c);
    parallel::conv2d_forward(geom, input.values(), kernel.values(), bias.values(), y);
    return record("conv2d", {input, kernel, bias}, {geom.out_h, geom.out_w, geom.out_c}, std::move(y),
                  [geom, input, kernel](std::span<const double> g, GradSlots s) {
                      if (s[0]) parallel::conv2d_backward_input(geom, g, kernel.values(), *s[0]);
                      if (s[1]) parallel::conv2d_backward_kernel(geom, input.values(), g, *s[1]);
                      if (s[2]) conv2d_backward_bias(geom, g, *s[2]);
                  });
}

namespace {

struct Tap {
    std::size_t lo, hi;
    double w_hi;  // weight of hi; lo gets 1 - w_hi
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t factor) {
    std::vector<Tap> taps(in * factor);
    for (std::size_t o = 0; o < taps.size(); ++o) {
        double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        src = std::max(src, 0.0);
        auto lo = static_cast<std::size_t>(src);
        lo = std::min(lo, in - 1);
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, src - static_cast<double>(lo)};
        if (hi == lo) taps[o].w_hi = 0.0;
    }
    return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& input, std::size_t factor) {
    require_rank("upsample_bilinear", input, 3);
    if (factor == 0) throw ShapeError("upsample_bilinear factor must be positive");
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h == 0 || w == 0) throw ShapeError("upsample_bilinear of an empty image");
    const auto ty = bilinear_taps(h, factor);
    const auto tx = bilinear_taps(w, factor);
    const std::size_t oh = h * factor, ow = w * factor;
    const auto x = input.values();
    std::vector<double> y(oh * ow * c);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto& a = ty[oy];
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto& b = tx[ox];
            const double w00 = (1 - a.w_hi) * (1 - b.w_hi), w01 = (1 - a.w_hi) * b.w_hi;
            const double w10 = a.w_hi * (1 - b.w_hi), w11 = a.w_hi * b.w_hi;
            const double* p00 = x.data() + (a.lo * w + b.lo) * c;
            const double* p01 = x.data() + (a.lo * w + b.hi) * c;
            const double* p10 = x.data() + (a.hi * w + b.lo) * c;
            const double* p11 = x.data() + (a.hi * w + b.hi) * c;
            double* out = y.data() + (oy * ow + ox) * c;
            for (std::size_t k = 0; k < c; ++k) out[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
        }
    }
    return record("upsample_bilinear", {input}, {oh, ow, c}, std::move(y),
                  [ty, tx, w, c, oh, ow](std::span<const double> g, GradSlots s) {
                      auto& gx = *s[0];
                      for (std::size_t oy = 0; oy < oh; ++oy) {
                          const auto& a = ty[oy];
                          for (std::size_t ox = 0; ox < ow; ++ox) {
                              const auto& b = tx[ox];
                              const double w00 = (1 - a.w_hi) * (1 - b.w_hi), w01 = (1 - a.w_hi) * b.w_hi;
                              const double w10 = a.w_hi * (1 - b.w_hi), w11 = a.w_hi * b.w_hi;
                              const double* go = g.data() + (oy * ow + ox) * c;
                              double* g00 = gx.data() + (a.lo * w + b.lo) * c;
                              double* g01 = gx.data() + (a.lo * w + b.hi) * c;
                              double* g10 = gx.data() + (a.hi * w + b.lo) * c;
                              double* g11 = gx.data() + (a.hi * w + b.hi) * c;
                              for (std::size_t k = 0; k < c; ++k) {
                                  g00[k] += w00 * go[k];
                                  g01[k] += w01 * go[k];
                                  g10[k] += w10 * go[k];
                                  g11[k] += w11 * go[k];
                              }
                          }
                      }
                  });
}

Tensor normalize(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank("normalize", input, 3);
    const std::size_t pixels = input.dim(0) * input.dim(1), c = input.dim(2);
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
        throw ShapeError("normalize: affine parameters must have shape [" + std::to_string(c) + "]");
    }
    if (pixels <= 1 && eps <= 0) throw ShapeError("normalize: single pixel needs eps > 0");
    const auto x = input.values();
    std::vector<double> mu(c, 0.0), inv_std(c, 0.0);
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t k = 0; k < c; ++k) mu[k] += x[p * c + k];
    for (auto& m : mu) m /= static_cast<double>(pixels);
    std::vector<double> var(c, 0.0);
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t k = 0; k < c; ++k) {
            const double d = x[p * c + k] - mu[k];
            var[k] += d * d;
        }
    for (std::size_t k = 0; k < c; ++k) inv_std[k] = 1.0 / std::sqrt(var[k] / static_cast<double>(pixels) + eps);

    std::vector<double> xhat(x.size()), y(x.size());
    const auto gm = gamma.values(), bt = beta.values();
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = p * c + k;
            xhat[i] = (x[i] - mu[k]) * inv_std[k];
            y[i] = gm[k] * xhat[i] + bt[k];
        }
    return record("normalize", {input, gamma, beta}, input.shape(), std::move(y),
                  [xhat = std::move(xhat), inv_std, gamma, pixels, c](std::span<const double> g, GradSlots s) {
                      const auto gm = gamma.values();
                      std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                      for (std::size_t p = 0; p < pixels; ++p)
                          for (std::size_t k = 0; k < c; ++k) {
                              const std::size_t i = p * c + k;
                              sum_g[k] += g[i];
                              sum_gx[k] += g[i] * xhat[i];
                          }
                      if (s[0]) {
                          const double inv_n = 1.0 / static_cast<double>(pixels);
                          for (std::size_t p = 0; p < pixels; ++p)
                              for (std::size_t k = 0; k < c; ++k) {
                                  const std::size_t i = p * c + k;
                                  (*s[0])[i] += gm[k] * inv_std[k] *
                                                (g[i] - sum_g[k] * inv_n - xhat[i] * sum_gx[k] * inv_n);
                              }
                      }
                      if (s[1]) for (std::size_t k = 0; k < c; ++k) (*s[1])[k] += sum_gx[k];
                      if (s[2]) for (std::size_t k = 0; k < c; ++k) (*s[2])[k] += sum_g[k];
                  });
}

}  // namespace dipgs::diff
