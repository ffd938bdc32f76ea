// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/conv_kernels.hpp"

#include "dipgs/diff/tensor.hpp"

#include <string>
#include <vector>

namespace dipgs::diff {

ConvGeometry make_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                                std::size_t kernel_h, std::size_t kernel_w,
                                std::size_t kernel_in, std::size_t kernel_out,
                                std::size_t stride, Padding padding) {
    if (stride == 0) throw ShapeError("conv2d stride must be positive");
    if (kernel_in != in_c) {
        throw ShapeError("conv2d kernel expects " + std::to_string(kernel_in) + " input channels, got " +
                         std::to_string(in_c));
    }
    if (kernel_h == 0 || kernel_w == 0 || kernel_out == 0) throw ShapeError("conv2d kernel has an empty dimension");
    if (in_h == 0 || in_w == 0) throw ShapeError("conv2d input has an empty spatial dimension");
    ConvGeometry g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.in_c = in_c;
    g.kernel_h = kernel_h;
    g.kernel_w = kernel_w;
    g.out_c = kernel_out;
    g.stride = stride;
    if (padding == Padding::same) {
        if (kernel_h % 2 == 0 || kernel_w % 2 == 0) throw ShapeError("conv2d 'same' padding needs odd kernel sizes");
        g.pad_top = kernel_h / 2;
        g.pad_left = kernel_w / 2;
        g.out_h = (in_h + 2 * g.pad_top - kernel_h) / stride + 1;
        g.out_w = (in_w + 2 * g.pad_left - kernel_w) / stride + 1;
    } else {
        if (in_h < kernel_h || in_w < kernel_w) throw ShapeError("conv2d 'valid' input smaller than kernel");
        g.out_h = (in_h - kernel_h) / stride + 1;
        g.out_w = (in_w - kernel_w) / stride + 1;
    }
    return g;
}

namespace {

inline void forward_row(const ConvGeometry& g, std::size_t oy, const double* __restrict input,
                        const double* __restrict kernel, const double* __restrict bias, double* __restrict output) {
    const std::size_t ci_n = g.in_c;
    const std::size_t co_n = g.out_c;
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double* out = output + (oy * g.out_w + ox) * co_n;
        for (std::size_t co = 0; co < co_n; ++co) out[co] = bias[co];
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const auto ix =
                    static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                const double* in = input + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * ci_n;
                const double* k = kernel + (ky * g.kernel_w + kx) * ci_n * co_n;
                for (std::size_t ci = 0; ci < ci_n; ++ci) {
                    const double v = in[ci];
                    const double* kr = k + ci * co_n;
                    for (std::size_t co = 0; co < co_n; ++co) out[co] += v * kr[co];
                }
            }
        }
    }
}

/// Kernel re-laid out as kh x kw x Cout x Cin, so input-gradient rows run over contiguous Cin.
std::vector<double> transpose_kernel(const ConvGeometry& g, const double* kernel) {
    const std::size_t ci_n = g.in_c, co_n = g.out_c, taps = g.kernel_h * g.kernel_w;
    std::vector<double> t(taps * ci_n * co_n);
    for (std::size_t tap = 0; tap < taps; ++tap)
        for (std::size_t ci = 0; ci < ci_n; ++ci)
            for (std::size_t co = 0; co < co_n; ++co) t[(tap * co_n + co) * ci_n + ci] = kernel[(tap * ci_n + ci) * co_n + co];
    return t;
}

inline void backward_input_row(const ConvGeometry& g, std::size_t iy, const double* __restrict grad_out,
                               const double* __restrict kernel_t, double* __restrict grad_in) {
    const std::size_t ci_n = g.in_c;
    const std::size_t co_n = g.out_c;
    for (std::size_t ix = 0; ix < g.in_w; ++ix) {
        double* gi = grad_in + (iy * g.in_w + ix) * ci_n;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const auto ny = static_cast<std::ptrdiff_t>(iy + g.pad_top) - static_cast<std::ptrdiff_t>(ky);
            if (ny < 0 || ny % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
            const auto oy = static_cast<std::size_t>(ny) / g.stride;
            if (oy >= g.out_h) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const auto nx = static_cast<std::ptrdiff_t>(ix + g.pad_left) - static_cast<std::ptrdiff_t>(kx);
                if (nx < 0 || nx % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
                const auto ox = static_cast<std::size_t>(nx) / g.stride;
                if (ox >= g.out_w) continue;
                const double* go = grad_out + (oy * g.out_w + ox) * co_n;
                const double* k = kernel_t + (ky * g.kernel_w + kx) * co_n * ci_n;
                for (std::size_t co = 0; co < co_n; ++co) {
                    const double v = go[co];
                    const double* kr = k + co * ci_n;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) gi[ci] += v * kr[ci];
                }
            }
        }
    }
}

// The Cin x Cout kernel-gradient block of one tap, accumulated over output pixels in raster order.
inline void backward_kernel_tap(const ConvGeometry& g, std::size_t tap, const double* __restrict input,
                                const double* __restrict grad_out, double* __restrict grad_kernel) {
    const std::size_t ci_n = g.in_c;
    const std::size_t co_n = g.out_c;
    const std::size_t ky = tap / g.kernel_w;
    const std::size_t kx = tap % g.kernel_w;
    double* gk = grad_kernel + tap * ci_n * co_n;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            const double* in = input + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * ci_n;
            const double* go = grad_out + (oy * g.out_w + ox) * co_n;
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
                const double v = in[ci];
                double* row = gk + ci * co_n;
                for (std::size_t co = 0; co < co_n; ++co) row[co] += v * go[co];
            }
        }
    }
}

}  // namespace

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) forward_row(g, oy, input.data(), kernel.data(), bias.data(), output.data());
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> kernel,
                           std::span<double> grad_in) {
    const auto kt = transpose_kernel(g, kernel.data());
    for (std::size_t iy = 0; iy < g.in_h; ++iy) backward_input_row(g, iy, grad_out.data(), kt.data(), grad_in.data());
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input, std::span<const double> grad_out,
                            std::span<double> grad_kernel) {
    const std::size_t taps = g.kernel_h * g.kernel_w;
    for (std::size_t t = 0; t < taps; ++t) backward_kernel_tap(g, t, input.data(), grad_out.data(), grad_kernel.data());
}

}  // namespace serial

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output) {
    const auto rows = static_cast<std::ptrdiff_t>(g.out_h);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oy = 0; oy < rows; ++oy) {
        forward_row(g, static_cast<std::size_t>(oy), input.data(), kernel.data(), bias.data(), output.data());
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> kernel,
                           std::span<double> grad_in) {
    const auto kt = transpose_kernel(g, kernel.data());
    const auto rows = static_cast<std::ptrdiff_t>(g.in_h);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t iy = 0; iy < rows; ++iy) {
        backward_input_row(g, static_cast<std::size_t>(iy), grad_out.data(), kt.data(), grad_in.data());
    }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input, std::span<const double> grad_out,
                            std::span<double> grad_kernel) {
    const auto taps = static_cast<std::ptrdiff_t>(g.kernel_h * g.kernel_w);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < taps; ++t) {
        backward_kernel_tap(g, static_cast<std::size_t>(t), input.data(), grad_out.data(), grad_kernel.data());
    }
}

}  // namespace parallel

void conv2d_backward_bias(const ConvGeometry& g, std::span<const double> grad_out, std::span<double> grad_bias) {
    const std::size_t pixels = g.out_h * g.out_w;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* go = grad_out.data() + p * g.out_c;
        for (std::size_t co = 0; co < g.out_c; ++co) grad_bias[co] += go[co];
    }
}

}  // namespace dipgs::diff
