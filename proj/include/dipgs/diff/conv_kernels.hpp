// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

namespace dipgs::diff {

enum class Padding { same, valid };

/// Sizes for an HWC cross-correlation with a kh x kw x Cin x Cout kernel.
struct ConvGeometry {
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::size_t out_h = 0, out_w = 0, out_c = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1;
    std::size_t pad_top = 0, pad_left = 0;
};

/// Throws ShapeError on inconsistent sizes or an even kernel with "same" padding.
ConvGeometry make_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                                std::size_t kernel_h, std::size_t kernel_w,
                                std::size_t kernel_in, std::size_t kernel_out,
                                std::size_t stride, Padding padding);

// Both variants share the same per-element accumulation order, so their
// results are bit-identical; the parallel one splits work across OpenMP threads.
namespace serial {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel);
}  // namespace parallel

/// Bias gradient: per-channel sum of grad_out, accumulated into grad_bias.
void conv2d_backward_bias(const ConvGeometry& g, std::span<const double> grad_out, std::span<double> grad_bias);

}  // namespace dipgs::diff
