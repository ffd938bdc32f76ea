// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/conv_kernels.hpp"
#include "dipgs/diff/tensor.hpp"

#include <span>
#include <vector>

namespace dipgs::diff {

enum class Activation { leaky_relu, sigmoid, tanh, exp };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kExpInputClamp = 15.0;
inline constexpr double kNormEps = 1e-5;

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

/// Subgradient 0 at 0.
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes only strictly inside [lo, hi].
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Elementwise nonlinearity. leaky_relu uses slope 0.2 (also at 0);
/// exp clamps its input to [-15, 15].
Tensor activation(const Tensor& a, Activation kind);

Tensor reshape(const Tensor& a, Shape shape);

/// Concatenates H x W x C_i tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

/// y[..., c] = x[..., c] * scale[c] + shift[c] with constant scale/shift over the last axis.
Tensor channel_affine(const Tensor& x, std::span<const double> scale, std::span<const double> shift);

/// HWC cross-correlation. kernel: kh x kw x Cin x Cout, bias: Cout.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, Padding padding);

/// Bilinear upsampling by 2, half-pixel (non corner-aligned) sampling, edge clamped.
Tensor upsample_bilinear(const Tensor& input, std::size_t factor = 2);

/// Per-channel spatial standardisation followed by gamma * x + beta.
Tensor normalize(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = kNormEps);

}  // namespace dipgs::diff
