// SPDX-License-Identifier: Apache-2.0
#pragma once

// Compositing kernels behind render(). Work is split into fixed bands of
// image rows; each band keeps the per-pixel front-to-back order, so the
// serial and OpenMP variants produce bit-identical results regardless of
// thread count.

#include "dipgs/render/splat.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dipgs::render::raster {

inline constexpr std::size_t kRowsPerBand = 4;

/// A projected Gaussian ready for compositing, in depth order.
struct Prepared {
    double u = 0, v = 0;
    double conic_a = 0, conic_b = 0, conic_c = 0;  // inverse of the 2D covariance
    Vec3 color{};
    double opacity = 0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel rectangle
};

struct Contribution {
    std::uint32_t pixel = 0;
    std::uint32_t slot = 0;
    double alpha = 0;
    double transmittance = 0;  // before this Gaussian
    double gauss = 0;
    bool clamped = false;
};

struct Frame {
    std::size_t width = 0, height = 0;
    Vec3 background{};
    RenderOptions options;

    std::size_t band_count() const { return (height + kRowsPerBand - 1) / kRowsPerBand; }
};

/// Per-Gaussian gradient of the pixel loss: u, v, conic (a, b, c), color, opacity.
struct PreparedGrad {
    double u = 0, v = 0, conic_a = 0, conic_b = 0, conic_c = 0;
    Vec3 color{};
    double opacity = 0;
};

namespace serial {
/// Writes H x W x 3 pixels; records per-band contributions when `bands` is non-null.
void composite(const Frame& frame, std::span<const Prepared> gaussians, std::span<double> image,
               std::vector<std::vector<Contribution>>* bands);
void composite_backward(const Frame& frame, std::span<const Prepared> gaussians,
                        const std::vector<std::vector<Contribution>>& bands, std::span<const double> grad_image,
                        std::span<PreparedGrad> grads);
}  // namespace serial

namespace parallel {
void composite(const Frame& frame, std::span<const Prepared> gaussians, std::span<double> image,
               std::vector<std::vector<Contribution>>* bands);
void composite_backward(const Frame& frame, std::span<const Prepared> gaussians,
                        const std::vector<std::vector<Contribution>>& bands, std::span<const double> grad_image,
                        std::span<PreparedGrad> grads);
}  // namespace parallel

}  // namespace dipgs::render::raster
