// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"
#include "dipgs/scene/gaussians.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace dipgs::render {

using scene::Camera;
using scene::GaussianSet;
using scene::GaussianTensors;
using scene::Image;
using scene::Mat2;
using scene::Mat3;
using scene::Vec2;
using scene::Vec3;

struct RenderOptions {
    /// Added to the diagonal of every projected covariance (px^2).
    double dilation = 0.3;
    double alpha_max = 0.99;
    /// Contributions with alpha below this are skipped.
    double alpha_cull = 1.0 / 255.0;
    /// A pixel stops accepting Gaussians once its transmittance falls below this.
    double transmittance_stop = 1e-4;
    /// Restrict each Gaussian to the square around cutoff_sigma * sqrt(largest eigenvalue).
    bool cutoff = true;
    double cutoff_sigma = 3.0;

    /// Plain front-to-back compositing over every pixel: no cutoff, no culling, no early stop.
    static RenderOptions exact() {
        RenderOptions o;
        o.alpha_cull = 0.0;
        o.transmittance_stop = 0.0;
        o.cutoff = false;
        return o;
    }
};

struct Projection {
    double u = 0, v = 0, depth = 0;
    Vec3 camera_point{};
};

/// Pinhole projection; nullopt when the point is not beyond the near plane.
std::optional<Projection> project(const Vec3& mean, const Camera& camera);

/// Gradient of (u, v) w.r.t. the camera-space point, contracted with (grad_u, grad_v).
Vec3 project_backward(const Camera& camera, const Vec3& camera_point, double grad_u, double grad_v);

/// 2 x 3 Jacobian of the pinhole projection at a camera-space point.
std::array<Vec3, 2> projection_jacobian(const Camera& camera, const Vec3& camera_point);

/// Sigma' = J W Sigma W^T J^T + dilation * I, W the camera rotation.
Mat2 splat_covariance(const Mat3& cov3d, const Camera& camera, const Vec3& camera_point, double dilation = 0.3);

struct SplatCovarianceGrad {
    Mat3 cov3d{};
    Vec3 camera_point{};
};
/// grad_cov2d is dL/dSigma' as a full symmetric 2 x 2 matrix.
SplatCovarianceGrad splat_covariance_backward(const Mat3& cov3d, const Camera& camera, const Vec3& camera_point,
                                              const Mat2& grad_cov2d);

struct SplattedGaussian {
    Vec2 mean2d{};
    Mat2 cov2d{};
    double depth = 0;
    Vec3 color{};
    double opacity = 0;
    std::size_t source_index = 0;
};

/// Projects every Gaussian in front of the camera and returns them sorted by
/// (depth, source_index).
std::vector<SplattedGaussian> splat(const GaussianSet& set, const Camera& camera, const RenderOptions& options = {});

struct RenderTarget {
    Image pixels;
    Vec3 background{};
};

RenderTarget render(const GaussianSet& set, const Camera& camera, const Vec3& background,
                    const RenderOptions& options = {});

/// Per-Gaussian screen-space (NDC) mean-gradient statistics, filled by the
/// backward pass of the differentiable render.
struct ScreenGradStats {
    std::vector<double> norm_sum;
    std::vector<std::size_t> count;

    void reset(std::size_t n) {
        norm_sum.assign(n, 0.0);
        count.assign(n, 0);
    }
};

/// Differentiable render: H x W x 3 tensor, gradients flow to every attribute
/// tensor in `gaussians`.
diff::Tensor render(const GaussianTensors& gaussians, const Camera& camera, const Vec3& background,
                    const RenderOptions& options = {}, ScreenGradStats* stats = nullptr);

}  // namespace dipgs::render
