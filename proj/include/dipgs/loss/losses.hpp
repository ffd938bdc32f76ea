// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"
#include "dipgs/scene/gaussians.hpp"

#include <span>
#include <vector>

namespace dipgs::loss {

using diff::Tensor;
using scene::Camera;
using scene::GaussianTensors;
using scene::Image;
using scene::Vec3;

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
/// Reported PSNR for identical images.
inline constexpr double kPsnrCap = 99.0;

struct LossWeights {
    double opacity = 0.0;    // beta
    double scale = 0.0;      // gamma
    double occlusion = 0.0;  // delta
    double d_min = 1.0;
    double lambda_ssim = 0.2;

    /// Throws std::invalid_argument for negative weights or d_min <= 0.
    void validate() const;
};

/// Mean local SSIM of two H x W x C tensors, 11 x 11 Gaussian window
/// (sigma 1.5) renormalised where it overhangs the border. Images narrower or
/// shorter than the window use whole-image statistics instead.
Tensor ssim(const Tensor& a, const Tensor& b);
double ssim(const Image& a, const Image& b);

/// (1 - lambda) * mean|pred - gt| + lambda * (1 - ssim(pred, gt)).
Tensor photometric(const Tensor& pred, const Tensor& gt, double lambda_ssim = 0.2);

double psnr_from_mse(double mse);
/// 10 log10(1 / MSE) with peak 1; kPsnrCap when the images are identical.
double psnr(const Image& a, const Image& b);

/// Mean squared distance from each point of `a` to its nearest point of `b`
/// plus the same from `b` to `a`. a: N x 3, b: M x 3.
Tensor chamfer(const Tensor& a, const Tensor& b);
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Index of the nearest point of `cloud` to `p` (lowest index on ties) and its squared distance.
std::pair<std::size_t, double> nearest(const Vec3& p, std::span<const Vec3> cloud);

/// mean(|o|)
Tensor opacity_reg(const Tensor& opacities);
/// mean(|s|)
Tensor scale_reg(const Tensor& scales);

/// o * max(0, 1 - d / d_min)
double occlusion_term(double opacity, double depth, double d_min);

/// Mean over every (Gaussian, camera) pair of occlusion_term, with d the
/// smallest camera-space depth of the Gaussian's 3-sigma box corners.
Tensor occlusion_reg(const GaussianTensors& gaussians, std::span<const Camera> cameras, double d_min,
                     double k_sigma = 3.0);

}  // namespace dipgs::loss
