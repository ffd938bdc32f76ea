// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"
#include "dipgs/scene/geometry.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

namespace dipgs::scene {

/// Zeroth-order spherical harmonic basis constant.
inline constexpr double kSh0 = 0.28209479177387814;

/// c = clamp(kSh0 * sh + 0.5, 0, 1)
inline double sh_to_color(double sh) { return std::clamp(kSh0 * sh + 0.5, 0.0, 1.0); }
inline double color_to_sh(double c) { return (c - 0.5) / kSh0; }

/// Flat collection of 3D Gaussians; every attribute array has the same length.
struct GaussianSet {
    std::vector<Vec3> means;
    std::vector<Vec3> scales;
    std::vector<Quat> rotations;
    std::vector<double> opacities;
    std::vector<Vec3> sh;

    std::size_t size() const { return means.size(); }
    bool empty() const { return means.empty(); }
    void reserve(std::size_t n);
    void push_back(const Vec3& mean, const Vec3& scale, const Quat& rotation, double opacity, const Vec3& sh_dc);
    void erase_if_opacity_below(double threshold);

    /// Throws std::invalid_argument on mismatched lengths, non-positive scales,
    /// opacities outside (0, 1) or zero quaternions.
    void validate() const;
    /// Rescales every quaternion to unit norm.
    void normalize_rotations();

    bool operator==(const GaussianSet&) const = default;
};

/// Differentiable view of a Gaussian set: means N x 3, scales N x 3,
/// rotations N x 4, opacities N x 1, sh N x 3.
struct GaussianTensors {
    diff::Tensor means, scales, rotations, opacities, sh;

    std::size_t size() const { return means.defined() ? means.dim(0) : 0; }
};

GaussianTensors to_tensors(const GaussianSet& set);
GaussianSet to_set(const GaussianTensors& tensors);

/// Axis-aligned scene box.
struct SceneBounds {
    Vec3 center{0, 0, 0};
    Vec3 half_extent{1, 1, 1};

    void validate() const;
    bool contains(const Vec3& p) const;
    /// Length of the box diagonal.
    double diagonal() const { return 2.0 * norm(half_extent); }
    bool operator==(const SceneBounds&) const = default;
};

/// Pinhole camera with a rigid world-to-camera transform (x right, y down, z forward).
struct Camera {
    Mat3 rotation = identity3();
    Vec3 translation{0, 0, 0};
    double fx = 1, fy = 1, cx = 0, cy = 0;
    std::size_t width = 1, height = 1;
    double near = 0.01;

    Vec3 to_camera(const Vec3& world) const { return matvec(rotation, world) + translation; }
    /// Camera centre in world coordinates.
    Vec3 center() const;
    /// 4 x 4 row-major world-to-camera matrix.
    std::array<double, 16> world_to_camera() const;

    void validate() const;
    bool operator==(const Camera&) const = default;
};

/// Camera at `eye` looking at `target`, with the image y axis pointing
/// along -up. Focal length from a horizontal field of view.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, std::size_t width, std::size_t height,
               double fov_x_radians, double near = 0.01);

/// Row-major H x W x 3 image, values nominally in [0, 1].
struct Image {
    std::size_t width = 0, height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), pixels(w * h * 3, fill) {}

    double& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    double at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

    diff::Tensor to_tensor() const;
    static Image from_tensor(const diff::Tensor& t);
    bool operator==(const Image&) const = default;
};

}  // namespace dipgs::scene
