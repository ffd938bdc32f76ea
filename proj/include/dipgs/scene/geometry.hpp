// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace dipgs::scene {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
/// (w, x, y, z); stored unnormalised, normalised on use.
using Quat = std::array<double, 4>;
using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

Mat3 identity3();
Mat3 transpose(const Mat3& m);
Mat3 matmul(const Mat3& a, const Mat3& b);
Vec3 matvec(const Mat3& m, const Vec3& v);
double determinant(const Mat3& m);

/// Rotation matrix of a (possibly unnormalised) quaternion. Throws on the zero quaternion.
Mat3 quaternion_to_rotation(const Quat& q);

/// Pulls a gradient w.r.t. the rotation matrix back onto the raw quaternion,
/// including the normalisation step.
Quat quaternion_to_rotation_backward(const Quat& q, const Mat3& grad_rotation);

Quat rotation_to_quaternion(const Mat3& r);

/// Sigma = R S S^T R^T with S = diag(scale).
Mat3 covariance3d(const Vec3& scale, const Quat& rotation);

struct CovarianceGrad {
    Vec3 scale{};
    Quat rotation{};
};
/// grad_cov is dL/dSigma as a full (symmetric) matrix.
CovarianceGrad covariance3d_backward(const Vec3& scale, const Quat& rotation, const Mat3& grad_cov);

/// Corners mean + R diag(k * scale) (+-1, +-1, +-1); corner i takes +1 on axis a when bit a of i is set.
std::array<Vec3, 8> bbox_corners(const Vec3& mean, const Vec3& scale, const Quat& rotation, double k_sigma = 3.0);

/// Mean distance from each point to its k nearest other points (k clipped to N - 1).
/// Exact brute force. Throws std::invalid_argument when fewer than 2 points.
std::vector<double> knn_mean_distance(std::span<const Vec3> points, std::size_t k = 3);

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
Vec3 symmetric_eigenvalues(const Mat3& m);

}  // namespace dipgs::scene
