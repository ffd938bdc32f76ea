// SPDX-License-Identifier: Apache-2.0
#include "dipgs/scene/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace dipgs::scene {

Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3 transpose(const Mat3& m) {
    Mat3 t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
    return t;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Vec3 matvec(const Mat3& m, const Vec3& v) {
    return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

double determinant(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

namespace {

Quat unit(const Quat& q, double& length) {
    length = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(length > 0.0)) throw std::invalid_argument("zero quaternion has no rotation");
    return {q[0] / length, q[1] / length, q[2] / length, q[3] / length};
}

}  // namespace

Mat3 quaternion_to_rotation(const Quat& q) {
    double length = 0.0;
    const auto [w, x, y, z] = unit(q, length);
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Quat quaternion_to_rotation_backward(const Quat& q, const Mat3& g) {
    double length = 0.0;
    const auto [w, x, y, z] = unit(q, length);
    // d/d(unit quaternion)
    const double gw = 2 * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0] + x * g[2][1]);
    const double gx = 2 * (y * g[0][1] + z * g[0][2] + y * g[1][0] - 2 * x * g[1][1] - w * g[1][2] + z * g[2][0] +
                           w * g[2][1] - 2 * x * g[2][2]);
    const double gy = 2 * (-2 * y * g[0][0] + x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2] - w * g[2][0] +
                           z * g[2][1] - 2 * y * g[2][2]);
    const double gz = 2 * (-2 * z * g[0][0] - w * g[0][1] + x * g[0][2] + w * g[1][0] - 2 * z * g[1][1] +
                           y * g[1][2] + x * g[2][0] + y * g[2][1]);
    const double proj = w * gw + x * gx + y * gy + z * gz;
    return {(gw - w * proj) / length, (gx - x * proj) / length, (gy - y * proj) / length, (gz - z * proj) / length};
}

Quat rotation_to_quaternion(const Mat3& r) {
    const double trace = r[0][0] + r[1][1] + r[2][2];
    Quat q{};
    if (trace > 0) {
        const double s = 0.5 / std::sqrt(trace + 1.0);
        q = {0.25 / s, (r[2][1] - r[1][2]) * s, (r[0][2] - r[2][0]) * s, (r[1][0] - r[0][1]) * s};
    } else if (r[0][0] > r[1][1] && r[0][0] > r[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]);
        q = {(r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s};
    } else if (r[1][1] > r[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]);
        q = {(r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]);
        q = {(r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s};
    }
    return q;
}

Mat3 covariance3d(const Vec3& scale, const Quat& rotation) {
    const Mat3 r = quaternion_to_rotation(rotation);
    Mat3 m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
    Mat3 sigma{};
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += m[i][k] * m[j][k];
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    return sigma;
}

CovarianceGrad covariance3d_backward(const Vec3& scale, const Quat& rotation, const Mat3& grad_cov) {
    const Mat3 r = quaternion_to_rotation(rotation);
    Mat3 m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
    // Sigma = M M^T  =>  dL/dM = (G + G^T) M
    Mat3 gsym{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gsym[i][j] = grad_cov[i][j] + grad_cov[j][i];
    const Mat3 gm = matmul(gsym, m);
    CovarianceGrad out;
    Mat3 gr{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            gr[i][j] = gm[i][j] * scale[j];
            out.scale[j] += gm[i][j] * r[i][j];
        }
    out.rotation = quaternion_to_rotation_backward(rotation, gr);
    return out;
}

std::array<Vec3, 8> bbox_corners(const Vec3& mean, const Vec3& scale, const Quat& rotation, double k_sigma) {
    const Mat3 r = quaternion_to_rotation(rotation);
    std::array<Vec3, 8> corners{};
    for (int c = 0; c < 8; ++c) {
        Vec3 p = mean;
        for (int axis = 0; axis < 3; ++axis) {
            const double sign = (c >> axis) & 1 ? 1.0 : -1.0;
            const double len = sign * k_sigma * scale[axis];
            for (int i = 0; i < 3; ++i) p[i] += r[i][axis] * len;
        }
        corners[c] = p;
    }
    return corners;
}

std::vector<double> knn_mean_distance(std::span<const Vec3> points, std::size_t k) {
    const std::size_t n = points.size();
    if (n < 2) throw std::invalid_argument("knn_mean_distance needs at least 2 points");
    if (k == 0) throw std::invalid_argument("knn_mean_distance needs k >= 1");
    k = std::min(k, n - 1);
    std::vector<double> out(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
        std::vector<double> dist;
        dist.reserve(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            dist.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == static_cast<std::size_t>(i)) continue;
                dist.push_back(norm(points[j] - points[static_cast<std::size_t>(i)]));
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) total += dist[j];
            out[static_cast<std::size_t>(i)] = total / static_cast<double>(k);
        }
    }
    return out;
}

Vec3 symmetric_eigenvalues(const Mat3& a) {
    const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (p1 == 0.0) {
        Vec3 e{a[0][0], a[1][1], a[2][2]};
        std::sort(e.begin(), e.end());
        return e;
    }
    const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Mat3 b{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
    const double r = std::clamp(determinant(b) / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    Vec3 e{e1, e2, e3};
    std::sort(e.begin(), e.end());
    return e;
}

}  // namespace dipgs::scene
