// SPDX-License-Identifier: Apache-2.0
#include "dipgs/render/splat.hpp"

namespace dipgs::render {

using namespace dipgs::scene;

std::optional<Projection> project(const Vec3& mean, const Camera& camera) {
    const Vec3 p = camera.to_camera(mean);
    if (p[2] <= camera.near) return std::nullopt;
    Projection out;
    out.u = camera.fx * p[0] / p[2] + camera.cx;
    out.v = camera.fy * p[1] / p[2] + camera.cy;
    out.depth = p[2];
    out.camera_point = p;
    return out;
}

Vec3 project_backward(const Camera& camera, const Vec3& p, double grad_u, double grad_v) {
    const double iz = 1.0 / p[2];
    return {grad_u * camera.fx * iz, grad_v * camera.fy * iz,
            -(grad_u * camera.fx * p[0] + grad_v * camera.fy * p[1]) * iz * iz};
}

std::array<Vec3, 2> projection_jacobian(const Camera& camera, const Vec3& p) {
    const double iz = 1.0 / p[2];
    return {Vec3{camera.fx * iz, 0.0, -camera.fx * p[0] * iz * iz},
            Vec3{0.0, camera.fy * iz, -camera.fy * p[1] * iz * iz}};
}

namespace {

// T = J W (2 x 3)
std::array<Vec3, 2> jw(const std::array<Vec3, 2>& j, const Mat3& w) {
    std::array<Vec3, 2> t{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) t[r][c] = j[r][0] * w[0][c] + j[r][1] * w[1][c] + j[r][2] * w[2][c];
    return t;
}

}  // namespace

Mat2 splat_covariance(const Mat3& cov3d, const Camera& camera, const Vec3& p, double dilation) {
    const auto t = jw(projection_jacobian(camera, p), camera.rotation);
    Mat2 out{};
    for (int r = 0; r < 2; ++r) {
        const Vec3 ts = matvec(cov3d, t[r]);  // Sigma symmetric: (T Sigma)_r = Sigma t_r
        for (int c = r; c < 2; ++c) {
            out[r][c] = dot(t[c], ts);
            out[c][r] = out[r][c];
        }
    }
    out[0][0] += dilation;
    out[1][1] += dilation;
    return out;
}

SplatCovarianceGrad splat_covariance_backward(const Mat3& cov3d, const Camera& camera, const Vec3& p,
                                              const Mat2& g) {
    const auto j = projection_jacobian(camera, p);
    const Mat3& w = camera.rotation;
    const Mat3 v = matmul(matmul(w, cov3d), transpose(w));

    // Sigma' = J V J^T: dJ = (G + G^T) J V, dV = J^T G J.
    Mat2 gs{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) gs[r][c] = g[r][c] + g[c][r];
    std::array<Vec3, 2> jv{};
    for (int r = 0; r < 2; ++r) jv[r] = matvec(v, j[r]);
    std::array<Vec3, 2> dj{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) dj[r][c] = gs[r][0] * jv[0][c] + gs[r][1] * jv[1][c];
    Mat3 dv{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) dv[a][b] += j[r][a] * g[r][c] * j[c][b];

    SplatCovarianceGrad out;
    out.cov3d = matmul(matmul(transpose(w), dv), w);

    const double iz = 1.0 / p[2];
    const double iz2 = iz * iz, iz3 = iz2 * iz;
    const double fx = camera.fx, fy = camera.fy;
    out.camera_point[0] = dj[0][2] * (-fx * iz2);
    out.camera_point[1] = dj[1][2] * (-fy * iz2);
    out.camera_point[2] = dj[0][0] * (-fx * iz2) + dj[0][2] * (2.0 * fx * p[0] * iz3) + dj[1][1] * (-fy * iz2) +
                          dj[1][2] * (2.0 * fy * p[1] * iz3);
    return out;
}

}  // namespace dipgs::render
