// SPDX-License-Identifier: Apache-2.0
#pragma once

// Direct, unoptimized implementations used as oracles. Nothing here calls the
// library's own math: rotations, projections and sums are written out again.

#include "dipgs/scene/gaussians.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace dipgs::reference {

using scene::Camera;
using scene::GaussianSet;
using scene::Image;
using scene::Vec3;

/// HWC cross-correlation, kernel kh x kw x Cin x Cout, zero padding `pad` on every side.
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t ci,
                                  const std::vector<double>& k, std::size_t kh, std::size_t kw, std::size_t co,
                                  const std::vector<double>& bias, std::size_t stride, std::size_t pad,
                                  std::size_t& out_h, std::size_t& out_w) {
    out_h = (h + 2 * pad - kh) / stride + 1;
    out_w = (w + 2 * pad - kw) / stride + 1;
    std::vector<double> out(out_h * out_w * co);
    for (std::size_t oy = 0; oy < out_h; ++oy)
        for (std::size_t ox = 0; ox < out_w; ++ox)
            for (std::size_t o = 0; o < co; ++o) {
                double s = bias.empty() ? 0.0 : bias[o];
                for (std::size_t a = 0; a < kh; ++a)
                    for (std::size_t b = 0; b < kw; ++b)
                        for (std::size_t c = 0; c < ci; ++c) {
                            const long y = static_cast<long>(oy * stride + a) - static_cast<long>(pad);
                            const long x = static_cast<long>(ox * stride + b) - static_cast<long>(pad);
                            if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) continue;
                            s += in[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * ci + c] *
                                 k[((a * kw + b) * ci + c) * co + o];
                        }
                out[(oy * out_w + ox) * co + o] = s;
            }
    return out;
}

/// Per-channel standardization with a separate pass for the mean and the variance.
inline std::vector<double> normalize(const std::vector<double>& x, std::size_t pixels, std::size_t channels,
                                     const std::vector<double>& gamma, const std::vector<double>& beta, double eps) {
    std::vector<double> out(x.size());
    for (std::size_t c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) mean += x[p * channels + c];
        mean /= static_cast<double>(pixels);
        double var = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) var += (x[p * channels + c] - mean) * (x[p * channels + c] - mean);
        var /= static_cast<double>(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
            out[p * channels + c] = gamma[c] * (x[p * channels + c] - mean) / std::sqrt(var + eps) + beta[c];
        }
    }
    return out;
}

using M3 = std::array<std::array<double, 3>, 3>;

inline M3 rotation(const std::array<double, 4>& q) {
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

/// Front-to-back alpha compositing of every Gaussian over every pixel:
/// C = sum_i c_i a_i prod_{j<i} (1 - a_j) + background * prod_i (1 - a_i),
/// with a_i = min(0.99, o_i exp(-d^T S'^-1 d / 2)) and S' the projected covariance plus 0.3 I.
inline Image render(const GaussianSet& set, const Camera& cam, const Vec3& background) {
    struct Splat {
        double depth, u, v, ia, ib, ic, opacity;
        std::array<double, 3> color;
        std::size_t index;
    };
    std::vector<Splat> splats;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& m = set.means[i];
        std::array<double, 3> p{};
        for (int r = 0; r < 3; ++r) {
            p[r] = cam.translation[r];
            for (int c = 0; c < 3; ++c) p[r] += cam.rotation[r][c] * m[c];
        }
        if (p[2] <= cam.near) continue;
        const M3 R = rotation(set.rotations[i]);
        M3 cov{};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int k = 0; k < 3; ++k) cov[a][b] += R[a][k] * set.scales[i][k] * set.scales[i][k] * R[b][k];
        // T = J W, J the pinhole Jacobian at p.
        const double z = p[2];
        const double J[2][3] = {{cam.fx / z, 0, -cam.fx * p[0] / (z * z)}, {0, cam.fy / z, -cam.fy * p[1] / (z * z)}};
        double T[2][3] = {};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < 3; ++k) T[r][c] += J[r][k] * cam.rotation[k][c];
        double S[2][2] = {};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) S[r][c] += T[r][a] * cov[a][b] * T[c][b];
        S[0][0] += 0.3;
        S[1][1] += 0.3;
        const double det = S[0][0] * S[1][1] - S[0][1] * S[1][0];
        Splat s{};
        s.depth = z;
        s.u = cam.fx * p[0] / z + cam.cx;
        s.v = cam.fy * p[1] / z + cam.cy;
        s.ia = S[1][1] / det;
        s.ib = -S[0][1] / det;
        s.ic = S[0][0] / det;
        s.opacity = set.opacities[i];
        for (int c = 0; c < 3; ++c) s.color[c] = std::clamp(0.28209479177387814 * set.sh[i][c] + 0.5, 0.0, 1.0);
        s.index = i;
        splats.push_back(s);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
    });
    Image img(cam.width, cam.height);
    for (std::size_t y = 0; y < cam.height; ++y)
        for (std::size_t x = 0; x < cam.width; ++x) {
            double t = 1.0;
            std::array<double, 3> c{};
            for (const auto& s : splats) {
                const double dx = static_cast<double>(x) - s.u, dy = static_cast<double>(y) - s.v;
                const double a = std::min(0.99, s.opacity * std::exp(-0.5 * (s.ia * dx * dx + 2 * s.ib * dx * dy + s.ic * dy * dy)));
                for (int k = 0; k < 3; ++k) c[k] += t * a * s.color[k];
                t *= 1.0 - a;
            }
            for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k] + t * background[k];
        }
    return img;
}

inline double sqdist(const Vec3& a, const Vec3& b) {
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
}

/// Index of the first point attaining the minimum squared distance.
inline std::size_t nearest(const Vec3& p, const std::vector<Vec3>& cloud) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cloud.size(); ++j) {
        if (sqdist(p, cloud[j]) < sqdist(p, cloud[best])) best = j;
    }
    return best;
}

inline double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sa = 0.0, sb = 0.0;
    for (const auto& p : a) sa += sqdist(p, b[nearest(p, b)]);
    for (const auto& p : b) sb += sqdist(p, a[nearest(p, a)]);
    return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

/// Mean Euclidean distance to the k nearest other points, k clipped to N - 1.
inline std::vector<double> knn_mean(const std::vector<Vec3>& pts, std::size_t k) {
    std::vector<double> out(pts.size(), 0.0);
    if (pts.size() < 2) return out;
    k = std::min(k, pts.size() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j != i) d.push_back(std::sqrt(sqdist(pts[i], pts[j])));
        }
        std::sort(d.begin(), d.end());
        out[i] = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
    }
    return out;
}

}  // namespace dipgs::reference
