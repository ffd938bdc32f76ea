// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/ops.hpp"
#include "dipgs/loss/losses.hpp"

#include <limits>
#include <stdexcept>

namespace dipgs::loss {

using namespace dipgs::scene;

std::pair<std::size_t, double> nearest(const Vec3& p, std::span<const Vec3> cloud) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Vec3 d = p - cloud[j];
        const double dd = dot(d, d);
        if (dd < best_d) {
            best_d = dd;
            best = j;
        }
    }
    return {best, best_d};
}

namespace {

std::vector<Vec3> unpack(const Tensor& t, const char* what) {
    if (t.rank() != 2 || t.dim(1) != 3) {
        throw diff::ShapeError(std::string(what) + ": expected N x 3 points, got " + diff::to_string(t.shape()));
    }
    std::vector<Vec3> out(t.dim(0));
    const auto v = t.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
    return out;
}

std::vector<std::size_t> nearest_all(const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                                     std::vector<double>& dist) {
    std::vector<std::size_t> idx(from.size());
    dist.resize(from.size());
    const auto n = static_cast<std::ptrdiff_t>(from.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto [j, d] = nearest(from[static_cast<std::size_t>(i)], to);
        idx[static_cast<std::size_t>(i)] = j;
        dist[static_cast<std::size_t>(i)] = d;
    }
    return idx;
}

}  // namespace

Tensor chamfer(const Tensor& a, const Tensor& b) {
    auto pa = std::make_shared<std::vector<Vec3>>(unpack(a, "chamfer"));
    auto pb = std::make_shared<std::vector<Vec3>>(unpack(b, "chamfer"));
    if (pa->empty() || pb->empty()) throw std::invalid_argument("chamfer: empty point cloud");
    std::vector<double> da, db;
    auto ia = std::make_shared<std::vector<std::size_t>>(nearest_all(*pa, *pb, da));
    auto ib = std::make_shared<std::vector<std::size_t>>(nearest_all(*pb, *pa, db));
    double sa = 0.0, sb = 0.0;
    for (double d : da) sa += d;
    for (double d : db) sb += d;
    const double inv_n = 1.0 / static_cast<double>(pa->size());
    const double inv_m = 1.0 / static_cast<double>(pb->size());

    return diff::record("chamfer", {a, b}, {}, {sa * inv_n + sb * inv_m},
                        [pa, pb, ia, ib, inv_n, inv_m](std::span<const double> g, diff::GradSlots slots) {
                            // Pair (p, q) contributes w * |p - q|^2: dp = 2w(p - q), dq = -dp.
                            const auto pair = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                                                  const std::vector<std::size_t>& nn, double w,
                                                  std::vector<double>* g_from, std::vector<double>* g_to) {
                                for (std::size_t i = 0; i < from.size(); ++i) {
                                    const Vec3 d = (2.0 * w * g[0]) * (from[i] - to[nn[i]]);
                                    for (int k = 0; k < 3; ++k) {
                                        if (g_from) (*g_from)[3 * i + k] += d[k];
                                        if (g_to) (*g_to)[3 * nn[i] + k] -= d[k];
                                    }
                                }
                            };
                            pair(*pa, *pb, *ia, inv_n, slots[0], slots[1]);
                            pair(*pb, *pa, *ib, inv_m, slots[1], slots[0]);
                        });
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point cloud");
    double sa = 0.0, sb = 0.0;
    for (const auto& p : a) sa += nearest(p, b).second;
    for (const auto& p : b) sb += nearest(p, a).second;
    return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

Tensor opacity_reg(const Tensor& opacities) { return diff::mean(diff::abs(opacities)); }

Tensor scale_reg(const Tensor& scales) { return diff::mean(diff::abs(scales)); }

double occlusion_term(double opacity, double depth, double d_min) {
    return opacity * std::max(0.0, 1.0 - depth / d_min);
}

Tensor occlusion_reg(const GaussianTensors& g, std::span<const Camera> cameras, double d_min, double k_sigma) {
    if (cameras.empty()) throw std::invalid_argument("occlusion_reg: no cameras");
    if (!(d_min > 0)) throw std::invalid_argument("occlusion_reg: d_min must be positive");
    const std::size_t n = g.size();
    if (n == 0) return Tensor::scalar(0.0);

    const auto mu = g.means.values(), sc = g.scales.values(), rq = g.rotations.values(), op = g.opacities.values();
    // Nearest corner per (Gaussian, camera), -1 where the term is inactive.
    auto active = std::make_shared<std::vector<int>>(n * cameras.size(), -1);
    auto cams = std::make_shared<std::vector<Camera>>(cameras.begin(), cameras.end());
    std::vector<double> per_gaussian(n, 0.0);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Vec3 m{mu[3 * i], mu[3 * i + 1], mu[3 * i + 2]};
        const Vec3 s{sc[3 * i], sc[3 * i + 1], sc[3 * i + 2]};
        const Quat q{rq[4 * i], rq[4 * i + 1], rq[4 * i + 2], rq[4 * i + 3]};
        const auto corners = bbox_corners(m, s, q, k_sigma);
        for (std::size_t v = 0; v < cams->size(); ++v) {
            int best = 0;
            double depth = std::numeric_limits<double>::infinity();
            for (int c = 0; c < 8; ++c) {
                const double z = (*cams)[v].to_camera(corners[static_cast<std::size_t>(c)])[2];
                if (z < depth) {
                    depth = z;
                    best = c;
                }
            }
            if (depth < d_min) {
                (*active)[i * cams->size() + v] = best;
                per_gaussian[i] += occlusion_term(op[i], depth, d_min);
            }
        }
    }
    double total = 0.0;
    for (double t : per_gaussian) total += t;
    const double inv = 1.0 / static_cast<double>(n * cameras.size());

    return diff::record(
        "occlusion_reg", {g.means, g.scales, g.rotations, g.opacities}, {}, {total * inv},
        [g, active, cams, d_min, k_sigma, inv, n](std::span<const double> grad, diff::GradSlots slots) {
            const auto mu = g.means.values(), sc = g.scales.values(), rq = g.rotations.values();
            const auto op = g.opacities.values();
            const double w = grad[0] * inv;
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3 m{mu[3 * i], mu[3 * i + 1], mu[3 * i + 2]};
                const Vec3 s{sc[3 * i], sc[3 * i + 1], sc[3 * i + 2]};
                const Quat q{rq[4 * i], rq[4 * i + 1], rq[4 * i + 2], rq[4 * i + 3]};
                const Mat3 r = quaternion_to_rotation(q);
                Mat3 grad_r{};
                bool rotation_used = false;
                for (std::size_t v = 0; v < cams->size(); ++v) {
                    const int corner = (*active)[i * cams->size() + v];
                    if (corner < 0) continue;
                    const Camera& cam = (*cams)[v];
                    const Vec3& zrow = cam.rotation[2];
                    const auto corners = bbox_corners(m, s, q, k_sigma);
                    const double depth = cam.to_camera(corners[static_cast<std::size_t>(corner)])[2];
                    if (slots[3]) (*slots[3])[i] += w * (1.0 - depth / d_min);
                    const double gd = -w * op[i] / d_min;
                    if (slots[0])
                        for (int k = 0; k < 3; ++k) (*slots[0])[3 * i + k] += gd * zrow[k];
                    // corner = m + sum_a sign_a * k * s_a * R[:, a]
                    for (int a = 0; a < 3; ++a) {
                        const double sign = (corner >> a) & 1 ? 1.0 : -1.0;
                        double zr = 0.0;
                        for (int row = 0; row < 3; ++row) zr += zrow[row] * r[row][a];
                        if (slots[1]) (*slots[1])[3 * i + a] += gd * sign * k_sigma * zr;
                        for (int row = 0; row < 3; ++row) grad_r[row][a] += gd * zrow[row] * sign * k_sigma * s[a];
                    }
                    rotation_used = true;
                }
                if (slots[2] && rotation_used) {
                    const Quat gq = quaternion_to_rotation_backward(q, grad_r);
                    for (int k = 0; k < 4; ++k) (*slots[2])[4 * i + k] += gq[k];
                }
            }
        });
}

}  // namespace dipgs::loss
