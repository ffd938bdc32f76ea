// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/ops.hpp"
#include "dipgs/loss/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dipgs::loss {

void LossWeights::validate() const {
    if (opacity < 0 || scale < 0 || occlusion < 0 || lambda_ssim < 0 || lambda_ssim > 1) {
        throw std::invalid_argument("loss weights must be non-negative and lambda_ssim in [0, 1]");
    }
    if (!(d_min > 0)) throw std::invalid_argument("d_min must be positive");
}

namespace {

// 1D smoothing operator: output i = sum_k weights[i][k] * input[start[i] + k].
struct Filter1d {
    std::vector<std::size_t> start;
    std::vector<std::vector<double>> weights;
};

Filter1d make_filter(std::size_t n, bool global) {
    Filter1d f;
    f.start.resize(n);
    f.weights.resize(n);
    if (global) {
        for (std::size_t i = 0; i < n; ++i) f.weights[i].assign(n, 1.0 / static_cast<double>(n));
        return f;
    }
    const auto half = static_cast<std::ptrdiff_t>(kSsimWindow / 2);
    const auto len = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < len; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
        const std::ptrdiff_t hi = std::min(len - 1, i + half);
        auto& w = f.weights[static_cast<std::size_t>(i)];
        double total = 0.0;
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            const double d = static_cast<double>(j - i);
            w.push_back(std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma)));
            total += w.back();
        }
        for (double& v : w) v /= total;
        f.start[static_cast<std::size_t>(i)] = static_cast<std::size_t>(lo);
    }
    return f;
}

struct Window {
    std::size_t h = 0, w = 0, c = 0;
    Filter1d rows, cols;

    Window(std::size_t h_, std::size_t w_, std::size_t c_) : h(h_), w(w_), c(c_) {
        const bool global = h < kSsimWindow || w < kSsimWindow;
        rows = make_filter(h, global);
        cols = make_filter(w, global);
    }

    // Applies the 2D window (or its transpose) to an H x W x C field.
    std::vector<double> apply(const std::vector<double>& x, bool transpose) const {
        std::vector<double> tmp(x.size(), 0.0), out(x.size(), 0.0);
        // Along x.
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t i = 0; i < w; ++i) {
                const auto& wt = cols.weights[i];
                for (std::size_t k = 0; k < wt.size(); ++k) {
                    const std::size_t j = cols.start[i] + k;
                    const std::size_t src = transpose ? i : j, dst = transpose ? j : i;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        tmp[(y * w + dst) * c + ch] += wt[k] * x[(y * w + src) * c + ch];
                    }
                }
            }
        }
        // Along y.
        for (std::size_t i = 0; i < h; ++i) {
            const auto& wt = rows.weights[i];
            for (std::size_t k = 0; k < wt.size(); ++k) {
                const std::size_t j = rows.start[i] + k;
                const std::size_t src = transpose ? i : j, dst = transpose ? j : i;
                for (std::size_t xx = 0; xx < w * c; ++xx) out[dst * w * c + xx] += wt[k] * tmp[src * w * c + xx];
            }
        }
        return out;
    }
};

struct SsimMaps {
    std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

std::vector<double> product(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

}  // namespace

Tensor ssim(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.rank() != 3) {
        throw diff::ShapeError("ssim: expected equal H x W x C shapes, got " + diff::to_string(a.shape()) + " and " +
                               diff::to_string(b.shape()));
    }
    if (a.size() == 0) throw diff::ShapeError("ssim: empty image");
    auto win = std::make_shared<Window>(a.dim(0), a.dim(1), a.dim(2));
    const auto av = a.values(), bv = b.values();
    auto maps = std::make_shared<SsimMaps>();
    maps->mu_a = win->apply({av.begin(), av.end()}, false);
    maps->mu_b = win->apply({bv.begin(), bv.end()}, false);
    maps->e_aa = win->apply(product(av, av), false);
    maps->e_bb = win->apply(product(bv, bv), false);
    maps->e_ab = win->apply(product(av, bv), false);

    const std::size_t n = a.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = maps->mu_a[i], mb = maps->mu_b[i];
        const double a1 = 2 * ma * mb + kSsimC1;
        const double a2 = 2 * (maps->e_ab[i] - ma * mb) + kSsimC2;
        const double b1 = ma * ma + mb * mb + kSsimC1;
        const double b2 = (maps->e_aa[i] - ma * ma) + (maps->e_bb[i] - mb * mb) + kSsimC2;
        total += a1 * a2 / (b1 * b2);
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    return diff::record("ssim", {a, b}, {}, {total * inv_n},
                        [win, maps, a, b, n, inv_n](std::span<const double> g, diff::GradSlots slots) {
                            std::vector<double> g_mu_a(n), g_mu_b(n), g_aa(n), g_bb(n), g_ab(n);
                            for (std::size_t i = 0; i < n; ++i) {
                                const double ma = maps->mu_a[i], mb = maps->mu_b[i];
                                const double a1 = 2 * ma * mb + kSsimC1;
                                const double a2 = 2 * (maps->e_ab[i] - ma * mb) + kSsimC2;
                                const double b1 = ma * ma + mb * mb + kSsimC1;
                                const double b2 =
                                    (maps->e_aa[i] - ma * ma) + (maps->e_bb[i] - mb * mb) + kSsimC2;
                                const double s = a1 * a2 / (b1 * b2);
                                const double scale = g[0] * inv_n;
                                const double d_a1 = scale * a2 / (b1 * b2);
                                const double d_a2 = scale * a1 / (b1 * b2);
                                const double d_b1 = -scale * s / b1;
                                const double d_b2 = -scale * s / b2;
                                g_mu_a[i] = 2 * mb * (d_a1 - d_a2) + 2 * ma * (d_b1 - d_b2);
                                g_mu_b[i] = 2 * ma * (d_a1 - d_a2) + 2 * mb * (d_b1 - d_b2);
                                g_aa[i] = d_b2;
                                g_bb[i] = d_b2;
                                g_ab[i] = 2 * d_a2;
                            }
                            const auto t_mu_a = win->apply(g_mu_a, true);
                            const auto t_mu_b = win->apply(g_mu_b, true);
                            const auto t_aa = win->apply(g_aa, true);
                            const auto t_bb = win->apply(g_bb, true);
                            const auto t_ab = win->apply(g_ab, true);
                            const auto av = a.values(), bv = b.values();
                            if (slots[0]) {
                                auto& out = *slots[0];
                                for (std::size_t i = 0; i < n; ++i)
                                    out[i] += t_mu_a[i] + 2 * av[i] * t_aa[i] + bv[i] * t_ab[i];
                            }
                            if (slots[1]) {
                                auto& out = *slots[1];
                                for (std::size_t i = 0; i < n; ++i)
                                    out[i] += t_mu_b[i] + 2 * bv[i] * t_bb[i] + av[i] * t_ab[i];
                            }
                        });
}

double ssim(const Image& a, const Image& b) { return ssim(a.to_tensor(), b.to_tensor()).item(); }

Tensor photometric(const Tensor& pred, const Tensor& gt, double lambda_ssim) {
    if (pred.shape() != gt.shape()) {
        throw diff::ShapeError("photometric: shape mismatch " + diff::to_string(pred.shape()) + " vs " +
                               diff::to_string(gt.shape()));
    }
    Tensor l1 = diff::mean(diff::abs(pred - gt));
    if (lambda_ssim == 0.0) return l1;
    Tensor dssim = diff::add_scalar(diff::scale(ssim(pred, gt), -1.0), 1.0);
    return diff::scale(l1, 1.0 - lambda_ssim) + diff::scale(dssim, lambda_ssim);
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw diff::ShapeError("psnr: image size mismatch");
    if (a.pixels.empty()) throw diff::ShapeError("psnr: empty image");
    double total = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        total += d * d;
    }
    return psnr_from_mse(total / static_cast<double>(a.pixels.size()));
}

}  // namespace dipgs::loss
