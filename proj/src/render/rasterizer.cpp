// SPDX-License-Identifier: Apache-2.0
#include "dipgs/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace dipgs::render::raster {

namespace {

void composite_band(const Frame& f, std::size_t band, std::span<const Prepared> gaussians, double* image,
                    std::vector<Contribution>* contribs) {
    const std::size_t w = f.width;
    const auto y_begin = static_cast<int>(band * kRowsPerBand);
    const auto y_end = static_cast<int>(std::min(f.height, band * kRowsPerBand + kRowsPerBand));
    const std::size_t pixels = static_cast<std::size_t>(y_end - y_begin) * w;
    std::vector<double> transmittance(pixels, 1.0);
    std::vector<double> accum(pixels * 3, 0.0);
    std::vector<unsigned char> done(pixels, 0);
    const auto& opt = f.options;

    for (std::size_t slot = 0; slot < gaussians.size(); ++slot) {
        const Prepared& g = gaussians[slot];
        const int ya = std::max(g.y0, y_begin);
        const int yb = std::min(g.y1, y_end - 1);
        for (int y = ya; y <= yb; ++y) {
            const double dy = static_cast<double>(y) - g.v;
            for (int x = g.x0; x <= g.x1; ++x) {
                const std::size_t p = static_cast<std::size_t>(y - y_begin) * w + static_cast<std::size_t>(x);
                if (done[p]) continue;
                const double dx = static_cast<double>(x) - g.u;
                const double q = g.conic_a * dx * dx + 2.0 * g.conic_b * dx * dy + g.conic_c * dy * dy;
                const double gauss = std::exp(-0.5 * q);
                const double raw = g.opacity * gauss;
                const bool clamped = raw > opt.alpha_max;
                const double alpha = clamped ? opt.alpha_max : raw;
                if (alpha < opt.alpha_cull) continue;
                const double t = transmittance[p];
                const double weight = t * alpha;
                for (int c = 0; c < 3; ++c) accum[p * 3 + c] += weight * g.color[c];
                transmittance[p] = t * (1.0 - alpha);
                if (contribs) {
                    contribs->push_back({static_cast<std::uint32_t>(static_cast<std::size_t>(y) * w + x),
                                         static_cast<std::uint32_t>(slot), alpha, t, gauss, clamped});
                }
                if (transmittance[p] < opt.transmittance_stop) done[p] = 1;
            }
        }
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        double* out = image + (static_cast<std::size_t>(y_begin) * w + p) * 3;
        for (int c = 0; c < 3; ++c) out[c] = accum[p * 3 + c] + transmittance[p] * f.background[c];
    }
}

void backward_band(const Frame& f, std::size_t band, std::span<const Prepared> gaussians,
                   const std::vector<Contribution>& contribs, const double* grad_image, std::vector<PreparedGrad>& out) {
    const std::size_t w = f.width;
    const std::size_t y_begin = band * kRowsPerBand;
    const std::size_t y_end = std::min(f.height, y_begin + kRowsPerBand);
    const std::size_t first_pixel = y_begin * w;
    // Colour composited behind the current Gaussian, per pixel.
    std::vector<double> behind((y_end - y_begin) * w * 3);
    for (std::size_t p = 0; p < behind.size() / 3; ++p)
        for (int c = 0; c < 3; ++c) behind[p * 3 + c] = f.background[c];

    for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
        const Contribution& k = *it;
        const Prepared& g = gaussians[k.slot];
        PreparedGrad& acc = out[k.slot];
        const double* gc = grad_image + static_cast<std::size_t>(k.pixel) * 3;
        double* r = behind.data() + (k.pixel - first_pixel) * 3;
        double grad_alpha = 0.0;
        for (int c = 0; c < 3; ++c) {
            grad_alpha += gc[c] * k.transmittance * (g.color[c] - r[c]);
            acc.color[c] += gc[c] * k.transmittance * k.alpha;
            r[c] = k.alpha * g.color[c] + (1.0 - k.alpha) * r[c];
        }
        if (k.clamped) continue;
        acc.opacity += grad_alpha * k.gauss;
        const double grad_q = -0.5 * k.gauss * g.opacity * grad_alpha;
        const double dx = static_cast<double>(k.pixel % w) - g.u;
        const double dy = static_cast<double>(k.pixel / w) - g.v;
        acc.conic_a += grad_q * dx * dx;
        acc.conic_b += grad_q * 2.0 * dx * dy;
        acc.conic_c += grad_q * dy * dy;
        acc.u -= grad_q * 2.0 * (g.conic_a * dx + g.conic_b * dy);
        acc.v -= grad_q * 2.0 * (g.conic_b * dx + g.conic_c * dy);
    }
}

void reduce_bands(const std::vector<std::vector<PreparedGrad>>& partial, std::span<PreparedGrad> grads) {
    for (const auto& band : partial) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
            PreparedGrad& d = grads[i];
            const PreparedGrad& s = band[i];
            d.u += s.u;
            d.v += s.v;
            d.conic_a += s.conic_a;
            d.conic_b += s.conic_b;
            d.conic_c += s.conic_c;
            for (int c = 0; c < 3; ++c) d.color[c] += s.color[c];
            d.opacity += s.opacity;
        }
    }
}

}  // namespace

namespace serial {

void composite(const Frame& frame, std::span<const Prepared> gaussians, std::span<double> image,
               std::vector<std::vector<Contribution>>* bands) {
    const std::size_t n = frame.band_count();
    if (bands) bands->assign(n, {});
    for (std::size_t b = 0; b < n; ++b) {
        composite_band(frame, b, gaussians, image.data(), bands ? &(*bands)[b] : nullptr);
    }
}

void composite_backward(const Frame& frame, std::span<const Prepared> gaussians,
                        const std::vector<std::vector<Contribution>>& bands, std::span<const double> grad_image,
                        std::span<PreparedGrad> grads) {
    std::vector<std::vector<PreparedGrad>> partial(bands.size(), std::vector<PreparedGrad>(gaussians.size()));
    for (std::size_t b = 0; b < bands.size(); ++b) {
        backward_band(frame, b, gaussians, bands[b], grad_image.data(), partial[b]);
    }
    reduce_bands(partial, grads);
}

}  // namespace serial

namespace parallel {

void composite(const Frame& frame, std::span<const Prepared> gaussians, std::span<double> image,
               std::vector<std::vector<Contribution>>* bands) {
    const auto n = static_cast<std::ptrdiff_t>(frame.band_count());
    if (bands) bands->assign(static_cast<std::size_t>(n), {});
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
        const auto band = static_cast<std::size_t>(b);
        composite_band(frame, band, gaussians, image.data(), bands ? &(*bands)[band] : nullptr);
    }
}

void composite_backward(const Frame& frame, std::span<const Prepared> gaussians,
                        const std::vector<std::vector<Contribution>>& bands, std::span<const double> grad_image,
                        std::span<PreparedGrad> grads) {
    std::vector<std::vector<PreparedGrad>> partial(bands.size(), std::vector<PreparedGrad>(gaussians.size()));
    const auto n = static_cast<std::ptrdiff_t>(bands.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
        const auto band = static_cast<std::size_t>(b);
        backward_band(frame, band, gaussians, bands[band], grad_image.data(), partial[band]);
    }
    reduce_bands(partial, grads);
}

}  // namespace parallel

}  // namespace dipgs::render::raster
