// SPDX-License-Identifier: Apache-2.0
#include "dipgs/render/rasterizer.hpp"
#include "dipgs/render/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dipgs::render {

using namespace dipgs::scene;

namespace {

struct GaussianView {
    std::span<const double> means, scales, rotations, opacities, sh;
    std::size_t size() const { return opacities.size(); }
    Vec3 mean(std::size_t i) const { return {means[3 * i], means[3 * i + 1], means[3 * i + 2]}; }
    Vec3 scale(std::size_t i) const { return {scales[3 * i], scales[3 * i + 1], scales[3 * i + 2]}; }
    scene::Quat rotation(std::size_t i) const {
        return {rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]};
    }
};

// Quantities kept per visible Gaussian for the backward pass.
struct Visible {
    std::size_t source = 0;
    Projection proj;
    Mat3 cov3d{};
    Mat2 cov2d{};
    Vec3 color_raw{};
};

struct Prepass {
    std::vector<Visible> visible;  // depth order
    std::vector<raster::Prepared> prepared;
};

Prepass prepare(const GaussianView& g, const Camera& camera, const RenderOptions& opt) {
    const std::size_t n = g.size();
    std::vector<std::optional<Visible>> all(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto proj = project(g.mean(i), camera);
        if (!proj) continue;
        Visible v;
        v.source = i;
        v.proj = *proj;
        v.cov3d = scene::covariance3d(g.scale(i), g.rotation(i));
        v.cov2d = splat_covariance(v.cov3d, camera, proj->camera_point, opt.dilation);
        for (int c = 0; c < 3; ++c) v.color_raw[c] = scene::kSh0 * g.sh[3 * i + c] + 0.5;
        all[i] = v;
    }

    Prepass out;
    for (auto& v : all) {
        if (v) out.visible.push_back(*v);
    }
    std::sort(out.visible.begin(), out.visible.end(), [](const Visible& a, const Visible& b) {
        if (a.proj.depth != b.proj.depth) return a.proj.depth < b.proj.depth;
        return a.source < b.source;
    });

    const int w = static_cast<int>(camera.width), h = static_cast<int>(camera.height);
    out.prepared.resize(out.visible.size());
    for (std::size_t s = 0; s < out.visible.size(); ++s) {
        const Visible& v = out.visible[s];
        raster::Prepared& p = out.prepared[s];
        const double a = v.cov2d[0][0], b = v.cov2d[0][1], c = v.cov2d[1][1];
        const double det = a * c - b * b;
        p.u = v.proj.u;
        p.v = v.proj.v;
        p.conic_a = c / det;
        p.conic_b = -b / det;
        p.conic_c = a / det;
        for (int k = 0; k < 3; ++k) p.color[k] = std::clamp(v.color_raw[k], 0.0, 1.0);
        p.opacity = g.opacities[v.source];
        if (opt.cutoff) {
            const double mid = 0.5 * (a + c);
            const double lambda = mid + std::sqrt(std::max(mid * mid - det, 0.0));
            const double radius = opt.cutoff_sigma * std::sqrt(lambda);
            // Clamp before converting so far-off Gaussians cannot overflow int.
            const auto lo = [](double x, int limit) { return static_cast<int>(std::ceil(std::clamp(x, -1.0, limit + 1.0))); };
            const auto hi = [](double x, int limit) { return static_cast<int>(std::floor(std::clamp(x, -1.0, limit + 1.0))); };
            p.x0 = std::max(lo(p.u - radius, w), 0);
            p.x1 = std::min(hi(p.u + radius, w), w - 1);
            p.y0 = std::max(lo(p.v - radius, h), 0);
            p.y1 = std::min(hi(p.v + radius, h), h - 1);
        } else {
            p.x0 = 0;
            p.x1 = w - 1;
            p.y0 = 0;
            p.y1 = h - 1;
        }
    }
    return out;
}

raster::Frame make_frame(const Camera& camera, const Vec3& background, const RenderOptions& options) {
    raster::Frame f;
    f.width = camera.width;
    f.height = camera.height;
    f.background = background;
    f.options = options;
    return f;
}

void check_attributes(const GaussianTensors& g) {
    const std::size_t n = g.means.dim(0);
    const auto expect = [n](const diff::Tensor& t, std::size_t cols, const char* name) {
        if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != cols) {
            throw diff::ShapeError(std::string("render: ") + name + " must be N x " + std::to_string(cols) +
                                   ", got " + diff::to_string(t.shape()));
        }
    };
    expect(g.means, 3, "means");
    expect(g.scales, 3, "scales");
    expect(g.rotations, 4, "rotations");
    expect(g.opacities, 1, "opacities");
    expect(g.sh, 3, "sh");
}

}  // namespace

std::vector<SplattedGaussian> splat(const GaussianSet& set, const Camera& camera, const RenderOptions& options) {
    const auto t = scene::to_tensors(set);
    const GaussianView view{t.means.values(), t.scales.values(), t.rotations.values(), t.opacities.values(),
                            t.sh.values()};
    const Prepass pre = prepare(view, camera, options);
    std::vector<SplattedGaussian> out(pre.visible.size());
    for (std::size_t s = 0; s < out.size(); ++s) {
        const auto& v = pre.visible[s];
        out[s].mean2d = {v.proj.u, v.proj.v};
        out[s].cov2d = v.cov2d;
        out[s].depth = v.proj.depth;
        out[s].color = pre.prepared[s].color;
        out[s].opacity = pre.prepared[s].opacity;
        out[s].source_index = v.source;
    }
    return out;
}

RenderTarget render(const GaussianSet& set, const Camera& camera, const Vec3& background,
                    const RenderOptions& options) {
    const auto t = scene::to_tensors(set);
    RenderTarget target;
    target.pixels = Image::from_tensor(render(t, camera, background, options));
    target.background = background;
    return target;
}

diff::Tensor render(const GaussianTensors& gaussians, const Camera& camera, const Vec3& background,
                    const RenderOptions& options, ScreenGradStats* stats) {
    check_attributes(gaussians);
    const GaussianView view{gaussians.means.values(), gaussians.scales.values(), gaussians.rotations.values(),
                            gaussians.opacities.values(), gaussians.sh.values()};
    auto pre = std::make_shared<Prepass>(prepare(view, camera, options));
    const raster::Frame frame = make_frame(camera, background, options);
    std::vector<double> image(camera.width * camera.height * 3);

    bool needs_grad = false;
    for (const auto* t : {&gaussians.means, &gaussians.scales, &gaussians.rotations, &gaussians.opacities,
                          &gaussians.sh}) {
        needs_grad = needs_grad || t->requires_grad();
    }
    auto bands = std::make_shared<std::vector<std::vector<raster::Contribution>>>();
    raster::parallel::composite(frame, pre->prepared, image, needs_grad ? bands.get() : nullptr);

    const std::size_t n = gaussians.size();
    return diff::record(
        "render",
        {gaussians.means, gaussians.scales, gaussians.rotations, gaussians.opacities, gaussians.sh},
        {camera.height, camera.width, 3}, std::move(image),
        [pre, bands, frame, camera, gaussians, stats, n](std::span<const double> grad_out, diff::GradSlots slots) {
            std::vector<raster::PreparedGrad> pg(pre->prepared.size());
            raster::parallel::composite_backward(frame, pre->prepared, *bands, grad_out, pg);

            if (stats && stats->count.size() == n) {
                const double half_w = 0.5 * static_cast<double>(camera.width);
                const double half_h = 0.5 * static_cast<double>(camera.height);
                for (std::size_t s = 0; s < pg.size(); ++s) {
                    const auto& p = pre->prepared[s];
                    if (p.x1 < p.x0 || p.y1 < p.y0) continue;
                    const std::size_t src = pre->visible[s].source;
                    stats->norm_sum[src] += std::hypot(pg[s].u * half_w, pg[s].v * half_h);
                    stats->count[src] += 1;
                }
            }

            const auto rot = gaussians.rotations.values();
            const auto scl = gaussians.scales.values();
            const auto count = static_cast<std::ptrdiff_t>(pg.size());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t ss = 0; ss < count; ++ss) {
                const auto s = static_cast<std::size_t>(ss);
                const Visible& v = pre->visible[s];
                const raster::Prepared& p = pre->prepared[s];
                const raster::PreparedGrad& d = pg[s];
                const std::size_t i = v.source;
                if (slots[3]) (*slots[3])[i] += d.opacity;
                if (slots[4]) {
                    for (int c = 0; c < 3; ++c) {
                        if (v.color_raw[c] > 0.0 && v.color_raw[c] < 1.0) (*slots[4])[3 * i + c] += scene::kSh0 * d.color[c];
                    }
                }
                // conic = inverse(cov2d): dL/dcov2d = -Q G Q with G the symmetric conic gradient.
                const Mat2 q{{{p.conic_a, p.conic_b}, {p.conic_b, p.conic_c}}};
                const Mat2 gq{{{d.conic_a, 0.5 * d.conic_b}, {0.5 * d.conic_b, d.conic_c}}};
                Mat2 qg{}, g2{};
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c) qg[r][c] = q[r][0] * gq[0][c] + q[r][1] * gq[1][c];
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c) g2[r][c] = -(qg[r][0] * q[0][c] + qg[r][1] * q[1][c]);

                const auto sg = splat_covariance_backward(v.cov3d, camera, v.proj.camera_point, g2);
                Vec3 gp = project_backward(camera, v.proj.camera_point, d.u, d.v);
                gp = gp + sg.camera_point;
                if (slots[0]) {
                    const Vec3 gm = matvec(scene::transpose(camera.rotation), gp);
                    for (int k = 0; k < 3; ++k) (*slots[0])[3 * i + k] += gm[k];
                }
                if (slots[1] || slots[2]) {
                    const Vec3 sc{scl[3 * i], scl[3 * i + 1], scl[3 * i + 2]};
                    const scene::Quat qt{rot[4 * i], rot[4 * i + 1], rot[4 * i + 2], rot[4 * i + 3]};
                    const auto cg = scene::covariance3d_backward(sc, qt, sg.cov3d);
                    if (slots[1]) for (int k = 0; k < 3; ++k) (*slots[1])[3 * i + k] += cg.scale[k];
                    if (slots[2]) for (int k = 0; k < 4; ++k) (*slots[2])[4 * i + k] += cg.rotation[k];
                }
            }
        });
}

}  // namespace dipgs::render
