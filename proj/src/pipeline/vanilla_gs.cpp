// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/ops.hpp"
#include "dipgs/loss/losses.hpp"
#include "dipgs/pipeline/optimizer.hpp"
#include "dipgs/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace dipgs::pipeline {

using namespace dipgs::scene;
using diff::Tensor;

std::vector<Camera> TrainingData::cameras() const {
    std::vector<Camera> out;
    for (const auto& v : views) out.push_back(v.camera);
    return out;
}

double default_d_min(const TrainingData& data) {
    if (data.views.empty()) throw std::invalid_argument("no training views");
    std::vector<double> dist;
    for (const auto& v : data.views) dist.push_back(norm(v.camera.center() - data.bounds.center));
    std::sort(dist.begin(), dist.end());
    const std::size_t n = dist.size();
    const double median = n % 2 == 1 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
    return 0.2 * median;
}

bool pick_pseudo_view(double p, std::mt19937_64& rng) {
    if (!(p >= 0.0)) throw std::invalid_argument("dominance factor must be non-negative");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < p / (1.0 + p);
}

GaussianSet densify_and_prune(const GaussianSet& set, const std::vector<double>& grad, const DensifyConfig& cfg,
                              double scene_extent, std::mt19937_64& rng, std::vector<std::ptrdiff_t>* source) {
    const std::size_t n = set.size();
    if (grad.size() != n) throw std::invalid_argument("densify: gradient statistics do not match the set");
    const double split_above = cfg.split_fraction * scene_extent;
    std::normal_distribution<double> normal(0.0, 1.0);

    GaussianSet grown;
    std::vector<std::ptrdiff_t> origin;
    GaussianSet added;
    std::size_t projected = n;
    for (std::size_t i = 0; i < n; ++i) {
        const bool over = grad[i] > cfg.grad_threshold && projected < cfg.max_gaussians;
        const Vec3& s = set.scales[i];
        const bool large = std::max({s[0], s[1], s[2]}) > split_above;
        if (over && large) {
            const Mat3 r = quaternion_to_rotation(set.rotations[i]);
            const Vec3 child_scale = (1.0 / cfg.split_factor) * s;
            for (int c = 0; c < 2; ++c) {
                const Vec3 u{normal(rng) * s[0], normal(rng) * s[1], normal(rng) * s[2]};
                added.push_back(set.means[i] + matvec(r, u), child_scale, set.rotations[i], set.opacities[i], set.sh[i]);
            }
            ++projected;
            continue;
        }
        grown.push_back(set.means[i], s, set.rotations[i], set.opacities[i], set.sh[i]);
        origin.push_back(static_cast<std::ptrdiff_t>(i));
        if (over) {
            added.push_back(set.means[i], s, set.rotations[i], set.opacities[i], set.sh[i]);
            ++projected;
        }
    }
    for (std::size_t i = 0; i < added.size(); ++i) {
        grown.push_back(added.means[i], added.scales[i], added.rotations[i], added.opacities[i], added.sh[i]);
        origin.push_back(-1);
    }

    GaussianSet out;
    if (source) source->clear();
    for (std::size_t i = 0; i < grown.size(); ++i) {
        if (grown.opacities[i] < cfg.prune_opacity) continue;
        out.push_back(grown.means[i], grown.scales[i], grown.rotations[i], grown.opacities[i], grown.sh[i]);
        if (source) source->push_back(origin[i]);
    }
    return out;
}

namespace {

constexpr double kOpacityEps = 1e-6;

// Unconstrained attributes, row-major, with their Adam moments.
struct RawGaussians {
    std::array<std::vector<double>, 5> values;  // means, log scales, quaternions, logit opacities, sh
    std::array<Moments, 5> moments;
    static constexpr std::array<std::size_t, 5> kWidth{3, 3, 4, 1, 3};

    std::size_t size() const { return values[3].size(); }

    static RawGaussians from_set(const GaussianSet& set) {
        RawGaussians r;
        for (std::size_t i = 0; i < set.size(); ++i) {
            for (int k = 0; k < 3; ++k) r.values[0].push_back(set.means[i][k]);
            for (int k = 0; k < 3; ++k) r.values[1].push_back(std::log(set.scales[i][k]));
            for (int k = 0; k < 4; ++k) r.values[2].push_back(set.rotations[i][k]);
            const double o = std::clamp(set.opacities[i], kOpacityEps, 1.0 - kOpacityEps);
            r.values[3].push_back(std::log(o / (1.0 - o)));
            for (int k = 0; k < 3; ++k) r.values[4].push_back(set.sh[i][k]);
        }
        for (std::size_t a = 0; a < 5; ++a) {
            r.moments[a].m.assign(r.values[a].size(), 0.0);
            r.moments[a].v.assign(r.values[a].size(), 0.0);
        }
        return r;
    }

    GaussianSet to_set() const {
        GaussianSet set;
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& v = values;
            Quat q{v[2][4 * i], v[2][4 * i + 1], v[2][4 * i + 2], v[2][4 * i + 3]};
            const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
            if (qn > 0) {
                for (double& c : q) c /= qn;
            } else {
                q = {1, 0, 0, 0};
            }
            const auto ex = [](double x) { return std::exp(std::clamp(x, -diff::kExpInputClamp, diff::kExpInputClamp)); };
            const double o = 1.0 / (1.0 + std::exp(-v[3][i]));
            set.push_back({v[0][3 * i], v[0][3 * i + 1], v[0][3 * i + 2]},
                          {ex(v[1][3 * i]), ex(v[1][3 * i + 1]), ex(v[1][3 * i + 2])}, q,
                          std::clamp(o, kOpacityEps, 1.0 - kOpacityEps),
                          {v[4][3 * i], v[4][3 * i + 1], v[4][3 * i + 2]});
        }
        return set;
    }

    // Keeps moments of surviving rows; rows with source -1 start from zero.
    void remap(const RawGaussians& next_values, const std::vector<std::ptrdiff_t>& source) {
        std::array<Moments, 5> next;
        for (std::size_t a = 0; a < 5; ++a) {
            const std::size_t w = kWidth[a];
            next[a].m.assign(source.size() * w, 0.0);
            next[a].v.assign(source.size() * w, 0.0);
            for (std::size_t row = 0; row < source.size(); ++row) {
                if (source[row] < 0) continue;
                const auto src = static_cast<std::size_t>(source[row]);
                for (std::size_t k = 0; k < w; ++k) {
                    next[a].m[row * w + k] = moments[a].m[src * w + k];
                    next[a].v[row * w + k] = moments[a].v[src * w + k];
                }
            }
        }
        values = next_values.values;
        moments = std::move(next);
    }
};

}  // namespace

GsRun optimize_gs(const GaussianSet& initial, const TrainingData& data, const std::vector<View>& pseudo, double p,
                  const GsConfig& cfg, double d_min, std::mt19937_64& rng, std::size_t log_every,
                  const ProgressFn& progress) {
    if (data.views.empty()) throw std::invalid_argument("optimize_gs: no training views");
    if (initial.empty()) throw std::invalid_argument("optimize_gs: empty initial set");
    cfg.weights.validate();
    RawGaussians raw = RawGaussians::from_set(initial);
    const auto cameras = data.cameras();
    const double extent = data.bounds.diagonal();
    const std::size_t densify_until =
        static_cast<std::size_t>(cfg.densify.until_fraction * static_cast<double>(cfg.iterations));
    std::uniform_int_distribution<std::size_t> pick_pseudo(0, pseudo.empty() ? 0 : pseudo.size() - 1);
    const render::RenderOptions options;
    const AdamOptions adam;

    GsRun run;
    render::ScreenGradStats stats;
    stats.reset(raw.size());
    std::size_t next_train = 0;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const View* view = nullptr;
        if (!pseudo.empty() && pick_pseudo_view(p, rng)) {
            view = &pseudo[pick_pseudo(rng)];
            ++run.pseudo_steps;
        } else {
            view = &data.views[next_train++ % data.views.size()];
        }

        const std::size_t n = raw.size();
        std::array<Tensor, 5> params;
        for (std::size_t a = 0; a < 5; ++a) params[a] = Tensor::parameter({n, RawGaussians::kWidth[a]}, raw.values[a]);
        double loss_value = 0.0;
        diff::Gradients grads;
        try {
            GaussianTensors g;
            g.means = params[0];
            g.scales = diff::activation(params[1], diff::Activation::exp);
            g.rotations = params[2];
            g.opacities = diff::activation(params[3], diff::Activation::sigmoid);
            g.sh = params[4];
            const Tensor img = render::render(g, view->camera, data.background, options, &stats);
            Tensor loss = loss::photometric(img, view->image.to_tensor(), cfg.weights.lambda_ssim);
            if (cfg.weights.opacity > 0) loss = loss + diff::scale(loss::opacity_reg(g.opacities), cfg.weights.opacity);
            if (cfg.weights.scale > 0) loss = loss + diff::scale(loss::scale_reg(g.scales), cfg.weights.scale);
            if (cfg.weights.occlusion > 0) {
                loss = loss + diff::scale(loss::occlusion_reg(g, cameras, d_min), cfg.weights.occlusion);
            }
            loss_value = loss.item();
            grads = diff::backward(loss);
        } catch (const diff::NonFiniteError& e) {
            throw TrainingError("Gaussian optimization, iteration " + std::to_string(it) + ": " + e.what());
        }
        const double lrs[5] = {cfg.lr_mean, cfg.lr_scale, cfg.lr_rotation, cfg.lr_opacity, cfg.lr_sh};
        for (std::size_t a = 0; a < 5; ++a) {
            auto gv = grads.view(params[a]);
            std::vector<double> zero;
            if (gv.size() != raw.values[a].size()) {
                zero.assign(raw.values[a].size(), 0.0);
                gv = zero;
            }
            adam_step(raw.values[a], gv, raw.moments[a], it + 1, lrs[a], adam);
        }
        if (it % log_every == 0 || it + 1 == cfg.iterations) run.loss.add(it, loss_value);
        if (progress && (it + 1) % 100 == 0) {
            progress("gs " + std::to_string(it + 1) + "/" + std::to_string(cfg.iterations) + " loss " +
                     std::to_string(loss_value) + " gaussians " + std::to_string(raw.size()));
        }

        if (cfg.densify.enabled && it + 1 >= cfg.densify.start && it + 1 < densify_until &&
            (it + 1) % cfg.densify.interval == 0) {
            std::vector<double> mean_grad(raw.size(), 0.0);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                if (stats.count[i] > 0) mean_grad[i] = stats.norm_sum[i] / static_cast<double>(stats.count[i]);
            }
            std::vector<std::ptrdiff_t> source;
            const GaussianSet next = densify_and_prune(raw.to_set(), mean_grad, cfg.densify, extent, rng, &source);
            if (next.empty()) throw TrainingError("Gaussian optimization, iteration " + std::to_string(it) + ": every Gaussian was pruned");
            RawGaussians next_raw = RawGaussians::from_set(next);
            // Surviving rows keep their exact raw values; only new rows go through the set conversion.
            for (std::size_t row = 0; row < source.size(); ++row) {
                if (source[row] < 0) continue;
                const auto src = static_cast<std::size_t>(source[row]);
                for (std::size_t a = 0; a < 5; ++a) {
                    const std::size_t w = RawGaussians::kWidth[a];
                    for (std::size_t k = 0; k < w; ++k) next_raw.values[a][row * w + k] = raw.values[a][src * w + k];
                }
            }
            raw.remap(next_raw, source);
            stats.reset(raw.size());
        }
    }
    run.result = raw.to_set();
    return run;
}

GsRun run_vanilla_gs(const TrainingData& data, const GsConfig& cfg, double d_min, std::mt19937_64& rng,
                     std::size_t log_every, const ProgressFn& progress) {
    if (data.views.empty()) throw std::invalid_argument("run_vanilla_gs: no training views");
    data.bounds.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> points(cfg.initial_count);
    for (auto& p : points) {
        for (int k = 0; k < 3; ++k) p[k] = data.bounds.center[k] + data.bounds.half_extent[k] * (2.0 * unit(rng) - 1.0);
    }
    const auto dist = points.size() >= 2 ? knn_mean_distance(points, 3) : std::vector<double>(points.size(), 0.1);
    GaussianSet init;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double s = std::max(dist[i], 1e-4);
        const Vec3 color{unit(rng), unit(rng), unit(rng)};
        init.push_back(points[i], {s, s, s}, {1, 0, 0, 0}, cfg.initial_opacity,
                       {color_to_sh(color[0]), color_to_sh(color[1]), color_to_sh(color[2])});
    }
    return optimize_gs(init, data, {}, 0.0, cfg, d_min, rng, log_every, progress);
}

}  // namespace dipgs::pipeline
