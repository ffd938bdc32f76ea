// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/ops.hpp"
#include "dipgs/loss/losses.hpp"
#include "dipgs/pipeline/optimizer.hpp"
#include "dipgs/pipeline/pipeline.hpp"

namespace dipgs::pipeline {

using namespace dipgs::scene;
using diff::Tensor;
using dip::Head;

namespace {

Tensor points_tensor(const std::vector<Vec3>& pts) {
    std::vector<double> v;
    v.reserve(pts.size() * 3);
    for (const auto& p : pts) v.insert(v.end(), p.begin(), p.end());
    return Tensor::constant({pts.size(), 3}, std::move(v));
}

template <typename LossFn>
Curve run_adam(const char* phase, const std::vector<Tensor>& params, double lr, const AdamOptions& options,
               std::size_t iterations, std::size_t log_every, LossFn&& loss_at, const ProgressFn& progress = {}) {
    Optimizer opt(options);
    for (const auto& p : params) opt.add(p, lr);
    Curve curve;
    for (std::size_t it = 0; it < iterations; ++it) {
        double value = 0.0;
        diff::Gradients grads;
        try {
            const Tensor loss = loss_at(it);
            value = loss.item();
            grads = diff::backward(loss);
        } catch (const diff::NonFiniteError& e) {
            throw TrainingError(std::string(phase) + ", iteration " + std::to_string(it) + ": " + e.what());
        }
        opt.step(grads);
        if (it % log_every == 0 || it + 1 == iterations) curve.add(it, value);
        if (progress && (it + 1) % 100 == 0) {
            progress(std::string(phase) + " " + std::to_string(it + 1) + "/" + std::to_string(iterations) + " loss " +
                     std::to_string(value));
        }
    }
    return curve;
}

}  // namespace

Curve fit_means(dip::Generator& gen, const dip::NoisePyramid& z, const std::vector<Vec3>& targets, double sigma,
                std::size_t iterations, double lr, std::mt19937_64& rng, std::size_t log_every) {
    if (targets.empty()) throw std::invalid_argument("fit_means: empty target cloud");
    const Tensor target = points_tensor(targets);
    const std::size_t count = gen.config().side * gen.config().side;
    return run_adam("mean fit", gen.net(Head::mean).parameters(), lr, AdamOptions{}, iterations, log_every,
                    [&](std::size_t) {
                        const auto zt = dip::perturb(z, sigma, rng);
                        return loss::chamfer(diff::reshape(gen.head(Head::mean, zt), {count, 3}), target);
                    });
}

Curve fit_scales(dip::Generator& gen, const dip::NoisePyramid& z, double sigma, std::size_t iterations, double lr,
                 std::mt19937_64& rng, std::size_t log_every) {
    const std::size_t n = gen.config().side;
    const Tensor means = gen.head(Head::mean, z);
    std::vector<Vec3> pts(n * n);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {means[3 * i], means[3 * i + 1], means[3 * i + 2]};
    const auto est = knn_mean_distance(pts, 3);
    std::vector<double> target(n * n * 3);
    for (std::size_t i = 0; i < est.size(); ++i) target[3 * i] = target[3 * i + 1] = target[3 * i + 2] = est[i];
    const Tensor s_est = Tensor::constant({n, n, 3}, std::move(target));
    return run_adam("scale fit", gen.net(Head::scale).parameters(), lr, AdamOptions{}, iterations, log_every,
                    [&](std::size_t) {
                        const auto zt = dip::perturb(z, sigma, rng);
                        return diff::mean(diff::square(gen.head(Head::scale, zt) - s_est));
                    });
}

Curve optimize_dip(dip::Generator& gen, const dip::NoisePyramid& z, const TrainingData& data, double sigma,
                   const loss::LossWeights& w, const StageConfig& cfg, std::mt19937_64& rng, std::size_t log_every,
                   const ProgressFn& progress) {
    if (data.views.empty()) throw std::invalid_argument("optimize_dip: no training views");
    w.validate();
    AdamOptions adamw;
    adamw.mode = OptimizerMode::adamw;
    adamw.weight_decay = cfg.weight_decay;
    Optimizer opt(adamw);
    for (Head h : dip::kHeads) {
        for (const auto& p : gen.net(h).parameters()) opt.add(p, h == Head::mean ? cfg.lr_mean : cfg.lr_other);
    }
    const auto cameras = data.cameras();
    std::vector<Tensor> targets;
    for (const auto& v : data.views) targets.push_back(v.image.to_tensor());
    const render::RenderOptions options;

    Curve curve;
    for (std::size_t it = 0; it < cfg.iters_dip; ++it) {
        const std::size_t view = it % data.views.size();
        double value = 0.0;
        diff::Gradients grads;
        try {
            const auto zt = dip::perturb(z, sigma, rng);
            const auto g = dip::grid_to_gaussians(gen.generate(zt));
            const Tensor img = render::render(g, cameras[view], data.background, options);
            Tensor loss = loss::photometric(img, targets[view], w.lambda_ssim);
            if (w.opacity > 0) loss = loss + diff::scale(loss::opacity_reg(g.opacities), w.opacity);
            if (w.scale > 0) loss = loss + diff::scale(loss::scale_reg(g.scales), w.scale);
            if (w.occlusion > 0) loss = loss + diff::scale(loss::occlusion_reg(g, cameras, w.d_min), w.occlusion);
            value = loss.item();
            grads = diff::backward(loss);
        } catch (const diff::NonFiniteError& e) {
            throw TrainingError("DIP optimization, iteration " + std::to_string(it) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw TrainingError("DIP optimization, iteration " + std::to_string(it) + ": " + e.what());
        }
        opt.step(grads);
        if (it % log_every == 0 || it + 1 == cfg.iters_dip) curve.add(it, value);
        if (progress && (it + 1) % 100 == 0) {
            progress("dip " + std::to_string(it + 1) + "/" + std::to_string(cfg.iters_dip) + " loss " + std::to_string(value));
        }
    }
    return curve;
}

}  // namespace dipgs::pipeline
