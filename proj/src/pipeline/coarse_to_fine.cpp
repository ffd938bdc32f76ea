// SPDX-License-Identifier: Apache-2.0
#include "dipgs/pipeline/pipeline.hpp"
#include "dipgs/pipeline/rng.hpp"

#include <json.hpp>

namespace dipgs::pipeline {

using namespace dipgs::scene;

namespace {

nlohmann::json curve_json(const Curve& c) { return {{"iteration", c.iteration}, {"value", c.value}}; }

std::vector<Vec3> means_of(const GaussianSet& set) { return set.means; }

void sanitize_rotations(GaussianSet& set) {
    for (auto& q : set.rotations) {
        if (q[0] == 0 && q[1] == 0 && q[2] == 0 && q[3] == 0) q = {1, 0, 0, 0};
    }
    set.normalize_rotations();
}

}  // namespace

std::string StageReport::to_json() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["sigma"] = sigma;
    j["gaussians_in"] = gaussians_in;
    j["grid_side"] = grid_side;
    j["gaussians_generated"] = gaussians_generated;
    j["gaussians_out"] = gaussians_out;
    j["loss"] = {{"cd", curve_json(cd)}, {"scale", curve_json(scale)}, {"dip", curve_json(dip)}, {"post", curve_json(post)}};
    j["metrics"] = metrics;
    return j.dump();
}

std::size_t total_iterations(const PipelineConfig& c) {
    const auto& s = c.stage;
    return c.init.iterations + c.schedule.sigmas.size() * (s.iters_cd + s.iters_scale + s.iters_dip + s.iters_post);
}

StageOutput run_stage(const GaussianSet& input, const TrainingData& data, const PipelineConfig& config,
                      std::size_t stage_index, double sigma, const ProgressFn& progress) {
    const StageConfig& sc = config.stage;
    const double d_min = config.d_min > 0 ? config.d_min : default_d_min(data);

    GaussianSet pruned = input;
    pruned.erase_if_opacity_below(sc.prune_opacity);
    if (pruned.empty()) throw TrainingError("stage " + std::to_string(stage_index) + ": no Gaussians left after pruning");

    StageOutput out;
    out.report.stage = stage_index;
    out.report.sigma = sigma;
    out.report.gaussians_in = pruned.size();

    dip::GeneratorConfig gc;
    gc.side = dip::grid_side_for(pruned.size(), sc.grid_ratio);
    gc.noise = config.noise;
    gc.channels = config.channels;
    out.report.grid_side = gc.side;

    auto weight_rng = substream(config.seed, "weights", stage_index);
    auto fit_rng = substream(config.seed, "fit", stage_index);
    auto post_rng = substream(config.seed, "post", stage_index);
    const auto z = dip::sample_noise(derive_seed(config.seed, "noise", config.resample_noise ? stage_index : 0), gc.side,
                                     gc.noise);

    out.generator = dip::Generator(gc, data.bounds, weight_rng);
    const auto say = [&progress, stage_index](const std::string& msg) {
        if (progress) progress("stage " + std::to_string(stage_index) + ": " + msg);
    };
    if (!sc.skip_init) {
        out.report.cd = fit_means(out.generator, z, means_of(pruned), sigma, sc.iters_cd, sc.lr_cd, fit_rng, config.log_every);
        say("mean fit chamfer " + std::to_string(out.report.cd.value.back()));
        out.report.scale = fit_scales(out.generator, z, sigma, sc.iters_scale, sc.lr_scale_fit, fit_rng, config.log_every);
        say("scale fit mse " + std::to_string(out.report.scale.value.back()));
    }
    loss::LossWeights dip_weights = sc.dip_weights;
    dip_weights.d_min = d_min;
    out.report.dip = optimize_dip(out.generator, z, data, sigma, dip_weights, sc, fit_rng, config.log_every,
                                  progress ? ProgressFn(say) : ProgressFn{});

    out.generated = dip::grid_to_set(out.generator.generate(z));
    sanitize_rotations(out.generated);
    out.report.gaussians_generated = out.generated.size();

    const auto poses = pseudo_cameras(data.cameras(), data.bounds.center, sc.pseudo_per_view, sc.pseudo_jitter_degrees,
                                      post_rng);
    GsConfig post = config.init;
    post.iterations = sc.iters_post;
    post.weights = sc.post_weights;
    post.weights.d_min = d_min;
    post.densify.prune_opacity = sc.prune_opacity;
    auto run = postprocess_gs(out.generated, data, poses, sc.dominance, post, d_min, post_rng, config.log_every,
                              progress ? ProgressFn(say) : ProgressFn{});
    out.report.post = std::move(run.loss);
    out.result = std::move(run.result);
    out.report.gaussians_out = out.result.size();
    return out;
}

RunResult run_coarse_to_fine(const TrainingData& data, const PipelineConfig& config, const RunCallbacks& cb) {
    config.validate();
    if (data.views.empty()) throw std::invalid_argument("no training views");
    const double d_min = config.d_min > 0 ? config.d_min : default_d_min(data);

    RunResult result;
    auto init_rng = substream(config.seed, "init");
    GsConfig init = config.init;
    init.weights.d_min = d_min;
    const ProgressFn init_progress =
        cb.progress ? ProgressFn([&cb](const std::string& m) { cb.progress("initial: " + m); }) : ProgressFn{};
    auto initial = run_vanilla_gs(data, init, d_min, init_rng, config.log_every, init_progress);
    result.initial = std::move(initial.result);

    StageReport first;
    first.stage = 0;
    first.gaussians_out = result.initial.size();
    first.post = std::move(initial.loss);
    if (cb.evaluate) first.metrics = cb.evaluate(result.initial);
    if (cb.on_stage) cb.on_stage(first, result.initial, nullptr);
    result.reports.push_back(std::move(first));

    result.stages.reserve(config.schedule.sigmas.size());
    const GaussianSet* current = &result.initial;
    for (std::size_t k = 0; k < config.schedule.sigmas.size(); ++k) {
        auto stage = run_stage(*current, data, config, k + 1, config.schedule.sigmas[k], cb.progress);
        if (cb.evaluate) stage.report.metrics = cb.evaluate(stage.result);
        if (cb.on_stage) cb.on_stage(stage.report, stage.result, &stage.generator);
        result.reports.push_back(stage.report);
        result.stages.push_back(std::move(stage.result));
        current = &result.stages.back();
    }
    return result;
}

}  // namespace dipgs::pipeline
