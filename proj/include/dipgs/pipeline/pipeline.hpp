// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/dip/generator.hpp"
#include "dipgs/io/scene_io.hpp"
#include "dipgs/pipeline/config.hpp"
#include "dipgs/render/splat.hpp"

#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipgs::pipeline {

using scene::Camera;
using scene::GaussianSet;
using scene::Image;
using scene::SceneBounds;
using scene::Vec3;

struct View {
    Camera camera;
    Image image;
};

struct TrainingData {
    std::vector<View> views;
    Vec3 background{1, 1, 1};
    SceneBounds bounds;

    std::vector<Camera> cameras() const;
};

/// Raised when a loss turns non-finite; names the phase and iteration.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampled loss values: (iteration, loss).
struct Curve {
    std::vector<std::size_t> iteration;
    std::vector<double> value;

    void add(std::size_t it, double v) {
        iteration.push_back(it);
        value.push_back(v);
    }
    bool empty() const { return value.empty(); }
};

/// Progress lines (every 100 iterations); may be empty.
using ProgressFn = std::function<void(const std::string&)>;

/// Training views from stored images, one per training camera in order.
TrainingData training_data(const io::SyntheticScene& scene, std::vector<Image> images);
/// Training views rendered from the truth set and passed through 8-bit quantization,
/// matching what the scene files on disk contain.
TrainingData training_data(const io::SyntheticScene& scene);

/// 0.2 x the median distance from the training cameras to the scene centre.
double default_d_min(const TrainingData& data);

// ---- direct Gaussian optimization -------------------------------------------

/// True with probability p / (1 + p).
bool pick_pseudo_view(double p, std::mt19937_64& rng);

/// Clones (small) or splits (large) Gaussians whose mean screen-gradient norm
/// exceeds the threshold, then prunes low opacities. `source` receives, per
/// output row, the input row it was kept from, or -1 for new rows.
GaussianSet densify_and_prune(const GaussianSet& set, const std::vector<double>& mean_grad_norm,
                              const DensifyConfig& config, double scene_extent, std::mt19937_64& rng,
                              std::vector<std::ptrdiff_t>* source = nullptr);

struct GsRun {
    GaussianSet result;
    Curve loss;
    std::size_t pseudo_steps = 0;
};

/// Adam on raw attributes (means, log scales, quaternions, logit opacities,
/// sh). Each step supervises on a pseudo view with probability p / (1 + p),
/// otherwise on the next training view in turn.
GsRun optimize_gs(const GaussianSet& initial, const TrainingData& data, const std::vector<View>& pseudo, double p,
                  const GsConfig& config, double d_min, std::mt19937_64& rng, std::size_t log_every = 10,
                  const ProgressFn& progress = {});

/// Random seeding inside the bounds followed by optimize_gs without pseudo views.
GsRun run_vanilla_gs(const TrainingData& data, const GsConfig& config, double d_min, std::mt19937_64& rng,
                     std::size_t log_every = 10, const ProgressFn& progress = {});

// ---- generator fitting -------------------------------------------------------

/// Adam on the mean network: chamfer(generated means, targets) with z re-perturbed every step.
Curve fit_means(dip::Generator& gen, const dip::NoisePyramid& z, const std::vector<Vec3>& targets, double sigma,
                std::size_t iterations, double lr, std::mt19937_64& rng, std::size_t log_every = 10);

/// Adam on the scale network: MSE against the 3-NN mean distance of the generated means.
Curve fit_scales(dip::Generator& gen, const dip::NoisePyramid& z, double sigma, std::size_t iterations, double lr,
                 std::mt19937_64& rng, std::size_t log_every = 10);

/// AdamW on all five networks against the training views plus regularizers.
Curve optimize_dip(dip::Generator& gen, const dip::NoisePyramid& z, const TrainingData& data, double sigma,
                   const loss::LossWeights& weights, const StageConfig& config, std::mt19937_64& rng,
                   std::size_t log_every = 10, const ProgressFn& progress = {});

// ---- post-processing ---------------------------------------------------------

/// `per_view` poses per training camera, interpolated between neighbouring
/// training poses and jittered on an orbit around the scene centre.
std::vector<Camera> pseudo_cameras(const std::vector<Camera>& train, const Vec3& center, std::size_t per_view,
                                   double jitter_degrees, std::mt19937_64& rng);

/// Renders frozen pseudo ground truth from `generated` and refines it with optimize_gs.
GsRun postprocess_gs(const GaussianSet& generated, const TrainingData& data, const std::vector<Camera>& pseudo_poses,
                     double p, const GsConfig& config, double d_min, std::mt19937_64& rng, std::size_t log_every = 10,
                     const ProgressFn& progress = {});

// ---- stages ------------------------------------------------------------------

struct StageReport {
    std::size_t stage = 0;  // 1-based; 0 is the initial estimate
    double sigma = 0;
    std::size_t gaussians_in = 0;
    std::size_t grid_side = 0;
    std::size_t gaussians_generated = 0;
    std::size_t gaussians_out = 0;
    Curve cd, scale, dip, post;
    std::map<std::string, double> metrics;

    /// One JSON object, no trailing newline.
    std::string to_json() const;
};

struct StageOutput {
    StageReport report;
    GaussianSet generated;  // f(z) before post-processing
    GaussianSet result;
    dip::Generator generator;
};

/// One DIP fit + post-process stage at noise level sigma.
StageOutput run_stage(const GaussianSet& input, const TrainingData& data, const PipelineConfig& config,
                      std::size_t stage_index, double sigma, const ProgressFn& progress = {});

struct RunCallbacks {
    /// Called after the initial estimate (stage 0, no generator) and after every stage.
    std::function<void(const StageReport&, const GaussianSet&, const dip::Generator*)> on_stage;
    /// Optional metrics recorded into each report.
    std::function<std::map<std::string, double>(const GaussianSet&)> evaluate;
    ProgressFn progress;
};

struct RunResult {
    GaussianSet initial;
    std::vector<GaussianSet> stages;
    std::vector<StageReport> reports;  // reports[0] is the initial estimate

    const GaussianSet& final_set() const { return stages.empty() ? initial : stages.back(); }
};

/// Initial estimate followed by one stage per schedule entry, each stage
/// starting from the previous stage's output.
RunResult run_coarse_to_fine(const TrainingData& data, const PipelineConfig& config, const RunCallbacks& callbacks = {});

/// Iterations of render-based optimization a full run performs, for equal-budget baselines.
std::size_t total_iterations(const PipelineConfig& config);

}  // namespace dipgs::pipeline
