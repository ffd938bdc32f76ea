// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/dip/generator.hpp"
#include "dipgs/loss/losses.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace dipgs::pipeline {

struct DensifyConfig {
    std::size_t interval = 100;
    /// Densification runs for iterations in [start, until_fraction * iterations).
    std::size_t start = 100;
    double until_fraction = 0.75;
    /// Mean screen-space (NDC) gradient norm above which a Gaussian is cloned or split.
    double grad_threshold = 2e-4;
    /// Split instead of clone when the largest scale exceeds this fraction of the scene diagonal.
    double split_fraction = 0.01;
    double split_factor = 1.6;
    double prune_opacity = 0.005;
    std::size_t max_gaussians = 20000;
    bool enabled = true;
};

/// Direct Gaussian optimization, used for the initial estimate and for post-processing.
struct GsConfig {
    std::size_t iterations = 3000;
    std::size_t initial_count = 1000;  // random seeding only
    double initial_opacity = 0.1;
    double lr_mean = 1.6e-3;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_sh = 2.5e-2;
    loss::LossWeights weights;
    DensifyConfig densify;
};

struct StageConfig {
    std::size_t iters_cd = 3000;
    std::size_t iters_scale = 3000;
    std::size_t iters_dip = 4000;
    std::size_t iters_post = 2000;
    double lr_mean = 2e-4;
    double lr_other = 1e-3;
    double lr_cd = 5e-3;
    double lr_scale_fit = 1e-3;
    double weight_decay = 1e-5;
    loss::LossWeights dip_weights;
    /// Post-processing reuses GsConfig learning rates with these weights.
    loss::LossWeights post_weights;
    double dominance = 0.1;
    double grid_ratio = 0.75;
    double prune_opacity = 0.005;
    /// Pseudo views per training view for post-processing.
    std::size_t pseudo_per_view = 2;
    double pseudo_jitter_degrees = 3.0;
    /// Skip the mean/scale initialization of the generator (ablation).
    bool skip_init = false;
};

struct Schedule {
    std::vector<double> sigmas{0.0333, 0.01, 0.005, 0.002};

    /// Throws std::invalid_argument if empty, negative, or increasing.
    void validate() const;
};

struct PipelineConfig {
    std::string preset = "synthetic";
    std::uint64_t seed = 0;
    GsConfig init;
    StageConfig stage;
    Schedule schedule;
    dip::NoiseDims noise;
    std::array<std::size_t, 3> channels{16, 32, 64};
    /// Occlusion near depth; <= 0 picks 0.2 x the median training-camera distance to the scene centre.
    double d_min = 0.0;
    /// Draw a fresh base noise per stage instead of reusing one.
    bool resample_noise = false;
    /// Loss-curve sampling interval in manifests.
    std::size_t log_every = 10;

    void validate() const;
};

/// Named presets: blender, llff, dtu, synthetic (llff weights).
PipelineConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Dotted key access to every scalar setting ("stage.iters_dip", "init.weights.opacity", ...).
static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed and counts share one field kind");
using FieldRef = std::variant<double*, std::size_t*, bool*>;
std::vector<std::pair<std::string, FieldRef>> config_fields(PipelineConfig& config);

/// Sets one field from text; "schedule" takes a comma-separated list. Throws
/// std::invalid_argument on unknown keys or malformed values.
void set_field(PipelineConfig& config, std::string_view key, std::string_view value);

/// Applies a JSON object of {key: value} overrides (numbers, booleans, or
/// hex-float strings; "schedule" an array).
void apply_config_json(PipelineConfig& config, const std::string& text);
std::string config_to_json(const PipelineConfig& config);

}  // namespace dipgs::pipeline
