// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/dip/unet.hpp"
#include "dipgs/scene/gaussians.hpp"

#include <array>
#include <filesystem>
#include <random>

namespace dipgs::dip {

enum class Head { mean = 0, opacity = 1, scale = 2, rotation = 3, sh = 4 };
inline constexpr std::array<Head, 5> kHeads{Head::mean, Head::opacity, Head::scale, Head::rotation, Head::sh};
const char* head_name(Head head);
std::size_t head_channels(Head head);

inline constexpr double kScaleRawMin = -15.0;
inline constexpr double kScaleRawMax = 8.0;

struct GeneratorConfig {
    std::size_t side = 8;
    NoiseDims noise;
    std::array<std::size_t, 3> channels{16, 32, 64};
    /// s = exp(clamp(raw, -15, 8)) * scale_unit
    double scale_unit = 1.0;
    /// Starting values through the head biases.
    double initial_opacity = 0.1;
    double initial_scale = 0.05;
};

/// Smallest multiple of 8 whose square is at least ratio * count (minimum 8).
std::size_t grid_side_for(std::size_t count, double ratio);

struct ParameterGrids {
    diff::Tensor mean;      // n x n x 3
    diff::Tensor opacity;   // n x n x 1
    diff::Tensor scale;     // n x n x 3
    diff::Tensor rotation;  // n x n x 4
    diff::Tensor sh;        // n x n x 3

    std::size_t side() const { return mean.dim(0); }
};

/// Five independent U-Nets, one per Gaussian attribute.
class Generator {
public:
    Generator() = default;
    Generator(const GeneratorConfig& config, const scene::SceneBounds& bounds, std::mt19937_64& rng);

    const GeneratorConfig& config() const { return config_; }
    const scene::SceneBounds& bounds() const { return bounds_; }

    UNet& net(Head head) { return nets_[static_cast<std::size_t>(head)]; }
    const UNet& net(Head head) const { return nets_[static_cast<std::size_t>(head)]; }

    /// Raw output of one head followed by its activation.
    diff::Tensor head(Head head, const NoisePyramid& z) const;
    ParameterGrids generate(const NoisePyramid& z) const;

    /// Names are "<head>.<layer>.<param>".
    std::vector<std::pair<std::string, diff::Tensor>> named_parameters() const;

    void save(const std::filesystem::path& path) const;
    /// Overwrites parameter values from a checkpoint written by save(); shapes must match.
    void load(const std::filesystem::path& path);

private:
    GeneratorConfig config_;
    scene::SceneBounds bounds_;
    std::array<UNet, 5> nets_;
};

/// Applies a head's output activation to a raw grid.
diff::Tensor activate_head(Head head, const diff::Tensor& raw, const scene::SceneBounds& bounds, double scale_unit);

/// Row-major flattening: grid entry (i, j) becomes Gaussian i * n + j. Values are copied verbatim.
scene::GaussianTensors grid_to_gaussians(const ParameterGrids& grids);
scene::GaussianSet grid_to_set(const ParameterGrids& grids);

}  // namespace dipgs::dip
