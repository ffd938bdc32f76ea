// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/scene/gaussians.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipgs::io {

inline constexpr int kSceneFormatVersion = 1;

class SceneFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SyntheticScene {
    scene::GaussianSet truth;
    std::vector<scene::Camera> train_cameras;
    std::vector<scene::Camera> test_cameras;
    scene::Vec3 background{1, 1, 1};
    scene::SceneBounds bounds{{0, 0, 0}, {0.5, 0.5, 0.5}};
    std::uint64_t seed = 0;

    bool operator==(const SyntheticScene&) const = default;
};

struct SynthOptions {
    std::uint64_t seed = 1;
    std::size_t gaussians = 200;
    std::size_t train_views = 3;
    std::size_t test_views = 8;
    std::size_t size = 64;
    double radius = 3.0;
    double fov_x_degrees = 40.0;
    /// Training azimuths are spread over [-train_arc, train_arc], test azimuths over [-test_arc, test_arc].
    double train_arc_degrees = 40.0;
    double test_arc_degrees = 90.0;
};

/// Random Gaussians in the unit cube around the origin, cameras on a sphere
/// of `radius` looking at the origin. Training cameras sit at 20 degrees
/// elevation; test cameras alternate between 10 and 30 degrees, so the two
/// sets never share a pose.
SyntheticScene synth_scene(const SynthOptions& options);

/// Scene files are JSON; every floating-point number is stored as a hex-float
/// string so the round trip is bit-exact.
std::string scene_to_text(const SyntheticScene& scene);
SyntheticScene scene_from_text(const std::string& text);
void save_scene(const std::filesystem::path& path, const SyntheticScene& scene);
SyntheticScene load_scene(const std::filesystem::path& path);

/// Gaussian-set files (".gs") use the same encoding.
std::string gaussians_to_text(const scene::GaussianSet& set);
scene::GaussianSet gaussians_from_text(const std::string& text);
void save_gaussians(const std::filesystem::path& path, const scene::GaussianSet& set);
scene::GaussianSet load_gaussians(const std::filesystem::path& path);

}  // namespace dipgs::io
