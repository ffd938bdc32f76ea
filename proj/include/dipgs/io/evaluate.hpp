// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/io/scene_io.hpp"
#include "dipgs/render/splat.hpp"

#include <string>
#include <vector>

namespace dipgs::io {

struct EvalReport {
    std::vector<double> psnr;  // per test view
    std::vector<double> ssim;
    double mean_psnr = 0;
    double mean_ssim = 0;
    std::size_t gaussian_count = 0;
    double wall_seconds = 0;

    std::string to_json() const;
    /// Aligned plain-text table, one row per view plus a mean row.
    std::string to_table() const;
};

/// Renders every test camera with `candidate` and with the scene truth and
/// compares the two.
EvalReport evaluate(const scene::GaussianSet& candidate, const SyntheticScene& scene,
                    const render::RenderOptions& options = {});

/// Mean PSNR/SSIM of `candidate` against precomputed reference images.
EvalReport evaluate_against(const scene::GaussianSet& candidate, const std::vector<scene::Camera>& cameras,
                            const std::vector<scene::Image>& references, const scene::Vec3& background,
                            const render::RenderOptions& options = {});

}  // namespace dipgs::io
