// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/evaluate.hpp"

#include "dipgs/loss/losses.hpp"

#include <chrono>
#include <cstdio>
#include <json.hpp>

namespace dipgs::io {

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["psnr"] = psnr;
    j["ssim"] = ssim;
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["gaussian_count"] = gaussian_count;
    j["wall_seconds"] = wall_seconds;
    return j.dump();
}

std::string EvalReport::to_table() const {
    std::string out;
    char line[96];
    std::snprintf(line, sizeof(line), "%-6s %10s %8s\n", "view", "PSNR", "SSIM");
    out += line;
    for (std::size_t i = 0; i < psnr.size(); ++i) {
        std::snprintf(line, sizeof(line), "%-6zu %10.4f %8.5f\n", i, psnr[i], ssim[i]);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-6s %10.4f %8.5f\n", "mean", mean_psnr, mean_ssim);
    out += line;
    std::snprintf(line, sizeof(line), "gaussians %zu, %.2f s\n", gaussian_count, wall_seconds);
    out += line;
    return out;
}

EvalReport evaluate_against(const scene::GaussianSet& candidate, const std::vector<scene::Camera>& cameras,
                            const std::vector<scene::Image>& references, const scene::Vec3& background,
                            const render::RenderOptions& options) {
    if (cameras.size() != references.size()) throw std::invalid_argument("evaluate: camera/reference count mismatch");
    const auto start = std::chrono::steady_clock::now();
    EvalReport r;
    r.gaussian_count = candidate.size();
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const auto img = render::render(candidate, cameras[v], background, options).pixels;
        r.psnr.push_back(loss::psnr(img, references[v]));
        r.ssim.push_back(loss::ssim(img, references[v]));
    }
    for (std::size_t v = 0; v < r.psnr.size(); ++v) {
        r.mean_psnr += r.psnr[v];
        r.mean_ssim += r.ssim[v];
    }
    if (!r.psnr.empty()) {
        r.mean_psnr /= static_cast<double>(r.psnr.size());
        r.mean_ssim /= static_cast<double>(r.ssim.size());
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

EvalReport evaluate(const scene::GaussianSet& candidate, const SyntheticScene& scene,
                    const render::RenderOptions& options) {
    std::vector<scene::Image> refs;
    for (const auto& cam : scene.test_cameras) refs.push_back(render::render(scene.truth, cam, scene.background, options).pixels);
    return evaluate_against(candidate, scene.test_cameras, refs, scene.background, options);
}

}  // namespace dipgs::io
