// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/noise.hpp"

#include <stdexcept>
#include <string>

namespace dipgs::dip {

NoisePyramid sample_noise(std::uint64_t seed, std::size_t n, const NoiseDims& dims) {
    if (n == 0 || n % 8 != 0) throw std::invalid_argument("noise grid side must be a positive multiple of 8, got " + std::to_string(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, kNoiseHigh);
    NoisePyramid z;
    z.seed = seed;
    const auto channels = dims.as_array();
    std::size_t side = n;
    for (std::size_t level = 0; level < 4; ++level) {
        std::vector<double> values(side * side * channels[level]);
        for (double& v : values) v = uniform(rng);
        z.levels[level] = diff::Tensor::constant({side, side, channels[level]}, std::move(values));
        side /= 2;
    }
    return z;
}

NoisePyramid perturb(const NoisePyramid& z, double sigma, std::mt19937_64& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("perturb: sigma must be non-negative");
    if (sigma == 0.0) return z;
    std::normal_distribution<double> normal(0.0, 1.0);
    NoisePyramid out;
    out.seed = z.seed;
    for (std::size_t level = 0; level < 4; ++level) {
        const auto& src = z.levels[level];
        std::vector<double> values(src.values().begin(), src.values().end());
        for (double& v : values) v += sigma * normal(rng);
        out.levels[level] = diff::Tensor::constant(src.shape(), std::move(values));
    }
    return out;
}

}  // namespace dipgs::dip
