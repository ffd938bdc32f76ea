// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"

#include <array>
#include <cstdint>
#include <random>

namespace dipgs::dip {

/// Channel counts of the four noise levels (full, 1/2, 1/4, 1/8 resolution).
struct NoiseDims {
    std::size_t input = 32;
    std::size_t d2 = 4, d3 = 4, d4 = 4;

    std::array<std::size_t, 4> as_array() const { return {input, d2, d3, d4}; }
    bool operator==(const NoiseDims&) const = default;
};

inline constexpr double kNoiseHigh = 0.1;

struct NoisePyramid {
    std::array<diff::Tensor, 4> levels;
    std::uint64_t seed = 0;

    std::size_t side() const { return levels[0].dim(0); }
};

/// Levels n x n x input, n/2 x n/2 x d2, n/4 x n/4 x d3, n/8 x n/8 x d4 drawn
/// from U(0, 0.1). Throws std::invalid_argument unless n is a positive multiple of 8.
NoisePyramid sample_noise(std::uint64_t seed, std::size_t n, const NoiseDims& dims = {});

/// z + sigma * u with u ~ N(0, 1) drawn from `rng`; z itself is left untouched.
NoisePyramid perturb(const NoisePyramid& z, double sigma, std::mt19937_64& rng);

}  // namespace dipgs::dip
