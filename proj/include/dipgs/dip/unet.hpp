// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/dip/noise.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace dipgs::dip {

struct UNetConfig {
    std::size_t out_channels = 1;
    std::array<std::size_t, 3> channels{16, 32, 64};
    NoiseDims noise;
};

/// Encoder: three stride-2 conv blocks, noise level k joined to the input of
/// block k and level 4 to the bottleneck. Decoder: bilinear upsample, concat
/// with the encoder features of that resolution, conv block. A 1 x 1 conv
/// produces the raw output. Every block is conv 3x3 -> normalize -> leaky ReLU.
class UNet {
public:
    struct Block {
        diff::Tensor kernel, bias, gamma, beta;
    };

    UNet() = default;
    /// Kaiming-uniform conv weights, zero biases, identity affine.
    UNet(const UNetConfig& config, std::mt19937_64& rng);
    /// Every parameter zero.
    static UNet zeros(const UNetConfig& config);

    const UNetConfig& config() const { return config_; }

    /// n x n x out_channels.
    diff::Tensor forward(const NoisePyramid& z) const;

    std::vector<std::pair<std::string, diff::Tensor>> named_parameters() const;
    std::vector<diff::Tensor> parameters() const;

    /// Output bias, for heads that want a non-zero starting point.
    diff::Tensor& head_bias() { return head_bias_; }

private:
    UNetConfig config_;
    std::array<Block, 3> enc_;
    std::array<Block, 3> dec_;
    diff::Tensor head_kernel_, head_bias_;
};

}  // namespace dipgs::dip
