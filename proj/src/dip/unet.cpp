// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/unet.hpp"

#include "dipgs/diff/ops.hpp"

#include <cmath>

namespace dipgs::dip {

namespace {

using diff::Tensor;

UNet::Block make_block(std::size_t k, std::size_t in, std::size_t out, std::mt19937_64* rng) {
    std::vector<double> w(k * k * in * out, 0.0);
    if (rng) {
        // Kaiming-uniform for leaky ReLU with slope 0.2.
        const double gain = std::sqrt(2.0 / (1.0 + diff::kLeakySlope * diff::kLeakySlope));
        const double bound = gain * std::sqrt(3.0 / static_cast<double>(k * k * in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : w) v = dist(*rng);
    }
    UNet::Block b;
    b.kernel = Tensor::parameter({k, k, in, out}, std::move(w));
    b.bias = Tensor::parameter({out}, std::vector<double>(out, 0.0));
    b.gamma = Tensor::parameter({out}, std::vector<double>(out, rng ? 1.0 : 0.0));
    b.beta = Tensor::parameter({out}, std::vector<double>(out, 0.0));
    return b;
}

Tensor run_block(const UNet::Block& b, const Tensor& x, std::size_t stride) {
    Tensor y = diff::conv2d(x, b.kernel, b.bias, stride, diff::Padding::same);
    y = diff::normalize(y, b.gamma, b.beta);
    return diff::activation(y, diff::Activation::leaky_relu);
}

Tensor join(const Tensor& a, const Tensor& b) {
    const std::array<Tensor, 2> parts{a, b};
    return diff::concat_channels(parts);
}

void build(const UNetConfig& c, std::mt19937_64* rng, std::array<UNet::Block, 3>& enc,
           std::array<UNet::Block, 3>& dec, Tensor& head_kernel, Tensor& head_bias) {
    const auto& ch = c.channels;
    const auto nz = c.noise.as_array();
    enc[0] = make_block(3, nz[0], ch[0], rng);
    enc[1] = make_block(3, ch[0] + nz[1], ch[1], rng);
    enc[2] = make_block(3, ch[1] + nz[2], ch[2], rng);
    // dec[2] runs at 1/4 resolution, dec[0] at full resolution.
    dec[2] = make_block(3, ch[2] + nz[3] + ch[1], ch[1], rng);
    dec[1] = make_block(3, ch[1] + ch[0], ch[0], rng);
    dec[0] = make_block(3, ch[0] + nz[0], ch[0], rng);
    std::vector<double> w(ch[0] * c.out_channels, 0.0);
    if (rng) {
        const double bound = std::sqrt(3.0 / static_cast<double>(ch[0]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : w) v = dist(*rng);
    }
    head_kernel = Tensor::parameter({1, 1, ch[0], c.out_channels}, std::move(w));
    head_bias = Tensor::parameter({c.out_channels}, std::vector<double>(c.out_channels, 0.0));
}

}  // namespace

UNet::UNet(const UNetConfig& config, std::mt19937_64& rng) : config_(config) {
    build(config_, &rng, enc_, dec_, head_kernel_, head_bias_);
}

UNet UNet::zeros(const UNetConfig& config) {
    UNet net;
    net.config_ = config;
    build(config, nullptr, net.enc_, net.dec_, net.head_kernel_, net.head_bias_);
    return net;
}

Tensor UNet::forward(const NoisePyramid& z) const {
    const Tensor e1 = run_block(enc_[0], z.levels[0], 2);
    const Tensor e2 = run_block(enc_[1], join(e1, z.levels[1]), 2);
    const Tensor e3 = run_block(enc_[2], join(e2, z.levels[2]), 2);
    const Tensor bottleneck = join(e3, z.levels[3]);
    const Tensor d3 = run_block(dec_[2], join(diff::upsample_bilinear(bottleneck), e2), 1);
    const Tensor d2 = run_block(dec_[1], join(diff::upsample_bilinear(d3), e1), 1);
    const Tensor d1 = run_block(dec_[0], join(diff::upsample_bilinear(d2), z.levels[0]), 1);
    return diff::conv2d(d1, head_kernel_, head_bias_, 1, diff::Padding::same);
}

std::vector<std::pair<std::string, Tensor>> UNet::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    const auto add_block = [&out](const std::string& prefix, const Block& b) {
        out.emplace_back(prefix + ".kernel", b.kernel);
        out.emplace_back(prefix + ".bias", b.bias);
        out.emplace_back(prefix + ".gamma", b.gamma);
        out.emplace_back(prefix + ".beta", b.beta);
    };
    for (std::size_t i = 0; i < 3; ++i) add_block("enc" + std::to_string(i + 1), enc_[i]);
    for (std::size_t i = 0; i < 3; ++i) add_block("dec" + std::to_string(i + 1), dec_[i]);
    out.emplace_back("head.kernel", head_kernel_);
    out.emplace_back("head.bias", head_bias_);
    return out;
}

std::vector<Tensor> UNet::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

}  // namespace dipgs::dip
