// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/generator.hpp"

#include "dipgs/diff/ops.hpp"
#include "dipgs/dip/checkpoint.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace dipgs::dip {

using diff::Tensor;

const char* head_name(Head head) {
    switch (head) {
    case Head::mean: return "mean";
    case Head::opacity: return "opacity";
    case Head::scale: return "scale";
    case Head::rotation: return "rotation";
    case Head::sh: return "sh";
    }
    return "?";
}

std::size_t head_channels(Head head) {
    switch (head) {
    case Head::opacity: return 1;
    case Head::rotation: return 4;
    default: return 3;
    }
}

std::size_t grid_side_for(std::size_t count, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("grid ratio must lie in (0, 1]");
    const double target = ratio * static_cast<double>(count);
    std::size_t n = 8;
    while (static_cast<double>(n * n) < target) n += 8;
    return n;
}

Generator::Generator(const GeneratorConfig& config, const scene::SceneBounds& bounds, std::mt19937_64& rng)
    : config_(config), bounds_(bounds) {
    if (config.side == 0 || config.side % 8 != 0) throw std::invalid_argument("generator side must be a multiple of 8");
    if (!(config.initial_opacity > 0 && config.initial_opacity < 1)) throw std::invalid_argument("initial opacity must lie in (0, 1)");
    if (!(config.initial_scale > 0 && config.scale_unit > 0)) throw std::invalid_argument("scales must be positive");
    bounds_.validate();
    for (Head h : kHeads) {
        UNetConfig uc;
        uc.out_channels = head_channels(h);
        uc.channels = config.channels;
        uc.noise = config.noise;
        nets_[static_cast<std::size_t>(h)] = UNet(uc, rng);
    }
    auto opacity_bias = net(Head::opacity).head_bias().mutable_values();
    opacity_bias[0] = std::log(config.initial_opacity / (1.0 - config.initial_opacity));
    for (double& b : net(Head::scale).head_bias().mutable_values()) b = std::log(config.initial_scale / config.scale_unit);
    net(Head::rotation).head_bias().mutable_values()[0] = 1.0;
}

Tensor activate_head(Head head, const Tensor& raw, const scene::SceneBounds& bounds, double scale_unit) {
    switch (head) {
    case Head::mean:
        return diff::channel_affine(diff::activation(raw, diff::Activation::tanh), bounds.half_extent, bounds.center);
    case Head::opacity:
        return diff::activation(raw, diff::Activation::sigmoid);
    case Head::scale: {
        Tensor s = diff::activation(diff::clamp(raw, kScaleRawMin, kScaleRawMax), diff::Activation::exp);
        return scale_unit == 1.0 ? s : diff::scale(s, scale_unit);
    }
    case Head::rotation:
    case Head::sh:
        return raw;
    }
    return raw;
}

Tensor Generator::head(Head h, const NoisePyramid& z) const {
    if (z.side() != config_.side) throw diff::ShapeError("noise side does not match the generator grid");
    return activate_head(h, net(h).forward(z), bounds_, config_.scale_unit);
}

ParameterGrids Generator::generate(const NoisePyramid& z) const {
    ParameterGrids g;
    g.mean = head(Head::mean, z);
    g.opacity = head(Head::opacity, z);
    g.scale = head(Head::scale, z);
    g.rotation = head(Head::rotation, z);
    g.sh = head(Head::sh, z);
    return g;
}

std::vector<std::pair<std::string, Tensor>> Generator::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (Head h : kHeads) {
        for (auto& [name, t] : net(h).named_parameters()) out.emplace_back(std::string(head_name(h)) + "." + name, t);
    }
    return out;
}

void Generator::save(const std::filesystem::path& path) const {
    std::vector<NamedArray> arrays;
    for (const auto& [name, t] : named_parameters()) {
        arrays.push_back({name, t.shape(), {t.values().begin(), t.values().end()}});
    }
    write_checkpoint(path, arrays);
}

void Generator::load(const std::filesystem::path& path) {
    std::map<std::string, NamedArray> by_name;
    for (auto& a : read_checkpoint(path)) by_name.emplace(a.name, std::move(a));
    for (auto& [name, t] : named_parameters()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor " + name);
        if (it->second.shape != t.shape()) {
            throw CheckpointError("tensor " + name + " has shape " + diff::to_string(it->second.shape) +
                                  ", expected " + diff::to_string(t.shape()));
        }
        Tensor target = t;
        auto dst = target.mutable_values();
        std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
    }
}

scene::GaussianTensors grid_to_gaussians(const ParameterGrids& g) {
    const std::size_t n = g.side();
    const std::size_t count = n * n;
    scene::GaussianTensors t;
    t.means = diff::reshape(g.mean, {count, 3});
    t.scales = diff::reshape(g.scale, {count, 3});
    t.rotations = diff::reshape(g.rotation, {count, 4});
    t.opacities = diff::reshape(g.opacity, {count, 1});
    t.sh = diff::reshape(g.sh, {count, 3});
    return t;
}

scene::GaussianSet grid_to_set(const ParameterGrids& grids) { return scene::to_set(grid_to_gaussians(grids)); }

}  // namespace dipgs::dip
