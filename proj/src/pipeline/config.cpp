// SPDX-License-Identifier: Apache-2.0
#include "dipgs/pipeline/config.hpp"

#include "dipgs/io/hexfloat.hpp"

#include <charconv>
#include <json.hpp>
#include <stdexcept>

namespace dipgs::pipeline {

void Schedule::validate() const {
    if (sigmas.empty()) throw std::invalid_argument("schedule needs at least one stage");
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] >= 0.0)) throw std::invalid_argument("schedule sigmas must be non-negative");
        if (i > 0 && sigmas[i] > sigmas[i - 1]) {
            throw std::invalid_argument("schedule must be non-increasing: sigma[" + std::to_string(i) + "] = " +
                                        std::to_string(sigmas[i]) + " > " + std::to_string(sigmas[i - 1]));
        }
    }
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void validate_gs(const GsConfig& g, const char* name) {
    const std::string p = name;
    require(g.iterations > 0, p + ".iterations must be positive");
    require(g.initial_count > 0, p + ".initial_count must be positive");
    require(g.initial_opacity > 0 && g.initial_opacity < 1, p + ".initial_opacity must lie in (0, 1)");
    for (double lr : {g.lr_mean, g.lr_scale, g.lr_rotation, g.lr_opacity, g.lr_sh}) require(lr > 0, p + " learning rates must be positive");
    g.weights.validate();
    require(g.densify.interval > 0, p + ".densify.interval must be positive");
    require(g.densify.split_factor > 1, p + ".densify.split_factor must exceed 1");
    require(g.densify.prune_opacity >= 0 && g.densify.prune_opacity < 1, p + ".densify.prune_opacity must lie in [0, 1)");
}

void add_weights(std::vector<std::pair<std::string, FieldRef>>& f, const std::string& p, loss::LossWeights& w) {
    f.emplace_back(p + ".opacity", &w.opacity);
    f.emplace_back(p + ".scale", &w.scale);
    f.emplace_back(p + ".occlusion", &w.occlusion);
    f.emplace_back(p + ".lambda_ssim", &w.lambda_ssim);
}

void add_gs(std::vector<std::pair<std::string, FieldRef>>& f, const std::string& p, GsConfig& g) {
    f.emplace_back(p + ".iterations", &g.iterations);
    f.emplace_back(p + ".initial_count", &g.initial_count);
    f.emplace_back(p + ".initial_opacity", &g.initial_opacity);
    f.emplace_back(p + ".lr_mean", &g.lr_mean);
    f.emplace_back(p + ".lr_scale", &g.lr_scale);
    f.emplace_back(p + ".lr_rotation", &g.lr_rotation);
    f.emplace_back(p + ".lr_opacity", &g.lr_opacity);
    f.emplace_back(p + ".lr_sh", &g.lr_sh);
    add_weights(f, p + ".weights", g.weights);
    f.emplace_back(p + ".densify.enabled", &g.densify.enabled);
    f.emplace_back(p + ".densify.interval", &g.densify.interval);
    f.emplace_back(p + ".densify.start", &g.densify.start);
    f.emplace_back(p + ".densify.until_fraction", &g.densify.until_fraction);
    f.emplace_back(p + ".densify.grad_threshold", &g.densify.grad_threshold);
    f.emplace_back(p + ".densify.split_fraction", &g.densify.split_fraction);
    f.emplace_back(p + ".densify.split_factor", &g.densify.split_factor);
    f.emplace_back(p + ".densify.prune_opacity", &g.densify.prune_opacity);
    f.emplace_back(p + ".densify.max_gaussians", &g.densify.max_gaussians);
}

double parse_double(std::string_view text, std::string_view key) {
    if (text.find("0x") != std::string_view::npos) return io::from_hexfloat(text);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("bad number for " + std::string(key) + ": \"" + std::string(text) + "\"");
    }
    return v;
}

std::uint64_t parse_unsigned(std::string_view text, std::string_view key) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("bad integer for " + std::string(key) + ": \"" + std::string(text) + "\"");
    }
    return v;
}

}  // namespace

void PipelineConfig::validate() const {
    validate_gs(init, "init");
    schedule.validate();
    const auto& s = stage;
    require(s.iters_cd > 0 && s.iters_scale > 0 && s.iters_dip > 0 && s.iters_post > 0, "stage iteration counts must be positive");
    for (double lr : {s.lr_mean, s.lr_other, s.lr_cd, s.lr_scale_fit}) require(lr > 0, "stage learning rates must be positive");
    require(s.weight_decay >= 0, "weight decay must be non-negative");
    require(s.dominance >= 0, "dominance factor must be non-negative");
    require(s.grid_ratio > 0 && s.grid_ratio <= 1, "grid_ratio must lie in (0, 1]");
    require(s.prune_opacity >= 0 && s.prune_opacity < 1, "prune_opacity must lie in [0, 1)");
    s.dip_weights.validate();
    s.post_weights.validate();
    require(noise.input > 0 && noise.d2 > 0 && noise.d3 > 0 && noise.d4 > 0, "noise channel counts must be positive");
    require(channels[0] > 0 && channels[1] > 0 && channels[2] > 0, "U-Net channel counts must be positive");
    require(log_every > 0, "log_every must be positive");
    require(d_min >= 0, "d_min must be non-negative (0 selects the automatic value)");
}

PipelineConfig preset(std::string_view name) {
    PipelineConfig c;
    c.preset = std::string(name);
    // (beta_init, gamma_init, delta_init), (beta, gamma, delta), (beta_post, gamma_post, delta_post)
    auto set = [&c](std::array<double, 3> init, std::array<double, 3> dip, std::array<double, 3> post) {
        c.init.weights.opacity = init[0];
        c.init.weights.scale = init[1];
        c.init.weights.occlusion = init[2];
        c.stage.dip_weights.opacity = dip[0];
        c.stage.dip_weights.scale = dip[1];
        c.stage.dip_weights.occlusion = dip[2];
        c.stage.post_weights.opacity = post[0];
        c.stage.post_weights.scale = post[1];
        c.stage.post_weights.occlusion = post[2];
    };
    if (name == "blender") {
        set({0.05, 0, 0}, {0.02, 0, 0}, {0.02, 0, 0});
    } else if (name == "llff" || name == "synthetic") {
        set({0.1, 0, 0}, {0.02, 0, 0}, {0.05, 0, 0});
    } else if (name == "dtu") {
        set({0.1, 0.1, 20}, {0.02, 0.01, 20}, {0.05, 0.01, 20});
    } else {
        throw std::invalid_argument("unknown preset \"" + std::string(name) + "\" (expected blender, llff, dtu or synthetic)");
    }
    return c;
}

std::vector<std::string> preset_names() { return {"blender", "llff", "dtu", "synthetic"}; }

std::vector<std::pair<std::string, FieldRef>> config_fields(PipelineConfig& c) {
    std::vector<std::pair<std::string, FieldRef>> f;
    f.emplace_back("seed", &c.seed);
    f.emplace_back("d_min", &c.d_min);
    f.emplace_back("resample_noise", &c.resample_noise);
    f.emplace_back("log_every", &c.log_every);
    f.emplace_back("noise.input", &c.noise.input);
    f.emplace_back("noise.d2", &c.noise.d2);
    f.emplace_back("noise.d3", &c.noise.d3);
    f.emplace_back("noise.d4", &c.noise.d4);
    f.emplace_back("channels.1", &c.channels[0]);
    f.emplace_back("channels.2", &c.channels[1]);
    f.emplace_back("channels.3", &c.channels[2]);
    add_gs(f, "init", c.init);
    auto& s = c.stage;
    f.emplace_back("stage.iters_cd", &s.iters_cd);
    f.emplace_back("stage.iters_scale", &s.iters_scale);
    f.emplace_back("stage.iters_dip", &s.iters_dip);
    f.emplace_back("stage.iters_post", &s.iters_post);
    f.emplace_back("stage.lr_mean", &s.lr_mean);
    f.emplace_back("stage.lr_other", &s.lr_other);
    f.emplace_back("stage.lr_cd", &s.lr_cd);
    f.emplace_back("stage.lr_scale_fit", &s.lr_scale_fit);
    f.emplace_back("stage.weight_decay", &s.weight_decay);
    add_weights(f, "stage.dip_weights", s.dip_weights);
    add_weights(f, "stage.post_weights", s.post_weights);
    f.emplace_back("stage.dominance", &s.dominance);
    f.emplace_back("stage.grid_ratio", &s.grid_ratio);
    f.emplace_back("stage.prune_opacity", &s.prune_opacity);
    f.emplace_back("stage.pseudo_per_view", &s.pseudo_per_view);
    f.emplace_back("stage.pseudo_jitter_degrees", &s.pseudo_jitter_degrees);
    f.emplace_back("stage.skip_init", &s.skip_init);
    return f;
}

void set_field(PipelineConfig& c, std::string_view key, std::string_view value) {
    if (key == "schedule") {
        std::vector<double> sigmas;
        std::size_t start = 0;
        while (start <= value.size()) {
            const std::size_t comma = value.find(',', start);
            const std::size_t end = comma == std::string_view::npos ? value.size() : comma;
            sigmas.push_back(parse_double(value.substr(start, end - start), key));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        c.schedule.sigmas = std::move(sigmas);
        return;
    }
    for (auto& [name, ref] : config_fields(c)) {
        if (name != key) continue;
        if (auto* d = std::get_if<double*>(&ref)) {
            **d = parse_double(value, key);
        } else if (auto* z = std::get_if<std::size_t*>(&ref)) {
            **z = static_cast<std::size_t>(parse_unsigned(value, key));
        } else if (auto* b = std::get_if<bool*>(&ref)) {
            if (value == "true" || value == "1") {
                **b = true;
            } else if (value == "false" || value == "0") {
                **b = false;
            } else {
                throw std::invalid_argument("bad boolean for " + std::string(key));
            }
        }
        return;
    }
    throw std::invalid_argument("unknown setting \"" + std::string(key) + "\"");
}

void apply_config_json(PipelineConfig& c, const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "preset") continue;  // chosen before the file is applied
        if (key == "schedule") {
            if (!value.is_array()) throw std::invalid_argument("schedule must be an array");
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ",";
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            set_field(c, key, joined);
        } else if (value.is_string()) {
            set_field(c, key, value.get<std::string>());
        } else if (value.is_number() || value.is_boolean()) {
            set_field(c, key, value.dump());
        } else {
            throw std::invalid_argument("config value for " + key + " must be a number, boolean or string");
        }
    }
}

std::string config_to_json(const PipelineConfig& config) {
    PipelineConfig c = config;
    nlohmann::json doc;
    doc["preset"] = c.preset;
    doc["schedule"] = c.schedule.sigmas;
    for (auto& [name, ref] : config_fields(c)) {
        std::visit([&doc, &name](auto* p) { doc[name] = *p; }, ref);
    }
    return doc.dump(1) + "\n";
}

}  // namespace dipgs::pipeline
