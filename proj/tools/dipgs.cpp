// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/checkpoint.hpp"
#include "dipgs/io/atomic_file.hpp"
#include "dipgs/io/evaluate.hpp"
#include "dipgs/io/image_io.hpp"
#include "dipgs/io/scene_io.hpp"
#include "dipgs/pipeline/pipeline.hpp"
#include "dipgs/verify/gradcheck.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dipgs;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void apply_thread_limit() {
    const char* env = std::getenv("DIPGS_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw UsageError(std::string("DIPGS_THREADS must be a positive integer, got '") + env + "'");
    omp_set_num_threads(static_cast<int>(n));
}

fs::path scene_file(const fs::path& p) { return fs::is_directory(p) ? p / "scene.json" : p; }
fs::path scene_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }
fs::path model_file(const fs::path& p) { return fs::is_directory(p) ? p / "final.gs" : p; }

/// A Gaussian file, a run directory (its final.gs), or a scene file (its truth set).
scene::GaussianSet load_model(const fs::path& p) {
    const fs::path file = model_file(p);
    const std::string text = io::read_file(file);
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.value("format", "") == "dipgs-scene") {
        return io::scene_from_text(text).truth;
    }
    return io::gaussians_from_text(text);
}

std::string image_name(const char* split, std::size_t i) { return std::string(split) + "_" + std::to_string(i) + ".ppm"; }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
    io::SynthOptions options;
    fs::path out;
};

int cmd_synth(const SynthArgs& a) {
    if (a.options.gaussians < 1) throw UsageError("--gaussians must be at least 1");
    if (a.options.train_views < 1) throw UsageError("--train-views must be at least 1");
    if (a.options.size < 1) throw UsageError("--size must be at least 1");
    const auto scene = io::synth_scene(a.options);
    ensure_dir(a.out);
    io::save_scene(a.out / "scene.json", scene);
    const auto write_views = [&](const std::vector<scene::Camera>& cams, const char* split) {
        for (std::size_t i = 0; i < cams.size(); ++i) {
            io::write_image(a.out / image_name(split, i), render::render(scene.truth, cams[i], scene.background).pixels);
        }
    };
    write_views(scene.train_cameras, "train");
    write_views(scene.test_cameras, "test");
    std::cerr << "wrote " << a.out.string() << ": " << scene.truth.size() << " Gaussians, "
              << scene.train_cameras.size() << " train and " << scene.test_cameras.size() << " test views\n";
    return 0;
}

// ---- fit ---------------------------------------------------------------------

struct FitArgs {
    fs::path scene, out, config;
    std::string preset = "synthetic";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t stages = 0;
    std::vector<double> sigmas;
    std::vector<std::string> sets;
    bool force = false;
};

pipeline::PipelineConfig build_config(const FitArgs& a) {
    auto config = pipeline::preset(a.preset);
    if (!a.config.empty()) pipeline::apply_config_json(config, io::read_file(a.config));
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        pipeline::set_field(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed_set) config.seed = a.seed;
    if (!a.sigmas.empty()) config.schedule.sigmas = a.sigmas;
    if (a.stages > 0) {
        if (a.stages > config.schedule.sigmas.size()) {
            throw UsageError("--stages " + std::to_string(a.stages) + " exceeds the " +
                             std::to_string(config.schedule.sigmas.size()) + "-entry noise schedule");
        }
        config.schedule.sigmas.resize(a.stages);
    }
    config.validate();
    return config;
}

std::map<std::string, double> metrics_of(const io::EvalReport& r) {
    return {{"psnr", r.mean_psnr}, {"ssim", r.mean_ssim}};
}

int cmd_fit(const FitArgs& a) {
    const auto config = build_config(a);
    const auto scene = io::load_scene(scene_file(a.scene));
    std::vector<scene::Image> images;
    for (std::size_t i = 0; i < scene.train_cameras.size(); ++i) {
        images.push_back(io::read_image(scene_dir(a.scene) / image_name("train", i)));
    }
    const auto data = pipeline::training_data(scene, std::move(images));

    if (fs::exists(a.out) && !(fs::is_directory(a.out) && fs::is_empty(a.out))) {
        if (!a.force) throw UsageError(a.out.string() + " already exists; pass --force to overwrite");
        fs::remove_all(a.out);
    }
    ensure_dir(a.out);

    std::string manifest = nlohmann::json{{"config", nlohmann::json::parse(pipeline::config_to_json(config))}}.dump() + "\n";
    pipeline::RunCallbacks cb;
    cb.evaluate = [&scene](const scene::GaussianSet& set) { return metrics_of(io::evaluate(set, scene)); };
    cb.progress = [](const std::string& line) { std::cerr << line << '\n'; };
    cb.on_stage = [&](const pipeline::StageReport& report, const scene::GaussianSet& set, const dip::Generator* gen) {
        const std::string line = report.to_json() + "\n";
        manifest += line;
        if (report.stage == 0) {
            io::save_gaussians(a.out / "initial.gs", set);
        } else {
            const fs::path dir = a.out / ("stage" + std::to_string(report.stage));
            ensure_dir(dir);
            io::save_gaussians(dir / "gaussians.gs", set);
            if (gen != nullptr) gen->save(dir / "generator.dipw");
            io::write_file_atomic(dir / "manifest.jsonl", line);
        }
        io::write_file_atomic(a.out / "manifest.jsonl", manifest);
        std::cerr << "stage " << report.stage << " done: " << set.size() << " Gaussians, psnr "
                  << report.metrics.at("psnr") << "\n";
    };
    const auto result = pipeline::run_coarse_to_fine(data, config, cb);
    io::save_gaussians(a.out / "final.gs", result.final_set());
    return 0;
}

// ---- render / eval / gradcheck ---------------------------------------------

struct RenderArgs {
    fs::path model, scene, out;
    std::size_t view = 0;
    std::string split = "test";
};

int cmd_render(const RenderArgs& a) {
    const auto scene = io::load_scene(scene_file(a.scene));
    const auto& cams = a.split == "train" ? scene.train_cameras : scene.test_cameras;
    if (a.view >= cams.size()) {
        throw std::out_of_range("view-id " + std::to_string(a.view) + " out of range: the scene has " +
                                std::to_string(cams.size()) + " " + a.split + " views");
    }
    const auto set = load_model(a.model);
    io::write_image(a.out, render::render(set, cams[a.view], scene.background).pixels);
    return 0;
}

struct EvalArgs {
    fs::path model, scene, out;
};

int cmd_eval(const EvalArgs& a) {
    const auto scene = io::load_scene(scene_file(a.scene));
    const auto set = load_model(a.model);
    const auto report = io::evaluate(set, scene);
    if (!a.out.empty()) io::write_file_atomic(a.out, report.to_json() + "\n");
    std::cout << report.to_table();
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const verify::GradCheckOptions options;
    const auto results = verify::run_suite(seed, options);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-44s %10.3e  %4zu probes  %s\n", r.name.c_str(), r.max_rel_error, r.probes,
                    r.passed ? "ok" : "FAIL");
        ok = ok && r.passed;
    }
    std::printf("%s: %zu groups, tolerance %.0e\n", ok ? "passed" : "FAILED", results.size(), options.tolerance);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splatting with a deep-image-prior generator"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic scene and its ground-truth views");
    s->add_option("--seed", synth.options.seed, "Random seed")->default_val(1);
    s->add_option("--gaussians", synth.options.gaussians, "Number of truth Gaussians")->default_val(200);
    s->add_option("--train-views", synth.options.train_views, "Training views")->default_val(3);
    s->add_option("--test-views", synth.options.test_views, "Held-out views")->default_val(8);
    s->add_option("--size", synth.options.size, "Image side in pixels")->default_val(64);
    s->add_option("--out", synth.out, "Output directory")->required();

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Run the coarse-to-fine reconstruction");
    f->add_option("--scene", fit.scene, "Scene directory or scene.json")->required();
    f->add_option("--preset", fit.preset, "Hyperparameter preset")
        ->check(CLI::IsMember(pipeline::preset_names()))
        ->default_val("synthetic");
    auto* seed_opt = f->add_option("--seed", fit.seed, "Master seed");
    f->add_option("--out", fit.out, "Run directory")->required();
    f->add_option("--stages", fit.stages, "Number of stages (prefix of the noise schedule)")->check(CLI::PositiveNumber);
    f->add_option("--sigma", fit.sigmas, "Noise schedule, one value per stage")->expected(1, -1);
    f->add_option("--config", fit.config, "JSON file of key/value overrides")->check(CLI::ExistingFile);
    f->add_option("--set", fit.sets, "Override one setting: key=value");
    f->add_flag("--force", fit.force, "Replace an existing run directory");

    RenderArgs rend;
    auto* r = app.add_subcommand("render", "Render one view of a model");
    r->add_option("--model", rend.model, "Gaussian file, run directory, or scene file")->required();
    r->add_option("--scene", rend.scene, "Scene directory or scene.json")->required();
    r->add_option("--view-id", rend.view, "View index")->required();
    r->add_option("--split", rend.split, "Camera set")->check(CLI::IsMember({"train", "test"}))->default_val("test");
    r->add_option("--out", rend.out, "Output PPM")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Held-out PSNR and SSIM of a model");
    e->add_option("--model", ev.model, "Gaussian file, run directory, or scene file")->required();
    e->add_option("--scene", ev.scene, "Scene directory or scene.json")->required();
    e->add_option("--out", ev.out, "Report JSON");

    std::uint64_t gc_seed = 3;
    auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    g->add_option("--seed", gc_seed, "Random seed")->default_val(3);

    CLI11_PARSE(app, argc, argv);
    fit.seed_set = seed_opt->count() > 0;

    try {
        apply_thread_limit();
        if (*s) return cmd_synth(synth);
        if (*f) return cmd_fit(fit);
        if (*r) return cmd_render(rend);
        if (*e) return cmd_eval(ev);
        if (*g) return cmd_gradcheck(gc_seed);
    } catch (const UsageError& ex) {
        std::cerr << "usage error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
