// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "../support/reference.hpp"

#include "dipgs/io/evaluate.hpp"
#include "dipgs/io/image_io.hpp"
#include "dipgs/io/scene_io.hpp"
#include "dipgs/loss/losses.hpp"
#include "dipgs/pipeline/pipeline.hpp"
#include "dipgs/pipeline/rng.hpp"
#include "dipgs/render/splat.hpp"
#include "dipgs/verify/gradcheck.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dipgs;
using scene::Vec3;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Pipeline defaults, except the Gaussian cap which bounds run time.
struct Budget {
    std::size_t init = 3000;
    std::size_t cd = 3000;
    std::size_t scale = 3000;
    std::size_t dip = 4000;
    std::size_t post = 2000;
    std::size_t initial_count = 1000;
    std::size_t max_gaussians = 2000;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.2f", v[i]);
    return s + "]";
}

io::SyntheticScene standard_scene(std::uint64_t seed) {
    io::SynthOptions o;
    o.seed = seed;
    o.gaussians = 200;
    o.train_views = 3;
    o.test_views = 8;
    o.size = 64;
    return io::synth_scene(o);
}

pipeline::PipelineConfig run_config(std::uint64_t seed, const Budget& b) {
    auto c = pipeline::preset("synthetic");
    c.seed = seed;
    c.init.iterations = b.init;
    c.init.initial_count = b.initial_count;
    c.init.densify.max_gaussians = b.max_gaussians;
    c.stage.iters_cd = b.cd;
    c.stage.iters_scale = b.scale;
    c.stage.iters_dip = b.dip;
    c.stage.iters_post = b.post;
    c.validate();
    return c;
}

// ---- property criteria -------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto results = verify::run_suite(3);
    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.passed;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_name = r.name;
        }
    }
    ok = ok && secs < 300.0;
    return {ok, std::to_string(results.size()) + " groups, max rel err " + fmt("%.2e", worst) + " (" + worst_name +
                    "), " + fmt("%.1f", secs) + " s"};
}

scene::GaussianSet random_set(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-0.5, 0.5), s(0.1, 0.4), o(0.2, 0.95), c(-1.5, 1.5);
    std::normal_distribution<double> q(0.0, 1.0);
    scene::GaussianSet set;
    for (std::size_t i = 0; i < n; ++i) {
        scene::Quat r{q(rng), q(rng), q(rng), q(rng)};
        set.push_back({u(rng), u(rng), u(rng)}, {s(rng), s(rng), s(rng)}, r, o(rng), {c(rng), c(rng), c(rng)});
    }
    set.normalize_rotations();
    return set;
}

Outcome renderer_oracle() {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    bool permutation_ok = true;
    const auto exact = render::RenderOptions::exact();
    std::size_t scenes = 0;
    for (std::size_t n = 1; n <= 5; ++n) {
        for (int rep = 0; rep < 20; ++rep, ++scenes) {
            const auto set = random_set(rng, n);
            std::uniform_real_distribution<double> az(0.0, 2 * std::numbers::pi);
            const double a = az(rng);
            const auto cam = scene::look_at({2.5 * std::cos(a), 2.5 * std::sin(a), 0.7}, {0, 0, 0}, {0, 0, 1}, 8, 8, 0.8);
            const Vec3 bg{0.1, 0.6, 0.9};
            const auto img = render::render(set, cam, bg, exact).pixels;
            const auto ref = reference::render(set, cam, bg);
            for (std::size_t i = 0; i < img.pixels.size(); ++i) worst = std::max(worst, std::abs(img.pixels[i] - ref.pixels[i]));

            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            scene::GaussianSet shuffled;
            for (std::size_t i : perm) {
                shuffled.push_back(set.means[i], set.scales[i], set.rotations[i], set.opacities[i], set.sh[i]);
            }
            permutation_ok = permutation_ok && render::render(shuffled, cam, bg, exact).pixels == img &&
                             render::render(shuffled, cam, bg).pixels == render::render(set, cam, bg).pixels;
        }
    }
    return {worst <= 1e-9 && permutation_ok, std::to_string(scenes) + " scenes, max |diff| " + fmt("%.2e", worst) +
                                                 ", permutation " + (permutation_ok ? "bit-exact" : "MISMATCH")};
}

Outcome closed_form_losses() {
    const auto zero = diff::Tensor::filled({16, 16, 3}, 0.0);
    const auto one = diff::Tensor::filled({16, 16, 3}, 1.0);
    const double s = loss::ssim(zero, one).item();
    const double s_expect = loss::kSsimC1 / (1.0 + loss::kSsimC1);
    const double p = loss::psnr_from_mse(0.01);
    const std::vector<Vec3> a{{0, 0, 0}}, b{{1, 0, 0}};
    const double cd = loss::chamfer(a, b);
    const double occ = loss::occlusion_term(0.5, 0.5 * 2.0, 2.0);
    const bool ok = std::abs(s - s_expect) <= 1e-9 && std::abs(p - 20.0) <= 1e-9 && cd == 2.0 && occ == 0.25;
    return {ok, "ssim " + fmt("%.12g", s) + " psnr " + fmt("%.12g", p) + " chamfer " + fmt("%.17g", cd) + " occlusion " +
                    fmt("%.17g", occ)};
}

Outcome chamfer_knn_oracles() {
    std::size_t mismatches = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> size(1, 200);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const auto cloud = [&](std::size_t n) {
            std::vector<Vec3> v(n);
            for (auto& p : v) p = {u(rng), u(rng), u(rng)};
            return v;
        };
        const auto a = cloud(size(rng));
        const auto b = cloud(size(rng));
        if (loss::chamfer(a, b) != reference::chamfer(a, b)) ++mismatches;
        for (const auto& p : a) {
            const auto [idx, d] = loss::nearest(p, b);
            if (idx != reference::nearest(p, b) || d != reference::sqdist(p, b[idx])) ++mismatches;
        }
        const auto knn = scene::knn_mean_distance(a, 3);
        const auto ref = reference::knn_mean(a, 3);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (knn[i] != ref[i]) ++mismatches;
        }
    }
    return {mismatches == 0, "100 seeds, " + std::to_string(mismatches) + " mismatches"};
}

Outcome dominance_statistics() {
    std::string detail;
    bool ok = true;
    for (double p : {0.0, 0.1, 1.0}) {
        auto rng = pipeline::substream(5, "dominance", static_cast<std::uint64_t>(p * 10));
        constexpr int kDraws = 100000;
        int hits = 0;
        for (int i = 0; i < kDraws; ++i) hits += pipeline::pick_pseudo_view(p, rng) ? 1 : 0;
        const double expect = p / (1.0 + p);
        const double freq = static_cast<double>(hits) / kDraws;
        const double se = std::sqrt(expect * (1.0 - expect) / kDraws);
        const bool within = std::abs(freq - expect) <= 3.0 * se;
        ok = ok && within;
        detail += "p=" + fmt("%g", p) + ": " + fmt("%.5f", freq) + " vs " + fmt("%.5f", expect) + "; ";
    }
    return {ok, detail};
}

Outcome format_round_trips() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        io::SynthOptions o;
        o.seed = seed;
        o.gaussians = 50;
        o.size = 16;
        const auto s = io::synth_scene(o);
        ok = ok && io::scene_from_text(io::scene_to_text(s)) == s;
        ok = ok && io::gaussians_from_text(io::gaussians_to_text(s.truth)) == s.truth;
        const auto img = render::render(s.truth, s.test_cameras[0], s.background).pixels;
        const auto back = io::decode_ppm(io::encode_ppm(img));
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            ok = ok && std::abs(back.pixels[i] - std::clamp(img.pixels[i], 0.0, 1.0)) <= 1.0 / 510.0 + 1e-12;
        }
    }
    detail += "scene/gaussian text bit-exact, PPM within 1/510";
    scene::Image white(1, 1, 1.0);
    const std::string bytes = io::encode_ppm(white);
    // 'P' '6' LF '1' ' ' '1' LF '2' '5' '5' LF, then one RGB triple.
    const std::vector<unsigned char> expect{0x50, 0x36, 0x0a, 0x31, 0x20, 0x31, 0x0a, 0x32, 0x35, 0x35, 0x0a, 0xff, 0xff, 0xff};
    const bool layout = std::equal(bytes.begin(), bytes.end(), expect.begin(), expect.end(),
                                   [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; });
    ok = ok && layout;
    detail += layout ? ", 1x1 P6 layout exact" : ", P6 layout MISMATCH";
    return {ok, detail};
}

// ---- determinism through the command-line tool -----------------------------

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(const std::string& tool, const fs::path& work) {
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string q = "'" + tool + "'";
    const std::string scene = (work / "scene").string();
    if (run(q + " synth --seed 2 --gaussians 60 --train-views 3 --test-views 2 --size 24 --out '" + scene + "'") != 0) {
        return {false, "synth failed"};
    }
    const std::string flags = " --scene '" + scene + "' --preset synthetic --seed 9"
                              " --set init.iterations=60 --set init.initial_count=100 --set stage.iters_cd=20"
                              " --set stage.iters_scale=20 --set stage.iters_dip=20 --set stage.iters_post=30 --out ";
    for (const char* run_dir : {"a", "b"}) {
        if (run(q + " fit" + flags + "'" + (work / run_dir).string() + "'") != 0) {
            return {false, std::string("fit run ") + run_dir + " failed"};
        }
    }
    std::vector<std::string> files{"final.gs", "initial.gs", "manifest.jsonl", "stage1/manifest.jsonl",
                                   "stage1/gaussians.gs", "stage1/generator.dipw", "stage4/manifest.jsonl",
                                   "stage4/gaussians.gs"};
    for (const auto& f : files) {
        const auto a = slurp(work / "a" / f), b = slurp(work / "b" / f);
        if (a.empty() || a != b) return {false, f + " differs or is missing"};
    }
    const bool refused = run(q + " fit" + flags + "'" + (work / "a").string() + "'") != 0;
    return {refused, std::to_string(files.size()) + " files bit-identical across two runs" +
                         (refused ? ", existing --out refused" : ", existing --out NOT refused")};
}

// ---- reconstruction trends -------------------------------------------------

struct SeedResult {
    std::vector<double> stage_psnr;  // index 0: initial estimate, 1..4: stages
    double no_init = 0;
    double vanilla = 0;
};

SeedResult run_seed(std::uint64_t seed, const Budget& budget, bool verbose) {
    const auto scene = standard_scene(seed);
    const auto data = pipeline::training_data(scene);
    const auto config = run_config(seed, budget);
    const auto psnr = [&scene](const scene::GaussianSet& set) { return io::evaluate(set, scene).mean_psnr; };
    const auto say = [&](const std::string& m) {
        if (verbose) std::fprintf(stderr, "[seed %llu] %s\n", static_cast<unsigned long long>(seed), m.c_str());
    };

    SeedResult r;
    pipeline::RunCallbacks cb;
    cb.evaluate = [&psnr](const scene::GaussianSet& set) { return std::map<std::string, double>{{"psnr", psnr(set)}}; };
    cb.on_stage = [&](const pipeline::StageReport& rep, const scene::GaussianSet& set, const dip::Generator*) {
        say("stage " + std::to_string(rep.stage) + ": psnr " + fmt("%.3f", rep.metrics.at("psnr")) + ", " +
            std::to_string(set.size()) + " Gaussians");
    };
    const auto t0 = Clock::now();
    const auto full = pipeline::run_coarse_to_fine(data, config, cb);
    for (const auto& rep : full.reports) r.stage_psnr.push_back(rep.metrics.at("psnr"));
    say("full run " + fmt("%.0f", seconds_since(t0)) + " s");

    auto ablation = config;
    ablation.stage.skip_init = true;
    const auto no_init = pipeline::run_stage(full.initial, data, ablation, 1, config.schedule.sigmas[0]);
    r.no_init = psnr(no_init.result);
    say("no-init stage 1: psnr " + fmt("%.3f", r.no_init));

    auto vanilla_cfg = config.init;
    vanilla_cfg.iterations = pipeline::total_iterations(config);
    const double d_min = pipeline::default_d_min(data);
    vanilla_cfg.weights.d_min = d_min;
    auto rng = pipeline::substream(seed, "init");
    const auto vanilla = pipeline::run_vanilla_gs(data, vanilla_cfg, d_min, rng);
    r.vanilla = psnr(vanilla.result);
    say("vanilla " + std::to_string(vanilla_cfg.iterations) + " iterations: psnr " + fmt("%.3f", r.vanilla));
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string tool;
    fs::path work = fs::temp_directory_path() / "dipgs_acceptance";
    std::vector<std::uint64_t> seeds{1, 2, 3};
    Budget b;
    bool verbose = false, skip_trends = false;
    app.add_option("--tool", tool, "Path of the dipgs executable")->required();
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--seeds", seeds, "Scene and pipeline seeds");
    app.add_option("--init-iters", b.init);
    app.add_option("--cd-iters", b.cd);
    app.add_option("--scale-iters", b.scale);
    app.add_option("--dip-iters", b.dip);
    app.add_option("--post-iters", b.post);
    app.add_option("--initial-count", b.initial_count);
    app.add_option("--max-gaussians", b.max_gaussians);
    app.add_flag("--verbose", verbose);
    app.add_flag("--skip-trends", skip_trends, "Only the property criteria");
    CLI11_PARSE(app, argc, argv);

    int failures = 0;
    const auto report = [&failures](const char* name, const Outcome& o) {
        std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };

    report("gradient-suite", gradient_suite());
    report("renderer-oracle", renderer_oracle());
    report("closed-form-losses", closed_form_losses());
    report("chamfer-knn-oracles", chamfer_knn_oracles());

    if (!skip_trends) {
        const auto t0 = Clock::now();
        std::vector<SeedResult> runs;
        for (auto s : seeds) runs.push_back(run_seed(s, b, verbose));
        const auto column = [&runs](const std::function<double(const SeedResult&)>& f) {
            std::vector<double> v;
            for (const auto& r : runs) v.push_back(f(r));
            return v;
        };
        const auto stage = [&column](std::size_t k) { return column([k](const SeedResult& r) { return r.stage_psnr[k]; }); };
        const auto no_init = column([](const SeedResult& r) { return r.no_init; });
        const auto vanilla = column([](const SeedResult& r) { return r.vanilla; });
        const auto stages = runs.front().stage_psnr.size() - 1;
        const auto final_psnr = stage(stages);

        report("initialization-efficacy",
               {median(stage(1)) > median(no_init),
                "median psnr with init " + fmt("%.3f", median(stage(1))) + " " + list(stage(1)) + " vs without " +
                    fmt("%.3f", median(no_init)) + " " + list(no_init)});

        std::vector<double> medians;
        for (std::size_t k = 1; k <= stages; ++k) medians.push_back(median(stage(k)));
        bool monotone = true;
        for (std::size_t k = 1; k < medians.size(); ++k) monotone = monotone && medians[k] >= medians[k - 1];
        const double gain = medians.back() - medians.front();
        report("coarse-to-fine-trend", {monotone && gain >= 0.3, "stage medians " + list(medians) + ", gain " +
                                                                     fmt("%.3f", gain) + " dB"});

        const double margin = median(final_psnr) - median(vanilla);
        report("dipgs-vs-vanilla", {margin >= 0.5, "final " + fmt("%.3f", median(final_psnr)) + " " + list(final_psnr) +
                                                       " vs vanilla " + fmt("%.3f", median(vanilla)) + " " +
                                                       list(vanilla) + ", margin " + fmt("%.3f", margin) + " dB"});
        std::printf("      trend runs took %.0f s on %zu seeds\n", seconds_since(t0), seeds.size());
    }

    report("dominance-statistics", dominance_statistics());
    report("determinism", determinism(tool, work));
    report("format-round-trips", format_round_trips());
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
