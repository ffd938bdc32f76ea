// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/image_io.hpp"
#include "dipgs/io/scene_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string output;
};

Result run(const std::string& args) {
    const std::string cmd = std::string("'") + DIPGS_TOOL_PATH + "' " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.output += buf;
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "dipgs_cli_test";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        const auto r = run("synth --seed 1 --gaussians 40 --train-views 3 --test-views 8 --size 16 --out '" +
                           scene().string() + "'");
        ASSERT_EQ(r.status, 0) << r.output;
    }
    static fs::path scene() { return dir_ / "scene"; }
    static fs::path dir_;
};

fs::path Cli::dir_;

const char* kTinyFit =
    " --set init.iterations=30 --set init.initial_count=40 --set stage.iters_cd=3 --set stage.iters_scale=3"
    " --set stage.iters_dip=3 --set stage.iters_post=5 --stages 1";

}  // namespace

TEST_F(Cli, SynthWritesSceneAndElevenImages) {
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(scene())) files += e.is_regular_file();
    EXPECT_EQ(files, 12u);
    EXPECT_TRUE(fs::exists(scene() / "scene.json"));
    EXPECT_TRUE(fs::exists(scene() / "train_2.ppm"));
    EXPECT_TRUE(fs::exists(scene() / "test_7.ppm"));
    const auto img = dipgs::io::read_image(scene() / "test_0.ppm");
    EXPECT_EQ(img.width, 16u);
}

TEST_F(Cli, EvalOfTruthIsPerfect) {
    const auto out = dir_ / "truth_eval.json";
    const auto r = run("eval --model '" + (scene() / "scene.json").string() + "' --scene '" + scene().string() +
                       "' --out '" + out.string() + "'");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("mean"), std::string::npos);
    std::ifstream in(out);
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["psnr"].size(), 8u);
}

TEST_F(Cli, RenderMatchesSynthImages) {
    const auto out = dir_ / "view3.ppm";
    const auto r = run("render --model '" + (scene() / "scene.json").string() + "' --scene '" + scene().string() +
                       "' --view-id 3 --out '" + out.string() + "'");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(dipgs::io::read_image(out), dipgs::io::read_image(scene() / "test_3.ppm"));
}

TEST_F(Cli, RenderRejectsOutOfRangeView) {
    const auto r = run("render --model '" + (scene() / "scene.json").string() + "' --scene '" + scene().string() +
                       "' --view-id 8 --out '" + (dir_ / "x.ppm").string() + "'");
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("out of range"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_NE(run("").status, 0);
    EXPECT_NE(run("frobnicate").status, 0);
    EXPECT_EQ(run("synth --train-views 0 --out '" + (dir_ / "bad").string() + "'").status, 2);
    EXPECT_NE(run("fit --scene '" + scene().string() + "' --preset nope --out '" + (dir_ / "bad").string() + "'").status, 0);
    EXPECT_EQ(run("fit --scene '" + scene().string() + "' --set stage.nope=1 --out '" + (dir_ / "bad").string() + "'").status, 1);
    EXPECT_EQ(run("fit --scene '" + scene().string() + "' --stages 9 --out '" + (dir_ / "bad").string() + "'").status, 2);
}

TEST_F(Cli, FitWritesRunDirectoryAndRefusesToOverwrite) {
    const auto out = dir_ / "run";
    const std::string args = "fit --scene '" + scene().string() + "' --seed 3" + kTinyFit + " --out '" + out.string() + "'";
    const auto first = run(args);
    ASSERT_EQ(first.status, 0) << first.output;
    for (const char* f : {"manifest.jsonl", "initial.gs", "final.gs", "stage1/gaussians.gs", "stage1/generator.dipw",
                          "stage1/manifest.jsonl"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    std::ifstream manifest(out / "manifest.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(manifest, line)) {
        const auto j = nlohmann::json::parse(line);
        if (lines == 0) EXPECT_TRUE(j.contains("config"));
        ++lines;
    }
    EXPECT_EQ(lines, 3u);  // config, initial estimate, stage 1

    EXPECT_EQ(run(args).status, 2);
    EXPECT_EQ(run(args + " --force").status, 0);

    const auto eval = run("eval --model '" + out.string() + "' --scene '" + scene().string() + "'");
    EXPECT_EQ(eval.status, 0) << eval.output;
}

TEST_F(Cli, GradcheckPasses) {
    const auto r = run("gradcheck --seed 5");
    EXPECT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("passed:"), std::string::npos);
}

TEST_F(Cli, ThreadLimitMustBePositive) {
    const std::string args = "eval --model '" + (scene() / "scene.json").string() + "' --scene '" + scene().string() + "'";
    setenv("DIPGS_THREADS", "2", 1);
    EXPECT_EQ(run(args).status, 0);
    setenv("DIPGS_THREADS", "0", 1);
    const auto bad = run(args);
    unsetenv("DIPGS_THREADS");
    EXPECT_EQ(bad.status, 2);
}
