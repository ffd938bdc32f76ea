// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/checkpoint.hpp"
#include "dipgs/dip/generator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace dipgs;
using namespace dipgs::dip;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dipgs_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

GeneratorConfig small_config() {
    GeneratorConfig c;
    c.side = 16;
    c.channels = {4, 8, 8};
    c.noise = {6, 2, 2, 2};
    return c;
}

}  // namespace

TEST(Noise, ShapesAndRange) {
    const NoiseDims dims{5, 3, 2, 1};
    const auto z = sample_noise(9, 24, dims);
    const std::array<std::size_t, 4> sides{24, 12, 6, 3}, chans{5, 3, 2, 1};
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(z.levels[k].shape(), (diff::Shape{sides[k], sides[k], chans[k]}));
        for (double v : z.levels[k].values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LT(v, kNoiseHigh);
        }
    }
    EXPECT_THROW(sample_noise(1, 12), std::invalid_argument);
    EXPECT_THROW(sample_noise(1, 0), std::invalid_argument);
}

TEST(Noise, UniformMoments) {
    const auto z = sample_noise(3, 64, {32, 4, 4, 4});
    double mean = 0, sq = 0;
    const auto v = z.levels[0].values();
    for (double x : v) {
        mean += x;
        sq += x * x;
    }
    mean /= v.size();
    const double var = sq / v.size() - mean * mean;
    const double n = static_cast<double>(v.size());
    // U(0, h): mean h/2, variance h^2/12; bounds at 5 standard errors.
    EXPECT_NEAR(mean, kNoiseHigh / 2, 5 * kNoiseHigh / std::sqrt(12 * n));
    EXPECT_NEAR(var, kNoiseHigh * kNoiseHigh / 12, 5 * kNoiseHigh * kNoiseHigh / std::sqrt(180 * n));
}

TEST(Noise, SameSeedSameNoiseAndPerturbLeavesBaseAlone) {
    const auto a = sample_noise(5, 16), b = sample_noise(5, 16);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(a.levels[k].values().size(), b.levels[k].values().size());
    EXPECT_TRUE(std::equal(a.levels[0].values().begin(), a.levels[0].values().end(), b.levels[0].values().begin()));

    std::mt19937_64 rng(1);
    const std::vector<double> before(a.levels[2].values().begin(), a.levels[2].values().end());
    const auto p = perturb(a, 0.5, rng);
    EXPECT_TRUE(std::equal(before.begin(), before.end(), a.levels[2].values().begin()));
    EXPECT_FALSE(std::equal(before.begin(), before.end(), p.levels[2].values().begin()));
    const auto same = perturb(a, 0.0, rng);
    EXPECT_TRUE(std::equal(before.begin(), before.end(), same.levels[2].values().begin()));
}

TEST(Generator, GridSideIsSmallestMultipleOfEight) {
    EXPECT_EQ(grid_side_for(1, 0.75), 8u);
    EXPECT_EQ(grid_side_for(85, 0.75), 8u);   // 63.75 <= 64
    EXPECT_EQ(grid_side_for(86, 0.75), 16u);  // 64.5 > 64
    EXPECT_EQ(grid_side_for(1000, 0.75), 32u);
    EXPECT_THROW(grid_side_for(10, 0.0), std::invalid_argument);
}

TEST(Generator, OutputShapesAndRanges) {
    std::mt19937_64 rng(2);
    const scene::SceneBounds bounds{{0.5, -1, 0}, {1, 2, 0.5}};
    const Generator gen(small_config(), bounds, rng);
    const auto g = gen.generate(sample_noise(1, 16, small_config().noise));
    EXPECT_EQ(g.side(), 16u);
    EXPECT_EQ(g.mean.shape(), (diff::Shape{16, 16, 3}));
    EXPECT_EQ(g.opacity.shape(), (diff::Shape{16, 16, 1}));
    EXPECT_EQ(g.scale.shape(), (diff::Shape{16, 16, 3}));
    EXPECT_EQ(g.rotation.shape(), (diff::Shape{16, 16, 4}));
    EXPECT_EQ(g.sh.shape(), (diff::Shape{16, 16, 3}));
    for (std::size_t i = 0; i < 256; ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_LE(std::abs(g.mean[i * 3 + k] - bounds.center[k]), bounds.half_extent[k]);
            EXPECT_GT(g.scale[i * 3 + k], 0.0);
        }
        EXPECT_GT(g.opacity[i], 0.0);
        EXPECT_LT(g.opacity[i], 1.0);
    }
    const auto set = grid_to_set(g);
    EXPECT_EQ(set.size(), 256u);
    EXPECT_EQ(set.means[17][1], g.mean[17 * 3 + 1]);
}

TEST(Generator, InitialHeadValuesComeFromBiases) {
    auto c = small_config();
    c.initial_opacity = 0.1;
    c.initial_scale = 0.05;
    std::mt19937_64 rng(3);
    Generator gen(c, scene::SceneBounds{}, rng);
    // Zero every weight except the head biases: outputs equal the configured starting values.
    for (Head h : kHeads) {
        for (auto& [name, t] : gen.net(h).named_parameters()) {
            if (t.id() == gen.net(h).head_bias().id()) continue;
            for (double& v : t.mutable_values()) v = 0.0;
        }
    }
    const auto g = gen.generate(sample_noise(4, 16, c.noise));
    EXPECT_NEAR(g.opacity[5], 0.1, 1e-12);
    EXPECT_NEAR(g.scale[7], 0.05, 1e-12);
}

TEST(Generator, ZeroUNetOutputsZero) {
    UNetConfig c;
    c.out_channels = 2;
    c.channels = {4, 4, 4};
    c.noise = {3, 1, 1, 1};
    const auto out = UNet::zeros(c).forward(sample_noise(6, 8, c.noise));
    EXPECT_EQ(out.shape(), (diff::Shape{8, 8, 2}));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Generator, ParameterNamesAreUnique) {
    std::mt19937_64 rng(4);
    const Generator gen(small_config(), scene::SceneBounds{}, rng);
    std::set<std::string> names;
    for (const auto& [name, t] : gen.named_parameters()) EXPECT_TRUE(names.insert(name).second) << name;
    EXPECT_TRUE(names.count("mean.enc1.kernel"));
}

TEST(Checkpoint, GeneratorSaveLoadRoundTrip) {
    std::mt19937_64 rng(5);
    const Generator a(small_config(), scene::SceneBounds{}, rng);
    Generator b(small_config(), scene::SceneBounds{}, rng);
    const auto path = temp_file("gen.dipw");
    a.save(path);
    b.load(path);
    const auto pa = a.named_parameters(), pb = b.named_parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                               pb[i].second.values().begin(), pb[i].second.values().end()))
            << pa[i].first;
    }
}

TEST(Checkpoint, ByteLayout) {
    const auto path = temp_file("one.dipw");
    write_checkpoint(path, {{"w", {2}, {1.0, -2.0}}});
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    // magic 4 + version 4 + name length 4 + name 1 + rank 4 + dim 8 + values 16
    ASSERT_EQ(bytes.size(), 41u);
    EXPECT_EQ(bytes.substr(0, 4), "DIPW");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[12], 'w');
    const auto back = read_checkpoint(path);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].values, (std::vector<double>{1.0, -2.0}));
}

TEST(Checkpoint, RejectsCorruptFiles) {
    const auto path = temp_file("bad.dipw");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    EXPECT_THROW(read_checkpoint(path), CheckpointError);
    write_checkpoint(path, {{"w", {3}, {1.0, 2.0, 3.0}}});
    std::filesystem::resize_file(path, 30);
    EXPECT_THROW(read_checkpoint(path), CheckpointError);

    std::mt19937_64 rng(6);
    Generator gen(small_config(), scene::SceneBounds{}, rng);
    write_checkpoint(path, {{"mean.enc1.kernel", {1}, {0.0}}});
    EXPECT_THROW(gen.load(path), CheckpointError);
}
