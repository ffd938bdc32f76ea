// SPDX-License-Identifier: Apache-2.0
#include "support/reference.hpp"

#include "dipgs/diff/ops.hpp"
#include "dipgs/loss/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dipgs;
using diff::Tensor;
using scene::Vec3;

namespace {

Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(h * w * 3);
    for (auto& x : v) x = u(rng);
    return Tensor::constant({h, w, 3}, v);
}

std::vector<Vec3> cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> v(n);
    for (auto& p : v) p = {u(rng), u(rng), u(rng)};
    return v;
}

// Whole-image SSIM written out directly.
double global_ssim(const Tensor& a, const Tensor& b) {
    double total = 0.0;
    const std::size_t n = a.size() / 3;
    for (std::size_t c = 0; c < 3; ++c) {
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ma += a[i * 3 + c];
            mb += b[i * 3 + c];
        }
        ma /= n;
        mb /= n;
        double va = 0, vb = 0, cov = 0;
        for (std::size_t i = 0; i < n; ++i) {
            va += (a[i * 3 + c] - ma) * (a[i * 3 + c] - ma);
            vb += (b[i * 3 + c] - mb) * (b[i * 3 + c] - mb);
            cov += (a[i * 3 + c] - ma) * (b[i * 3 + c] - mb);
        }
        va /= n;
        vb /= n;
        cov /= n;
        total += ((2 * ma * mb + loss::kSsimC1) * (2 * cov + loss::kSsimC2)) /
                 ((ma * ma + mb * mb + loss::kSsimC1) * (va + vb + loss::kSsimC2));
    }
    return total / 3.0;
}

}  // namespace

TEST(Ssim, BlackAgainstWhite) {
    const double s = loss::ssim(Tensor::filled({20, 20, 3}, 0.0), Tensor::filled({20, 20, 3}, 1.0)).item();
    EXPECT_NEAR(s, loss::kSsimC1 / (1.0 + loss::kSsimC1), 1e-9);
}

TEST(Ssim, IdenticalImagesScoreOne) {
    const auto img = random_image(16, 13, 1);
    EXPECT_NEAR(loss::ssim(img, img).item(), 1.0, 1e-12);
}

TEST(Ssim, SmallImagesUseWholeImageStatistics) {
    const auto a = random_image(7, 9, 2), b = random_image(7, 9, 3);
    EXPECT_NEAR(loss::ssim(a, b).item(), global_ssim(a, b), 1e-12);
}

TEST(Ssim, IsSymmetricAndBounded) {
    const auto a = random_image(14, 15, 4), b = random_image(14, 15, 5);
    const double ab = loss::ssim(a, b).item();
    EXPECT_DOUBLE_EQ(ab, loss::ssim(b, a).item());
    EXPECT_LT(ab, 1.0);
    EXPECT_GT(ab, -1.0);
}

TEST(Psnr, KnownValues) {
    EXPECT_NEAR(loss::psnr_from_mse(0.01), 20.0, 1e-9);
    EXPECT_NEAR(loss::psnr_from_mse(1e-4), 40.0, 1e-9);
    scene::Image a(4, 4, 0.5), b(4, 4, 0.5);
    EXPECT_EQ(loss::psnr(a, b), loss::kPsnrCap);
    b.at(0, 0, 0) = 0.5 + std::sqrt(48 * 0.01);  // one channel error, mean over 48 values = 0.01
    EXPECT_NEAR(loss::psnr(a, b), 20.0, 1e-9);
}

TEST(Photometric, ZeroForIdenticalAndL1ForShift) {
    const auto img = random_image(12, 12, 6);
    EXPECT_NEAR(loss::photometric(img, img).item(), 0.0, 1e-12);
    const auto a = Tensor::filled({12, 12, 3}, 0.3), b = Tensor::filled({12, 12, 3}, 0.5);
    const double expect = 0.8 * 0.2 + 0.2 * (1.0 - loss::ssim(a, b).item());
    EXPECT_NEAR(loss::photometric(a, b).item(), expect, 1e-12);
}

TEST(Chamfer, SinglePointPair) {
    const std::vector<Vec3> a{{0, 0, 0}}, b{{1, 0, 0}};
    EXPECT_EQ(loss::chamfer(a, b), 2.0);
}

TEST(Chamfer, MatchesBruteForceAndTensorVersion) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = cloud(5 + 13 * seed, seed), b = cloud(150 - 11 * seed, seed + 100);
        const double cd = loss::chamfer(a, b);
        EXPECT_EQ(cd, reference::chamfer(a, b));
        std::vector<double> fa, fb;
        for (const auto& p : a) fa.insert(fa.end(), p.begin(), p.end());
        for (const auto& p : b) fb.insert(fb.end(), p.begin(), p.end());
        const double t = loss::chamfer(Tensor::constant({a.size(), 3}, fa), Tensor::constant({b.size(), 3}, fb)).item();
        EXPECT_NEAR(t, cd, 1e-12);
    }
}

TEST(Chamfer, NearestPrefersLowestIndexOnTies) {
    const std::vector<Vec3> c{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
    const auto [idx, d] = loss::nearest({0, 0, 0}, c);
    EXPECT_EQ(idx, 0u);
    EXPECT_EQ(d, 1.0);
}

TEST(Regularizers, MeanAbsoluteValues) {
    EXPECT_DOUBLE_EQ(loss::opacity_reg(Tensor::constant({4, 1}, {0.1, 0.2, 0.3, 0.4})).item(), 0.25);
    EXPECT_DOUBLE_EQ(loss::scale_reg(Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6})).item(), 3.5);
}

TEST(Occlusion, TermValues) {
    EXPECT_EQ(loss::occlusion_term(0.5, 0.5 * 2.0, 2.0), 0.25);
    EXPECT_EQ(loss::occlusion_term(0.8, 3.0, 2.0), 0.0);
    EXPECT_EQ(loss::occlusion_term(0.8, 0.0, 2.0), 0.8);
}

TEST(Occlusion, FarGaussiansContributeNothing) {
    scene::GaussianSet set;
    set.push_back({0, 0, 0}, {0.01, 0.01, 0.01}, {1, 0, 0, 0}, 0.7, {0, 0, 0});
    const auto cam = scene::look_at({0, -3, 0}, {0, 0, 0}, {0, 0, 1}, 8, 8, 1.0);
    const std::vector<scene::Camera> cams{cam};
    EXPECT_EQ(loss::occlusion_reg(scene::to_tensors(set), cams, 1.0).item(), 0.0);
    // d_min 6 with the closest box corner at depth 3 - 0.03: o * (1 - 2.97 / 6).
    EXPECT_NEAR(loss::occlusion_reg(scene::to_tensors(set), cams, 6.0).item(), 0.7 * (1.0 - 2.97 / 6.0), 1e-12);
}

TEST(LossWeights, RejectsInvalidValues) {
    loss::LossWeights w;
    EXPECT_NO_THROW(w.validate());
    w.opacity = -1.0;
    EXPECT_THROW(w.validate(), std::invalid_argument);
    w = {};
    w.d_min = 0.0;
    EXPECT_THROW(w.validate(), std::invalid_argument);
}
