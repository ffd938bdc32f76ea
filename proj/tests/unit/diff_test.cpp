// SPDX-License-Identifier: Apache-2.0
#include "support/reference.hpp"

#include "dipgs/diff/ops.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <random>

using namespace dipgs::diff;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

struct ConvCase {
    std::size_t h, w, ci, co, k, stride;
    Padding padding;
};

std::string case_name(const ConvCase& c) {
    return std::to_string(c.h) + "x" + std::to_string(c.w) + "x" + std::to_string(c.ci) + "to" + std::to_string(c.co) +
           "_k" + std::to_string(c.k) + "_s" + std::to_string(c.stride) +
           (c.padding == Padding::same ? "_same" : "_valid");
}

void PrintTo(const ConvCase& c, std::ostream* os) { *os << case_name(c); }

class ConvAgainstReference : public ::testing::TestWithParam<ConvCase> {};

}  // namespace

TEST_P(ConvAgainstReference, MatchesDirectLoops) {
    const auto c = GetParam();
    const auto in = random_values(c.h * c.w * c.ci, 1);
    const auto k = random_values(c.k * c.k * c.ci * c.co, 2);
    const auto b = random_values(c.co, 3);
    const auto out = conv2d(Tensor::constant({c.h, c.w, c.ci}, in), Tensor::constant({c.k, c.k, c.ci, c.co}, k),
                            Tensor::constant({c.co}, b), c.stride, c.padding);

    // "same" keeps ceil(h / stride) rows, which for odd kernels is symmetric padding k / 2.
    const std::size_t pad = c.padding == Padding::same ? c.k / 2 : 0;
    std::size_t oh = 0, ow = 0;
    const auto ref = dipgs::reference::conv2d(in, c.h, c.w, c.ci, k, c.k, c.k, c.co, b, c.stride, pad, oh, ow);
    ASSERT_EQ(out.shape(), (Shape{oh, ow, c.co}));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-12) << i;
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvAgainstReference,
                         ::testing::Values(ConvCase{5, 7, 2, 3, 3, 1, Padding::same},
                                           ConvCase{8, 8, 3, 4, 3, 2, Padding::same},
                                           ConvCase{6, 5, 2, 2, 3, 1, Padding::valid},
                                           ConvCase{4, 4, 5, 1, 1, 1, Padding::same},
                                           ConvCase{9, 6, 1, 2, 5, 2, Padding::same}),
                         [](const ::testing::TestParamInfo<ConvCase>& info) { return case_name(info.param); });

TEST(Conv, SerialAndParallelKernelsAreBitIdentical) {
    const auto g = make_conv_geometry(13, 11, 6, 3, 3, 6, 9, 1, Padding::same);
    const auto in = random_values(13 * 11 * 6, 4);
    const auto k = random_values(3 * 3 * 6 * 9, 5);
    const auto b = random_values(9, 6);
    const auto go = random_values(13 * 11 * 9, 7);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);

    std::vector<double> fs(13 * 11 * 9), fp(fs.size());
    serial::conv2d_forward(g, in, k, b, fs);
    parallel::conv2d_forward(g, in, k, b, fp);
    EXPECT_EQ(fs, fp);

    std::vector<double> is(in.size()), ip(in.size());
    serial::conv2d_backward_input(g, go, k, is);
    parallel::conv2d_backward_input(g, go, k, ip);
    EXPECT_EQ(is, ip);

    std::vector<double> ks(k.size()), kp(k.size());
    serial::conv2d_backward_kernel(g, in, go, ks);
    parallel::conv2d_backward_kernel(g, in, go, kp);
    EXPECT_EQ(ks, kp);
    omp_set_num_threads(saved);
}

TEST(Conv, RejectsMismatchedChannelsAndEvenSameKernels) {
    EXPECT_THROW(make_conv_geometry(4, 4, 3, 3, 3, 2, 1, 1, Padding::same), ShapeError);
    EXPECT_THROW(make_conv_geometry(4, 4, 3, 2, 2, 3, 1, 1, Padding::same), ShapeError);
    EXPECT_THROW(make_conv_geometry(2, 2, 1, 3, 3, 1, 1, 1, Padding::valid), ShapeError);
}

TEST(Upsample, HalfPixelBilinearValues) {
    // Output x samples input (x + 0.5) / 2 - 0.5, clamped to the edge: -0.25, 0.25, 0.75, 1.25.
    const auto out = upsample_bilinear(Tensor::constant({1, 2, 1}, {0.0, 4.0}));
    ASSERT_EQ(out.shape(), (Shape{2, 4, 1}));
    const std::vector<double> row{0.0, 1.0, 3.0, 4.0};
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(out[y * 4 + x], row[x]);
}

TEST(Upsample, ConstantStaysConstant) {
    const auto out = upsample_bilinear(Tensor::filled({3, 5, 2}, 0.7));
    for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Normalize, MatchesTwoPassReference) {
    const std::size_t pixels = 6 * 5, channels = 3;
    auto x = random_values(pixels * channels, 8);
    for (auto& v : x) v = 1e3 + 10.0 * v;  // large offset stresses the variance computation
    const std::vector<double> gamma{1.5, 0.5, -1.0}, beta{0.1, -0.2, 0.0};
    const auto out = normalize(Tensor::constant({6, 5, 3}, x), Tensor::constant({3}, gamma), Tensor::constant({3}, beta));
    const auto ref = dipgs::reference::normalize(x, pixels, channels, gamma, beta, kNormEps);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-10);
}

TEST(Activation, KnownValues) {
    const auto x = Tensor::constant({4}, {-1.0, 0.0, 2.0, 20.0});
    const auto leaky = activation(x, Activation::leaky_relu);
    EXPECT_DOUBLE_EQ(leaky[0], -0.2);
    EXPECT_DOUBLE_EQ(leaky[2], 2.0);
    EXPECT_DOUBLE_EQ(activation(x, Activation::sigmoid)[1], 0.5);
    EXPECT_DOUBLE_EQ(activation(x, Activation::tanh)[1], 0.0);
    EXPECT_DOUBLE_EQ(activation(x, Activation::exp)[3], std::exp(kExpInputClamp));
}

TEST(Autodiff, ProductRuleAndOffPathZeros) {
    const auto a = Tensor::parameter({2}, {3.0, -2.0});
    const auto b = Tensor::parameter({2}, {5.0, 7.0});
    const auto unused = Tensor::parameter({3}, {1.0, 1.0, 1.0});
    const auto g = backward(sum(a * b + a));
    EXPECT_EQ(g.of(a).values()[0], 6.0);
    EXPECT_EQ(g.of(a).values()[1], 8.0);
    EXPECT_EQ(g.of(b).values()[0], 3.0);
    EXPECT_EQ(g.of(b).values()[1], -2.0);
    const auto zero = g.of(unused);
    EXPECT_EQ(zero.shape(), unused.shape());
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(g.contains(unused));
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
    const auto x = Tensor::parameter({1}, {2.0});
    const auto y = x * x;
    const auto g = backward(sum(y * y));  // x^4
    EXPECT_DOUBLE_EQ(g.of(x).values()[0], 32.0);
}

TEST(Autodiff, ErrorsAreReported) {
    EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
    EXPECT_THROW(backward(Tensor::parameter({2}, {1.0, 2.0})), ShapeError);
    EXPECT_THROW(scale(Tensor::filled({1}, 1e308), 10.0), NonFiniteError);
    auto derived = add_scalar(Tensor::parameter({1}, {1.0}), 1.0);
    EXPECT_THROW(derived.mutable_values(), GraphError);
}

TEST(Autodiff, ConstantsCarryNoGraph) {
    const auto c = Tensor::constant({2}, {1.0, 2.0}) * Tensor::constant({2}, {3.0, 4.0});
    EXPECT_FALSE(c.requires_grad());
    EXPECT_TRUE(c.is_leaf());
}
