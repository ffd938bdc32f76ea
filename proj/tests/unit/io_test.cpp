// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/evaluate.hpp"
#include "dipgs/io/hexfloat.hpp"
#include "dipgs/io/image_io.hpp"
#include "dipgs/io/scene_io.hpp"
#include "dipgs/loss/losses.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <limits>

using namespace dipgs;
using namespace dipgs::io;

TEST(Quantize, RoundHalfUpAndClamp) {
    EXPECT_EQ(quantize(-0.3), 0);
    EXPECT_EQ(quantize(1.7), 255);
    EXPECT_EQ(quantize(0.5), 128);  // 127.5 rounds up
    EXPECT_EQ(quantize(1.0 / 255.0), 1);
    EXPECT_EQ(quantize(0.49 / 255.0), 0);
}

TEST(Ppm, RoundTripWithinHalfStep) {
    scene::Image img(5, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i) / 44.0;
    const auto back = decode_ppm(encode_ppm(img));
    ASSERT_EQ(back.width, 5u);
    ASSERT_EQ(back.height, 3u);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_LE(std::abs(back.pixels[i] - img.pixels[i]), 0.5 / 255 + 1e-15);
    // Decoded values are exact multiples of 1/255, so a second round trip is the identity.
    EXPECT_EQ(decode_ppm(encode_ppm(back)), back);
}

TEST(Ppm, HeaderBytes) {
    const auto bytes = encode_ppm(scene::Image(2, 1, 0.0));
    EXPECT_EQ(bytes, std::string("P6\n2 1\n255\n") + std::string(6, '\0'));
}

TEST(Ppm, AcceptsCommentsAndRejectsBadFiles) {
    const std::string payload{'\xff', '\x00', '\x80'};
    const auto img = decode_ppm("P6 # c\n1\t1 # x\n255\n" + payload);
    EXPECT_EQ(img.pixels[0], 1.0);
    EXPECT_EQ(img.pixels[2], 128.0 / 255.0);
    EXPECT_THROW(decode_ppm("P3\n1 1\n255\n000"), ImageFormatError);
    EXPECT_THROW(decode_ppm("P6\n1 1\n65535\n" + std::string(6, 'a')), ImageFormatError);
    EXPECT_THROW(decode_ppm("P6\n2 2\n255\n" + std::string(11, 'a')), ImageFormatError);
    EXPECT_THROW(decode_ppm("P6\n0 2\n255\n"), ImageFormatError);
    EXPECT_THROW(decode_ppm("P6\n"), ImageFormatError);
}

TEST(HexFloat, ExactRoundTrip) {
    for (double v : {0.0, -0.0, 1.0, 0.1, -3.5e-300, 1e300, std::numeric_limits<double>::denorm_min()}) {
        const double back = from_hexfloat(to_hexfloat(v));
        EXPECT_EQ(back, v);
        EXPECT_EQ(std::signbit(back), std::signbit(v));
    }
    EXPECT_EQ(to_hexfloat(3.0), "0x1.8p+1");
    EXPECT_THROW(from_hexfloat("1.5"), std::invalid_argument);
    EXPECT_THROW(from_hexfloat("0x1p+1 junk"), std::invalid_argument);
}

TEST(Scene, TextRoundTripIsExact) {
    SynthOptions o;
    o.seed = 12;
    o.gaussians = 25;
    o.size = 20;
    const auto s = synth_scene(o);
    EXPECT_EQ(scene_from_text(scene_to_text(s)), s);
    EXPECT_EQ(gaussians_from_text(gaussians_to_text(s.truth)), s.truth);
}

TEST(Scene, SynthLayout) {
    SynthOptions o;
    o.gaussians = 40;
    o.train_views = 4;
    o.test_views = 6;
    o.size = 32;
    const auto s = synth_scene(o);
    EXPECT_EQ(s.truth.size(), 40u);
    EXPECT_EQ(s.train_cameras.size(), 4u);
    EXPECT_EQ(s.test_cameras.size(), 6u);
    for (const auto& c : s.train_cameras) {
        EXPECT_EQ(c.width, 32u);
        EXPECT_NEAR(scene::norm(c.center()), o.radius, 1e-12);
        for (const auto& t : s.test_cameras) EXPECT_NE(c, t);
    }
    for (const auto& m : s.truth.means) EXPECT_TRUE(s.bounds.contains(m));
    EXPECT_EQ(synth_scene(o), s);
}

TEST(Scene, RejectsMalformedDocuments) {
    SynthOptions o;
    o.gaussians = 3;
    o.size = 8;
    auto j = nlohmann::json::parse(scene_to_text(synth_scene(o)));
    EXPECT_THROW(scene_from_text("{"), SceneFormatError);
    EXPECT_THROW(scene_from_text(gaussians_to_text(synth_scene(o).truth)), SceneFormatError);

    auto bad = j;
    bad["version"] = 99;
    EXPECT_THROW(scene_from_text(bad.dump()), SceneFormatError);
    bad = j;
    bad["gaussians"].erase("scales");
    EXPECT_THROW(scene_from_text(bad.dump()), SceneFormatError);
    bad = j;
    bad["gaussians"]["opacities"][0] = 0.5;  // plain number instead of a hex-float string
    EXPECT_THROW(scene_from_text(bad.dump()), SceneFormatError);
    bad = j;
    bad["gaussians"]["opacities"].erase(0);
    EXPECT_THROW(scene_from_text(bad.dump()), SceneFormatError);
}

TEST(Evaluate, TruthScoresPerfect) {
    SynthOptions o;
    o.gaussians = 20;
    o.size = 16;
    o.test_views = 3;
    const auto s = synth_scene(o);
    const auto r = evaluate(s.truth, s);
    ASSERT_EQ(r.psnr.size(), 3u);
    EXPECT_EQ(r.mean_psnr, loss::kPsnrCap);
    EXPECT_NEAR(r.mean_ssim, 1.0, 1e-12);
    EXPECT_EQ(r.gaussian_count, 20u);
    EXPECT_NE(r.to_table().find("mean"), std::string::npos);
    EXPECT_TRUE(nlohmann::json::parse(r.to_json()).contains("psnr"));

    const auto empty = evaluate(scene::GaussianSet{}, s);
    EXPECT_LT(empty.mean_psnr, r.mean_psnr);
}
