// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/scene_io.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace dipgs::io {

using namespace dipgs::scene;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Camera orbit_camera(const SynthOptions& o, double azimuth_deg, double elevation_deg) {
    const double az = azimuth_deg * kDeg, el = elevation_deg * kDeg;
    const Vec3 eye{o.radius * std::cos(el) * std::cos(az), o.radius * std::cos(el) * std::sin(az),
                   o.radius * std::sin(el)};
    return look_at(eye, {0, 0, 0}, {0, 0, 1}, o.size, o.size, o.fov_x_degrees * kDeg, 0.1);
}

// n azimuths evenly spaced over [-arc, arc]; a single view sits at 0.
std::vector<double> spread(std::size_t n, double arc) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(n == 1 ? 0.0 : -arc + 2.0 * arc * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return out;
}

}  // namespace

SyntheticScene synth_scene(const SynthOptions& o) {
    if (o.gaussians < 1) throw std::invalid_argument("synth: need at least one Gaussian");
    if (o.train_views < 1) throw std::invalid_argument("synth: need at least one training view");
    if (o.size < 1) throw std::invalid_argument("synth: image size must be positive");
    if (!(o.radius > 0.0)) throw std::invalid_argument("synth: radius must be positive");

    SyntheticScene s;
    s.seed = o.seed;
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double log_lo = std::log(0.02), log_hi = std::log(0.1);

    s.truth.reserve(o.gaussians);
    for (std::size_t i = 0; i < o.gaussians; ++i) {
        Vec3 mean{}, scale{}, color{};
        for (int k = 0; k < 3; ++k) mean[k] = s.bounds.center[k] + s.bounds.half_extent[k] * (2.0 * unit(rng) - 1.0);
        for (int k = 0; k < 3; ++k) scale[k] = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
        Quat q{};
        double len = 0.0;
        do {
            for (double& c : q) c = normal(rng);
            len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        } while (len < 1e-6);
        for (double& c : q) c /= len;
        const double opacity = 0.5 + 0.45 * unit(rng);
        for (int k = 0; k < 3; ++k) color[k] = unit(rng);
        s.truth.push_back(mean, scale, q, opacity,
                          {color_to_sh(color[0]), color_to_sh(color[1]), color_to_sh(color[2])});
    }

    for (double az : spread(o.train_views, o.train_arc_degrees)) s.train_cameras.push_back(orbit_camera(o, az, 20.0));
    const auto test_az = spread(o.test_views, o.test_arc_degrees);
    for (std::size_t i = 0; i < test_az.size(); ++i) {
        s.test_cameras.push_back(orbit_camera(o, test_az[i], i % 2 == 0 ? 10.0 : 30.0));
    }
    return s;
}

}  // namespace dipgs::io
