// SPDX-License-Identifier: Apache-2.0
#include "dipgs/pipeline/pipeline.hpp"

#include <cmath>
#include <numbers>

namespace dipgs::pipeline {

using namespace dipgs::scene;

namespace {

Quat slerp(Quat a, Quat b, double t) {
    double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
    if (d < 0) {
        for (double& c : b) c = -c;
        d = -d;
    }
    Quat out{};
    if (d > 0.9995) {
        for (int k = 0; k < 4; ++k) out[k] = a[k] + t * (b[k] - a[k]);
    } else {
        const double theta = std::acos(d);
        const double wa = std::sin((1 - t) * theta) / std::sin(theta);
        const double wb = std::sin(t * theta) / std::sin(theta);
        for (int k = 0; k < 4; ++k) out[k] = wa * a[k] + wb * b[k];
    }
    const double len = std::sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2] + out[3] * out[3]);
    for (double& c : out) c /= len;
    return out;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = normalized(axis);
    const double c = std::cos(angle), s = std::sin(angle), C = 1 - c;
    return {{{c + a[0] * a[0] * C, a[0] * a[1] * C - a[2] * s, a[0] * a[2] * C + a[1] * s},
             {a[1] * a[0] * C + a[2] * s, c + a[1] * a[1] * C, a[1] * a[2] * C - a[0] * s},
             {a[2] * a[0] * C - a[1] * s, a[2] * a[1] * C + a[0] * s, c + a[2] * a[2] * C}}};
}

}  // namespace

std::vector<Camera> pseudo_cameras(const std::vector<Camera>& train, const Vec3& center, std::size_t per_view,
                                   double jitter_degrees, std::mt19937_64& rng) {
    if (train.empty()) throw std::invalid_argument("pseudo_cameras: no training cameras");
    const double jitter = jitter_degrees * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> angle(-jitter, jitter);
    std::vector<Camera> out;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const Camera& a = train[i];
        const Camera& b = train[(i + 1) % train.size()];
        const Quat qa = rotation_to_quaternion(a.rotation), qb = rotation_to_quaternion(b.rotation);
        for (std::size_t k = 0; k < per_view; ++k) {
            const double t = static_cast<double>(k + 1) / static_cast<double>(per_view + 1);
            Camera c = a;
            Mat3 r = quaternion_to_rotation(slerp(qa, qb, t));
            // Carry camera a rigidly about the centre so the interpolated pose keeps its view of it.
            const double radius = norm(a.center() - center) + t * (norm(b.center() - center) - norm(a.center() - center));
            Vec3 eye = center + radius * normalized(matvec(matmul(transpose(r), a.rotation), a.center() - center));
            if (jitter > 0) {
                const Mat3 rj = axis_angle(r[1], angle(rng));
                eye = center + matvec(rj, eye - center);
                r = matmul(r, transpose(rj));
            }
            c.rotation = r;
            c.translation = -1.0 * matvec(r, eye);
            out.push_back(c);
        }
    }
    return out;
}

GsRun postprocess_gs(const GaussianSet& generated, const TrainingData& data, const std::vector<Camera>& poses, double p,
                     const GsConfig& config, double d_min, std::mt19937_64& rng, std::size_t log_every,
                     const ProgressFn& progress) {
    std::vector<View> pseudo(poses.size());
    const auto count = static_cast<std::ptrdiff_t>(poses.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto k = static_cast<std::size_t>(i);
        pseudo[k].camera = poses[k];
        pseudo[k].image = render::render(generated, poses[k], data.background).pixels;
    }
    return optimize_gs(generated, data, pseudo, p, config, d_min, rng, log_every, progress);
}

}  // namespace dipgs::pipeline
