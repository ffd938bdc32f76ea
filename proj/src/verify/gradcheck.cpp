// SPDX-License-Identifier: Apache-2.0
#include "dipgs/verify/gradcheck.hpp"

#include "dipgs/diff/ops.hpp"
#include "dipgs/dip/generator.hpp"
#include "dipgs/loss/losses.hpp"
#include "dipgs/render/splat.hpp"
#include "dipgs/scene/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace dipgs::verify {

using namespace dipgs::scene;
using diff::Tensor;

namespace {

using Named = std::vector<std::pair<std::string, Tensor>>;

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

/// Values with |x| in [0.1, 1.5] and random sign, away from kinks at 0.
std::vector<double> off_zero(std::mt19937_64& rng, std::size_t n) {
    auto v = uniform(rng, n, 0.1, 1.5);
    std::bernoulli_distribution sign(0.5);
    for (double& x : v) x = sign(rng) ? x : -x;
    return v;
}

std::size_t numel(const diff::Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Tensor param(std::mt19937_64& rng, diff::Shape shape, double lo = -1.0, double hi = 1.0) {
    const std::size_t n = numel(shape);
    return Tensor::parameter(std::move(shape), uniform(rng, n, lo, hi));
}

/// sum(x * w) for fixed random w, so every output entry carries a distinct weight.
Tensor project_out(const Tensor& x, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return diff::sum(x * Tensor::constant(x.shape(), uniform(rng, x.size(), -1.0, 1.0)));
}

std::vector<std::size_t> probe_indices(std::size_t size, std::size_t max_entries, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    if (size <= max_entries) return idx;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_entries);
    return idx;
}

GradCheckResult make_result(std::string name, std::span<const double> analytic, std::span<const double> numeric,
                            const GradCheckOptions& options) {
    GradCheckResult r;
    r.name = std::move(name);
    r.max_rel_error = relative_error(analytic, numeric, options.zero_floor);
    r.probes = analytic.size();
    r.passed = r.max_rel_error < options.tolerance;
    return r;
}

Mat2 random_sym2(std::mt19937_64& rng) {
    auto v = uniform(rng, 3, -1.0, 1.0);
    return {{{v[0], v[1]}, {v[1], v[2]}}};
}

Mat3 random_mat3(std::mt19937_64& rng) {
    auto v = uniform(rng, 9, -1.0, 1.0);
    return {{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}}};
}

template <std::size_t R, std::size_t C>
double contract(const std::array<std::array<double, C>, R>& a, const std::array<std::array<double, C>, R>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) s += a[i][j] * b[i][j];
    return s;
}

Quat random_quat(std::mt19937_64& rng) {
    auto v = uniform(rng, 4, -1.0, 1.0);
    v[0] += 1.5;
    return {v[0], v[1], v[2], v[3]};
}

Camera test_camera(std::size_t w, std::size_t h) {
    return look_at({0.3, -2.5, 0.8}, {0, 0, 0}, {0, 0, 1}, w, h, 50.0 * std::numbers::pi / 180.0);
}

GaussianTensors small_scene(std::mt19937_64& rng, std::size_t count) {
    GaussianTensors g;
    g.means = param(rng, {count, 3}, -0.3, 0.3);
    g.scales = param(rng, {count, 3}, 0.15, 0.35);
    std::vector<double> q;
    for (std::size_t i = 0; i < count; ++i) {
        const Quat r = random_quat(rng);
        q.insert(q.end(), r.begin(), r.end());
    }
    g.rotations = Tensor::parameter({count, 4}, std::move(q));
    g.opacities = param(rng, {count, 1}, 0.2, 0.3);
    g.sh = param(rng, {count, 3}, -0.8, 0.8);
    return g;
}

Named scene_params(const GaussianTensors& g) {
    return {{"means", g.means}, {"scales", g.scales}, {"rotations", g.rotations}, {"opacities", g.opacities},
            {"sh", g.sh}};
}

/// Central difference of g(offset) at 0. Starting from `step`, halves and
/// compares; a disagreement means the probe straddles a kink or a reordering,
/// so the step shrinks by 4x until consecutive estimates agree.
double central_difference(const std::function<double(double)>& g, const GradCheckOptions& options) {
    double h = options.step;
    const auto d = [&g](double step) { return (g(step) - g(-step)) / (2.0 * step); };
    // zero_floor * tolerance is the roundoff of one estimate at the starting step.
    const auto roundoff = [&options](double step) { return options.zero_floor * options.tolerance * options.step / step; };
    double coarse = d(h);
    for (int attempt = 0; attempt < 4; ++attempt) {
        const double fine = d(0.5 * h);
        const double slack = 0.1 * options.tolerance * std::max(std::abs(coarse), std::abs(fine)) + roundoff(0.5 * h);
        if (std::abs(coarse - fine) <= slack) return fine;
        h *= 0.25;
        coarse = d(h);
    }
    return coarse;
}

void append(std::vector<GradCheckResult>& out, std::vector<GradCheckResult> more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

}  // namespace

double roundoff_floor(double loss, const GradCheckOptions& options) {
    return options.roundoff_safety * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(loss)) /
           (options.step * options.tolerance);
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    return diff / scale;
}

std::vector<GradCheckResult> check_tensor_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                                    const Named& params, const GradCheckOptions& options,
                                                    std::mt19937_64& rng) {
    const Tensor base = loss();
    const auto grads = diff::backward(base);
    GradCheckOptions scaled = options;
    scaled.zero_floor = roundoff_floor(base.item(), options);
    std::vector<GradCheckResult> out;
    for (const auto& [pname, p] : params) {
        Tensor leaf = p;
        const auto g = grads.of(leaf);
        std::vector<double> analytic, numeric;
        for (std::size_t i : probe_indices(leaf.size(), options.max_entries, rng)) {
            auto v = leaf.mutable_values();
            const double x = v[i];
            numeric.push_back(central_difference(
                [&](double offset) {
                    v[i] = x + offset;
                    const double f = loss().item();
                    v[i] = x;
                    return f;
                },
                scaled));
            analytic.push_back(g[i]);
        }
        out.push_back(make_result(name + "/" + pname, analytic, numeric, scaled));
    }
    return out;
}

GradCheckResult check_function(const std::string& name, std::vector<double> x,
                               const std::function<double(std::span<const double>)>& f,
                               std::span<const double> analytic, const GradCheckOptions& options) {
    if (analytic.size() != x.size()) throw std::invalid_argument("check_function: gradient size mismatch");
    GradCheckOptions scaled = options;
    scaled.zero_floor = roundoff_floor(f(x), options);
    std::vector<double> numeric(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        numeric[i] = central_difference(
            [&](double offset) {
                x[i] = xi + offset;
                const double v = f(x);
                x[i] = xi;
                return v;
            },
            scaled);
    }
    return make_result(name, analytic, numeric, scaled);
}

std::vector<GradCheckResult> run_suite(std::uint64_t seed, const GradCheckOptions& options) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheckResult> out;
    const auto check = [&](const std::string& name, const std::function<Tensor()>& loss, const Named& params) {
        append(out, check_tensor_gradients(name, loss, params, options, rng));
    };

    // ---- tensor operations ----
    {
        const Tensor x = param(rng, {7, 6, 3});
        const Tensor k = param(rng, {3, 3, 3, 4});
        const Tensor b = param(rng, {4});
        const Named ps{{"input", x}, {"kernel", k}, {"bias", b}};
        check("conv2d.same", [&] { return project_out(diff::conv2d(x, k, b, 1, diff::Padding::same), 1); }, ps);
        check("conv2d.stride2", [&] { return project_out(diff::conv2d(x, k, b, 2, diff::Padding::same), 2); }, ps);
        check("conv2d.valid", [&] { return project_out(diff::conv2d(x, k, b, 1, diff::Padding::valid), 3); }, ps);
    }
    {
        const Tensor x = param(rng, {5, 4, 3});
        const Tensor gamma = param(rng, {3}, 0.5, 1.5);
        const Tensor beta = param(rng, {3});
        check("normalize", [&] { return project_out(diff::normalize(x, gamma, beta), 4); },
              {{"input", x}, {"gamma", gamma}, {"beta", beta}});
    }
    {
        const Tensor x = Tensor::parameter({4, 4, 2}, off_zero(rng, 32));
        check("leaky_relu", [&] { return project_out(diff::activation(x, diff::Activation::leaky_relu), 5); },
              {{"input", x}});
        check("sigmoid", [&] { return project_out(diff::activation(x, diff::Activation::sigmoid), 6); }, {{"input", x}});
        check("tanh", [&] { return project_out(diff::activation(x, diff::Activation::tanh), 7); }, {{"input", x}});
        check("exp", [&] { return project_out(diff::activation(x, diff::Activation::exp), 8); }, {{"input", x}});
        check("abs", [&] { return project_out(diff::abs(x), 9); }, {{"input", x}});
    }
    {
        const Tensor x = param(rng, {3, 5, 2});
        check("upsample_bilinear", [&] { return project_out(diff::upsample_bilinear(x), 10); }, {{"input", x}});
    }
    {
        const Tensor a = param(rng, {3, 3, 2});
        const Tensor b = param(rng, {3, 3, 2});
        const Tensor c = Tensor::parameter({3, 3, 2}, uniform(rng, 18, 0.05, 0.95));
        const std::vector<double> s{0.5, -2.0}, t{0.1, 0.3};
        check("elementwise",
              [&] {
                  const Tensor parts[] = {a * b - a, diff::square(b) + diff::scale(a, 3.0)};
                  const Tensor cat = diff::concat_channels(parts);
                  const Tensor aff = diff::channel_affine(diff::clamp(c, 0.0, 1.0), s, t);
                  return project_out(cat, 11) + diff::mean(diff::reshape(aff, {18})) + diff::sum(diff::add_scalar(a, 2.0));
              },
              {{"a", a}, {"b", b}, {"c", c}});
    }

    // ---- projection and covariance chain ----
    {
        const Camera cam = test_camera(16, 12);
        const Vec3 mean{0.2, -0.1, 0.3};
        const auto w = uniform(rng, 2, -1.0, 1.0);
        const auto f = [&](std::span<const double> x) {
            const auto p = render::project({x[0], x[1], x[2]}, cam);
            return w[0] * p->u + w[1] * p->v;
        };
        const auto p = render::project(mean, cam);
        const Vec3 gc = render::project_backward(cam, p->camera_point, w[0], w[1]);
        const Vec3 gw = matvec(transpose(cam.rotation), gc);
        out.push_back(check_function("projection/mean", {mean.begin(), mean.end()}, f, gw, options));
    }
    {
        const Camera cam = test_camera(16, 12);
        const Vec3 point{0.1, -0.2, 2.4};
        const Mat3 cov = covariance3d({0.2, 0.1, 0.3}, random_quat(rng));
        const Mat2 g = random_sym2(rng);
        const auto grad = render::splat_covariance_backward(cov, cam, point, g);
        // The covariance is symmetric: probe its six unique entries, off-diagonal pairs moving together.
        constexpr std::array<std::pair<int, int>, 6> kUpper{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
        std::vector<double> x, analytic;
        for (const auto& [r, c] : kUpper) {
            x.push_back(cov[r][c]);
            analytic.push_back(r == c ? grad.cov3d[r][c] : grad.cov3d[r][c] + grad.cov3d[c][r]);
        }
        x.insert(x.end(), point.begin(), point.end());
        analytic.insert(analytic.end(), grad.camera_point.begin(), grad.camera_point.end());
        const auto f = [&](std::span<const double> v) {
            Mat3 c{};
            for (std::size_t i = 0; i < kUpper.size(); ++i) {
                const auto [r, k] = kUpper[i];
                c[r][k] = c[k][r] = v[i];
            }
            return contract(render::splat_covariance(c, cam, {v[6], v[7], v[8]}), g);
        };
        out.push_back(check_function("splat_covariance/cov3d+point", x, f, analytic, options));
    }
    {
        const Vec3 s{0.3, 0.15, 0.6};
        const Quat q = random_quat(rng);
        const Mat3 g = random_mat3(rng);
        const auto grad = covariance3d_backward(s, q, g);
        std::vector<double> x{s.begin(), s.end()}, analytic{grad.scale.begin(), grad.scale.end()};
        x.insert(x.end(), q.begin(), q.end());
        analytic.insert(analytic.end(), grad.rotation.begin(), grad.rotation.end());
        const auto f = [&](std::span<const double> v) {
            return contract(covariance3d({v[0], v[1], v[2]}, {v[3], v[4], v[5], v[6]}), g);
        };
        out.push_back(check_function("covariance3d/scale+rotation", x, f, analytic, options));
    }
    {
        const Quat q = random_quat(rng);
        const Mat3 g = random_mat3(rng);
        const Quat grad = quaternion_to_rotation_backward(q, g);
        const auto f = [&](std::span<const double> v) { return contract(quaternion_to_rotation({v[0], v[1], v[2], v[3]}), g); };
        out.push_back(check_function("quaternion_to_rotation", {q.begin(), q.end()}, f, grad, options));
    }

    // ---- render ----
    {
        const auto g = small_scene(rng, 3);
        const Camera cam = test_camera(8, 8);
        const Tensor target = Tensor::constant({8, 8, 3}, uniform(rng, 192, 0.0, 1.0));
        const auto opts = render::RenderOptions::exact();
        check("render.photometric",
              [&] { return loss::photometric(render::render(g, cam, {0.2, 0.5, 0.9}, opts), target, 0.2); },
              scene_params(g));
    }

    // ---- losses ----
    {
        const Tensor a = param(rng, {16, 14, 3}, 0.0, 1.0);
        const Tensor b = param(rng, {16, 14, 3}, 0.0, 1.0);
        check("ssim.windowed", [&] { return loss::ssim(a, b); }, {{"a", a}, {"b", b}});
        const Tensor c = param(rng, {8, 6, 3}, 0.0, 1.0);
        const Tensor d = param(rng, {8, 6, 3}, 0.0, 1.0);
        check("ssim.global", [&] { return loss::ssim(c, d); }, {{"a", c}, {"b", d}});
        check("photometric", [&] { return loss::photometric(a, b, 0.2); }, {{"pred", a}, {"gt", b}});
    }
    {
        const Tensor a = param(rng, {9, 3});
        const Tensor b = param(rng, {6, 3});
        check("chamfer", [&] { return loss::chamfer(a, b); }, {{"a", a}, {"b", b}});
    }
    {
        const Tensor o = Tensor::parameter({10, 1}, off_zero(rng, 10));
        const Tensor s = Tensor::parameter({10, 3}, off_zero(rng, 30));
        check("opacity_reg", [&] { return loss::opacity_reg(o); }, {{"opacities", o}});
        check("scale_reg", [&] { return loss::scale_reg(s); }, {{"scales", s}});
    }
    {
        auto g = small_scene(rng, 4);
        const std::vector<Camera> cams{test_camera(8, 8), look_at({2.0, 0.5, 0.3}, {0, 0, 0}, {0, 0, 1}, 8, 8, 0.9)};
        check("occlusion_reg", [&] { return loss::occlusion_reg(g, cams, 2.8); },
              {{"means", g.means}, {"scales", g.scales}, {"rotations", g.rotations}, {"opacities", g.opacities}});
    }

    // ---- generator ----
    {
        dip::GeneratorConfig gc;
        gc.side = 8;
        gc.channels = {4, 8, 8};
        gc.noise = {8, 2, 2, 2};
        const SceneBounds bounds{{0, 0, 0}, {0.5, 0.5, 0.5}};
        dip::Generator gen(gc, bounds, rng);
        // Move the affine parameters off their (1, 0) start so no activation sits on a kink.
        for (const auto& [n, t] : gen.named_parameters()) {
            Tensor leaf = t;
            if (n.ends_with(".gamma")) std::ranges::copy(uniform(rng, leaf.size(), 0.5, 1.5), leaf.mutable_values().begin());
            if (n.ends_with(".beta")) std::ranges::copy(uniform(rng, leaf.size(), -0.5, 0.5), leaf.mutable_values().begin());
        }
        const auto z = dip::sample_noise(seed, gc.side, gc.noise);
        GradCheckOptions net = options;
        net.step = options.network_step;
        for (dip::Head h : dip::kHeads) {
            Named ps;
            for (const auto& [n, t] : gen.net(h).named_parameters()) ps.emplace_back(n, t);
            append(out, check_tensor_gradients(
                            std::string("generator.") + dip::head_name(h),
                            [&, h] { return project_out(gen.head(h, z), 20 + static_cast<std::uint64_t>(h)); }, ps, net,
                            rng));
        }
        const Camera cam = test_camera(8, 8);
        const Tensor target = Tensor::constant({8, 8, 3}, uniform(rng, 192, 0.0, 1.0));
        const auto opts = render::RenderOptions::exact();
        Named ps;
        for (const auto& [n, t] : gen.named_parameters()) {
            if (n.ends_with(".kernel") || n.ends_with(".bias")) ps.emplace_back(n, t);
        }
        net.max_entries = std::min<std::size_t>(options.max_entries, 4);
        append(out, check_tensor_gradients(
                        "generator.render",
                        [&] {
                            const auto g = dip::grid_to_gaussians(gen.generate(z));
                            return loss::photometric(render::render(g, cam, {1, 1, 1}, opts), target, 0.2);
                        },
                        ps, net, rng));
    }
    return out;
}

}  // namespace dipgs::verify
