// SPDX-License-Identifier: Apache-2.0
// Serial against OpenMP variants of the conv and compositing kernels.

#include "dipgs/diff/conv_kernels.hpp"
#include "dipgs/render/rasterizer.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace dipgs;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

struct ConvData {
    diff::ConvGeometry g;
    std::vector<double> in, kernel, bias, grad_out, out, grad_in, grad_kernel;

    explicit ConvData(std::size_t side, std::size_t ci, std::size_t co) {
        g = diff::make_conv_geometry(side, side, ci, 3, 3, ci, co, 1, diff::Padding::same);
        in = random_values(side * side * ci, 1);
        kernel = random_values(9 * ci * co, 2);
        bias = random_values(co, 3);
        grad_out = random_values(side * side * co, 4);
        out.resize(grad_out.size());
        grad_in.resize(in.size());
        grad_kernel.resize(kernel.size());
    }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
    ConvData d(static_cast<std::size_t>(state.range(0)), 32, 32);
    for (auto _ : state) {
        if constexpr (Parallel) {
            diff::parallel::conv2d_forward(d.g, d.in, d.kernel, d.bias, d.out);
        } else {
            diff::serial::conv2d_forward(d.g, d.in, d.kernel, d.bias, d.out);
        }
        benchmark::DoNotOptimize(d.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.out.size()));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
    ConvData d(static_cast<std::size_t>(state.range(0)), 32, 32);
    for (auto _ : state) {
        std::fill(d.grad_in.begin(), d.grad_in.end(), 0.0);
        std::fill(d.grad_kernel.begin(), d.grad_kernel.end(), 0.0);
        if constexpr (Parallel) {
            diff::parallel::conv2d_backward_input(d.g, d.grad_out, d.kernel, d.grad_in);
            diff::parallel::conv2d_backward_kernel(d.g, d.in, d.grad_out, d.grad_kernel);
        } else {
            diff::serial::conv2d_backward_input(d.g, d.grad_out, d.kernel, d.grad_in);
            diff::serial::conv2d_backward_kernel(d.g, d.in, d.grad_out, d.grad_kernel);
        }
        benchmark::DoNotOptimize(d.grad_kernel.data());
    }
}

struct CompositeData {
    render::raster::Frame frame;
    std::vector<render::raster::Prepared> gaussians;
    std::vector<double> image, grad_image;
    std::vector<render::raster::PreparedGrad> grads;

    CompositeData(std::size_t side, std::size_t count) {
        frame.width = frame.height = side;
        frame.background = {1, 1, 1};
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double s = static_cast<double>(side);
        for (std::size_t i = 0; i < count; ++i) {
            render::raster::Prepared p;
            p.u = s * u(rng);
            p.v = s * u(rng);
            const double sigma = 0.5 + 2.5 * u(rng);
            p.conic_a = p.conic_c = 1.0 / (sigma * sigma);
            p.color = {u(rng), u(rng), u(rng)};
            p.opacity = 0.2 + 0.7 * u(rng);
            const int r = static_cast<int>(3 * sigma) + 1;
            p.x0 = std::max(0, static_cast<int>(p.u) - r);
            p.x1 = std::min(static_cast<int>(side) - 1, static_cast<int>(p.u) + r);
            p.y0 = std::max(0, static_cast<int>(p.v) - r);
            p.y1 = std::min(static_cast<int>(side) - 1, static_cast<int>(p.v) + r);
            gaussians.push_back(p);
        }
        image.resize(side * side * 3);
        grad_image = random_values(image.size(), 6);
        grads.resize(count);
    }
};

template <bool Parallel>
void BM_Composite(benchmark::State& state) {
    CompositeData d(64, static_cast<std::size_t>(state.range(0)));
    std::vector<std::vector<render::raster::Contribution>> bands;
    for (auto _ : state) {
        if constexpr (Parallel) {
            render::raster::parallel::composite(d.frame, d.gaussians, d.image, &bands);
            render::raster::parallel::composite_backward(d.frame, d.gaussians, bands, d.grad_image, d.grads);
        } else {
            render::raster::serial::composite(d.frame, d.gaussians, d.image, &bands);
            render::raster::serial::composite_backward(d.frame, d.gaussians, bands, d.grad_image, d.grads);
        }
        benchmark::DoNotOptimize(d.grads.data());
    }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Composite<false>)->Name("composite/serial")->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Composite<true>)->Name("composite/parallel")->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
