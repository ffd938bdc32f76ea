// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dipgs::verify {

struct GradCheckOptions {
    /// Starting step of the central differences; shrunk only where halving it changes the estimate.
    double step = 1e-4;
    /// Step for whole-network checks, small enough that probes rarely cross a
    /// leaky-ReLU kink or a depth-order swap.
    double network_step = 1e-5;
    double tolerance = 1e-4;
    /// Entries probed per parameter tensor (all entries when the tensor is smaller).
    std::size_t max_entries = 24;
    /// Multiple of eps * max(1, |loss|) / step taken as the roundoff of one central difference.
    double roundoff_safety = 100.0;
    /// Error denominator floor; check_* functions set it from roundoff_floor().
    double zero_floor = 0.0;
};

/// Error for one parameter group: max |analytic - numeric| over probed entries
/// divided by the larger of the two max magnitudes and GradCheckOptions::zero_floor.
struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t probes = 0;
    bool passed = false;
};

/// Gradient magnitude below which central differences resolve nothing but
/// roundoff at the given tolerance. Gradients that vanish identically (a conv
/// bias followed by normalization) are compared absolutely against this level.
double roundoff_floor(double loss, const GradCheckOptions& options);

double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor);

/// Central differences of a graph-building loss against diff::backward, for each leaf in `params`.
std::vector<GradCheckResult> check_tensor_gradients(const std::string& name, const std::function<diff::Tensor()>& loss,
                                                    const std::vector<std::pair<std::string, diff::Tensor>>& params,
                                                    const GradCheckOptions& options, std::mt19937_64& rng);

/// Central differences of a plain function of a vector against a supplied gradient.
GradCheckResult check_function(const std::string& name, std::vector<double> x,
                               const std::function<double(std::span<const double>)>& f,
                               std::span<const double> analytic, const GradCheckOptions& options);

/// Every differentiable operation of the library on random inputs.
std::vector<GradCheckResult> run_suite(std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace dipgs::verify
