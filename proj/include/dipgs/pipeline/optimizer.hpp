// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/diff/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dipgs::pipeline {

enum class OptimizerMode { adam, adamw };

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    OptimizerMode mode = OptimizerMode::adam;
    /// Decoupled decay, AdamW only: p <- p * (1 - lr * weight_decay) before the Adam update.
    double weight_decay = 0.0;
};

struct Moments {
    std::vector<double> m, v;
};

/// One bias-corrected update; `step` counts from 1.
void adam_step(std::span<double> params, std::span<const double> grads, Moments& moments, std::uint64_t step,
               double lr, const AdamOptions& options);

/// Adam/AdamW over leaf tensors with per-parameter learning rates.
class Optimizer {
public:
    struct Slot {
        diff::Tensor param;
        double lr = 0.0;
        Moments moments;
    };

    explicit Optimizer(AdamOptions options = {}) : options_(options) {}

    void add(const diff::Tensor& param, double lr);
    /// Applies one step to every registered parameter; parameters absent from
    /// `grads` are treated as having zero gradient.
    void step(const diff::Gradients& grads);

    std::uint64_t steps() const { return step_; }
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    AdamOptions options_;
    std::vector<Slot> slots_;
    std::uint64_t step_ = 0;
};

}  // namespace dipgs::pipeline
