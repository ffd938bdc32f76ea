// SPDX-License-Identifier: Apache-2.0
#include "dipgs/pipeline/optimizer.hpp"

#include <cmath>

namespace dipgs::pipeline {

void adam_step(std::span<double> params, std::span<const double> grads, Moments& mo, std::uint64_t step, double lr,
               const AdamOptions& o) {
    if (grads.size() != params.size()) throw diff::ShapeError("adam_step: gradient and parameter sizes differ");
    if (step == 0) throw std::invalid_argument("adam_step: step counts from 1");
    if (mo.m.size() != params.size()) mo.m.assign(params.size(), 0.0);
    if (mo.v.size() != params.size()) mo.v.assign(params.size(), 0.0);
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    const double decay = o.mode == OptimizerMode::adamw ? 1.0 - lr * o.weight_decay : 1.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        mo.m[i] = o.beta1 * mo.m[i] + (1.0 - o.beta1) * grads[i];
        mo.v[i] = o.beta2 * mo.v[i] + (1.0 - o.beta2) * grads[i] * grads[i];
        const double m_hat = mo.m[i] / c1;
        const double v_hat = mo.v[i] / c2;
        params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
}

void Optimizer::add(const diff::Tensor& param, double lr) {
    if (!param.is_leaf() || !param.requires_grad()) throw std::invalid_argument("optimizer parameters must be trainable leaves");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    Slot s;
    s.param = param;
    s.lr = lr;
    s.moments.m.assign(param.size(), 0.0);
    s.moments.v.assign(param.size(), 0.0);
    slots_.push_back(std::move(s));
}

void Optimizer::step(const diff::Gradients& grads) {
    ++step_;
    for (auto& s : slots_) {
        const auto g = grads.view(s.param);
        std::vector<double> zero;
        std::span<const double> gv = g;
        if (gv.size() != s.param.size()) {
            zero.assign(s.param.size(), 0.0);
            gv = zero;
        }
        adam_step(s.param.mutable_values(), gv, s.moments, step_, s.lr, options_);
    }
}

}  // namespace dipgs::pipeline
