// SPDX-License-Identifier: Apache-2.0
#include "dipgs/diff/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace dipgs::diff {

namespace {

std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> values, bool requires_grad) {
    if (element_count(shape) != values.size()) {
        throw ShapeError("tensor of shape " + to_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->id = next_id();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return node;
}

}  // namespace

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(make_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    const auto n = element_count(shape);
    return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return Tensor(make_node(std::move(shape), std::move(values), true));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) throw ShapeError("axis out of range for shape " + to_string(shape()));
    return node_->shape[axis];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
}

std::span<double> Tensor::mutable_values() {
    if (!is_leaf()) throw GraphError("mutable_values() on non-leaf tensor produced by " + std::string(op()));
    return node_->value;
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

Tensor record(const char* op,
              std::vector<Tensor> inputs,
              Shape shape,
              std::vector<double> value,
              BackwardFn backward) {
    for (double v : value) {
        if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + " produced a non-finite value");
    }
    bool needs_grad = false;
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();

    auto node = make_node(std::move(shape), std::move(value), needs_grad);
    node->op = op;
    if (needs_grad) {
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.node_);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor Gradients::of(const Tensor& parameter) const {
    auto it = grads_.find(parameter.id());
    if (it == grads_.end()) return Tensor::zeros(parameter.shape());
    return Tensor::constant(parameter.shape(), it->second);
}

std::span<const double> Gradients::view(const Tensor& parameter) const {
    auto it = grads_.find(parameter.id());
    if (it == grads_.end()) return {};
    return it->second;
}

Gradients backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward() needs a scalar loss");
    }
    Gradients result;
    if (!loss.requires_grad()) return result;

    // Iterative post-order DFS; a node seen again while still on the stack is a cycle.
    enum class Mark : std::uint8_t { open, done };
    std::unordered_map<const Node*, Mark> marks;
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    marks[loss.node().get()] = Mark::open;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (!child->requires_grad) continue;
            auto it = marks.find(child);
            if (it == marks.end()) {
                marks[child] = Mark::open;
                stack.emplace_back(child, 0);
            } else if (it->second == Mark::open) {
                throw GraphError("cycle detected in computation graph");
            }
        } else {
            marks[node] = Mark::done;
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<const Node*, std::vector<double>> grads;
    grads[loss.node().get()] = {1.0};
    std::vector<std::vector<double>*> slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto found = grads.find(node);
        if (found == grads.end()) continue;
        if (node->inputs.empty()) {
            result.grads_[node->id] = std::move(found->second);
            grads.erase(found);
            continue;
        }
        // Element references survive rehashing; iterators do not.
        std::vector<double>& grad_out = found->second;
        slots.assign(node->inputs.size(), nullptr);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            Node* in = node->inputs[i].get();
            if (!in->requires_grad) continue;
            auto& g = grads[in];
            if (g.empty()) g.assign(in->value.size(), 0.0);
            slots[i] = &g;
        }
        node->backward(grad_out, GradSlots(slots.data(), slots.size()));
        grads.erase(node);
    }
    return result;
}

}  // namespace dipgs::diff
