// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dipgs::diff {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// One gradient buffer per op input; null where that input needs no gradient.
/// Buffers arrive zero-initialised (or holding earlier contributions) and must
/// be accumulated into, never overwritten.
using GradSlots = std::span<std::vector<double>* const>;
using BackwardFn = std::function<void(std::span<const double> grad_out, GradSlots grad_in)>;

/// A forward-operation record. Leaves carry no inputs and no backward function.
struct Node {
    std::uint64_t id = 0;
    const char* op = "leaf";
    Shape shape;
    std::vector<double> value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
};

/// Shared handle onto a node of the computation graph. Copies alias the same
/// node; values are immutable except through mutable_values() on leaves.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor scalar(double value);
    /// Leaf that requires a gradient.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return node_->value.size(); }
    std::span<const double> values() const { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double item() const;

    /// Only leaves may be mutated; the optimizer writes parameters through this.
    std::span<double> mutable_values();

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return node_->inputs.empty(); }
    std::uint64_t id() const { return node_->id; }
    const char* op() const { return node_->op; }

    /// Same values, cut from the graph.
    Tensor detach() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend Tensor record(const char*, std::vector<Tensor>, Shape, std::vector<double>, BackwardFn);
};

/// Registers the result of a forward operation. Throws NonFiniteError when any
/// output value is NaN/Inf. A graph edge is stored only if some input requires
/// a gradient; otherwise the result is a plain constant.
Tensor record(const char* op,
              std::vector<Tensor> inputs,
              Shape shape,
              std::vector<double> value,
              BackwardFn backward);

/// Parameter id -> gradient.
class Gradients {
public:
    /// Gradient for a parameter; the zero tensor if it is not on any path to the loss.
    Tensor of(const Tensor& parameter) const;
    std::span<const double> view(const Tensor& parameter) const;
    bool contains(const Tensor& parameter) const { return grads_.count(parameter.id()) != 0; }
    std::size_t size() const { return grads_.size(); }

private:
    std::unordered_map<std::uint64_t, std::vector<double>> grads_;
    friend Gradients backward(const Tensor& loss);
};

/// Reverse-mode sweep from a scalar loss.
Gradients backward(const Tensor& loss);

}  // namespace dipgs::diff
