// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tagmoe {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

// One vertex of the dynamic computation graph. Interior nodes own a closure
// that reads `grad` and accumulates into the grads of `inputs`.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  std::uint64_t id = 0;

  [[nodiscard]] bool is_leaf() const { return !backward; }
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node; use
/// `clone()` for an independent buffer.
///
/// The graph is rebuilt on every forward pass: ops record their inputs and a
/// backward closure while gradient recording is enabled (see NoGradGuard) and
/// at least one input requires grad. Leaves created with `parameter()` are the
/// trainable tensors; their `grad()` buffers accumulate across `backward()`
/// calls until `zero_grad()`.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor parameter(Shape shape, std::vector<double> data);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rank() const { return shape().size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const;
  [[nodiscard]] std::size_t numel() const;

  [[nodiscard]] std::span<const double> data() const;
  [[nodiscard]] std::span<double> mutable_data();
  [[nodiscard]] std::vector<double> to_vector() const;
  [[nodiscard]] double item() const;
  [[nodiscard]] double at(std::size_t i) const;
  [[nodiscard]] double at(std::size_t row, std::size_t col) const;

  [[nodiscard]] bool requires_grad() const;
  void set_requires_grad(bool on);
  /// Empty span until a backward pass reached this tensor.
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, cut from the graph.
  [[nodiscard]] Tensor detach() const;
  /// Deep copy of the values as a fresh leaf with the same requires_grad flag.
  [[nodiscard]] Tensor clone() const;

  [[nodiscard]] std::uint64_t id() const;
  [[nodiscard]] const detail::NodePtr& node() const { return node_; }

  /// Internal: builds the result of an op. The backward closure is only kept
  /// when recording is enabled and some input requires grad.
  static Tensor make_result(Shape shape, std::vector<double> value,
                            std::vector<Tensor> inputs, detail::BackwardFn backward);

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;
};

/// Reverse-mode sweep from a scalar loss. Interior gradients are recomputed
/// from scratch on every call; leaf gradients accumulate.
void backward(const Tensor& loss);

[[nodiscard]] bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace tagmoe
