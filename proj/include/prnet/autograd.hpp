#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

/// Graph node produced by one operation.
///
/// Leaves have no `backward`. A node records its inputs and backward closure
/// only when gradient recording is enabled and some input requires a
/// gradient; otherwise intermediate activations are released as soon as
/// their Var handles go out of scope.
template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialised on first use.
  Tensor<Scalar>& grad_buffer() {
    if (grad.empty()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
  Node& input(std::size_t i) { return *inputs[i]; }
};

/// Shared handle to a graph node. Copies alias the same node.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<Scalar> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<Scalar>& value() const { return node_->value; }
  /// In-place access for optimizers and finite-difference probes.
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  Tensor<Scalar>& mutable_grad() { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad = Tensor<Scalar>(); }
  Node<Scalar>* node() const { return node_.get(); }
  const std::shared_ptr<Node<Scalar>>& shared() const { return node_; }

  /// Reverse-mode sweep from a single-element output. Inputs' gradients
  /// accumulate into leaves; the recorded graph is released afterwards.
  void backward() const;

 private:
  std::shared_ptr<Node<Scalar>> node_;
};

bool grad_enabled() noexcept;

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

/// Wraps an op result. `backward` receives the result node; it reads
/// `node.grad` and accumulates into `node.input(i).grad_buffer()` for inputs
/// that require gradients.
template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs, const char* op,
                        std::function<void(Node<Scalar>&)> backward);

template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs, const char* op,
                        std::function<void(Node<Scalar>&)> backward);

extern template class Var<float>;
extern template class Var<double>;

}  // namespace prnet
