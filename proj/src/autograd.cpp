#include "prnet/autograd.hpp"

#include <unordered_set>
#include <utility>

#include "prnet/error.hpp"

namespace prnet {
namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename Scalar>
Var<Scalar>::Var(Tensor<Scalar> value, bool requires_grad) : node_(std::make_shared<Node<Scalar>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
void Var<Scalar>::backward() const {
  if (!node_ || node_->value.numel() != 1) {
    throw Error(ErrorKind::usage, "backward", "output must hold exactly one element");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; input order is fixed, so the sweep order is too.
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Scalar>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
  for (Node<Scalar>* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->grad = Tensor<Scalar>();
    }
  }
}

template <typename Scalar, typename Range>
Var<Scalar> make_result_impl(Tensor<Scalar> value, const Range& inputs, const char* op,
                             std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(node));
}

template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs, const char* op,
                        std::function<void(Node<Scalar>&)> backward) {
  return make_result_impl<Scalar>(std::move(value), inputs, op, std::move(backward));
}

template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs, const char* op,
                        std::function<void(Node<Scalar>&)> backward) {
  return make_result_impl<Scalar>(std::move(value), inputs, op, std::move(backward));
}

template class Var<float>;
template class Var<double>;
template Var<float> make_result(Tensor<float>, std::initializer_list<Var<float>>, const char*,
                                std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, std::initializer_list<Var<double>>, const char*,
                                 std::function<void(Node<double>&)>);
template Var<float> make_result(Tensor<float>, const std::vector<Var<float>>&, const char*,
                                std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, const std::vector<Var<double>>&, const char*,
                                 std::function<void(Node<double>&)>);

}  // namespace prnet
