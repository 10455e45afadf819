#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "disfl/tensor.hpp"

namespace disfl::tc {

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  /// Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  Tensor<T>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

/// Handle to a node of the computation graph. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// Leaf that never receives gradients.
  static Var constant(Tensor<T> value);
  /// Leaf that accumulates gradients (a parameter).
  static Var leaf(Tensor<T> value);

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Gradient buffer, zero-allocated on first access.
  Tensor<T>& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->has_grad; }
  void zero_grad();

  /// Reverse-mode sweep from this scalar; accumulates d(this)/d(leaf) into
  /// every reachable leaf that requires grad.
  void backward();

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Graph recording switch. While disabled, ops produce constants.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
struct Parameter {
  std::string name;
  Var<T> var;

  const Tensor<T>& value() const { return var.value(); }
  Tensor<T>& mutable_value() { return var.mutable_value(); }
  Tensor<T>& grad() { return var.grad(); }
  void zero_grad() { var.zero_grad(); }
};

template <class T>
Parameter<T> make_parameter(std::string name, Tensor<T> value) {
  return {std::move(name), Var<T>::leaf(std::move(value))};
}

/// Builds an op result. Records parents and the backward closure only when
/// recording is on and some parent requires grad.
template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward);

}  // namespace disfl::tc
