#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tlgen/tensor.hpp"

namespace tlgen {

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;

  void accumulate(const VectorX<Scalar>& g) {
    if (grad.empty()) {
      grad = Tensor<Scalar>(value.shape(), g);
    } else {
      grad.data() += g;
    }
  }
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.empty()) {
      grad = Tensor<Scalar>(value.shape());
      grad.data() = g;
    } else {
      grad.data() += g;
    }
  }
};

/// Handle to a node in the dynamic differentiation graph. Copies share the node.
template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;
  explicit Var(Tensor<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor<Scalar>& value() const { return node_->value; }
  /// Direct write access for optimizers and checkpoint loading.
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor<Scalar>(); }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(int axis) const { return node_->value.dim(axis); }
  Index size() const { return node_->value.size(); }
  bool valid() const { return node_ != nullptr; }

  /// First element; convenient for scalar losses.
  Scalar item() const { return node_->value[0]; }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Builds a result node; drops the backward closure when no parent needs grad.
/// Throws NumericError when the forward value is not finite.
template <typename Scalar>
Var<Scalar> make_result(const char* op, Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                        std::function<void(Node<Scalar>&)> backward_fn);

/// Reverse sweep from a single-element root. Gradients accumulate into leaves.
template <typename Scalar>
void backward(const Var<Scalar>& root);

/// Same value, no graph history.
template <typename Scalar>
Var<Scalar> detach(const Var<Scalar>& v);

// Elementwise and structural ops.
template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s);
template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s);
template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a);
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a);
template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a);
/// sum(a * w) for a constant weight tensor w.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& a, const Tensor<Scalar>& w);
template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape);
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, int axis);
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& a, int axis, Index start, Index length);
/// log(max(a, floor)); gradient is zero where the floor is active.
template <typename Scalar>
Var<Scalar> log_clamped(const Var<Scalar>& a, Scalar floor);

enum class Activation { kRelu, kTanh, kSigmoid };

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a);
/// While a trace is open, every relu on this thread folds its on/off pattern
/// into a signature. Two evaluations with equal signatures ran on the same
/// linear piece of every relu.
void begin_relu_trace();
std::uint64_t end_relu_trace();
template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a);
template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a);
template <typename Scalar>
Var<Scalar> activation(const Var<Scalar>& a, Activation kind);

}  // namespace tlgen
