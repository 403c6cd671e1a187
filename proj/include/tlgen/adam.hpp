#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlgen/autodiff.hpp"

namespace tlgen {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamOptions options;
  std::vector<Tensor<Scalar>> first_moment;
  std::vector<Tensor<Scalar>> second_moment;
  std::int64_t step_count = 0;

  /// Zeroed moments shaped like `params`.
  static AdamState for_shapes(std::span<const Shape> shapes, AdamOptions options = {});
};

/// Bias-corrected Adam update of `params` in place. Every gradient is checked
/// for finiteness before any parameter is touched; on failure a NumericError
/// is thrown and neither params nor state change.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params,
               std::span<const Tensor<Scalar>* const> grads, AdamState<Scalar>& state);

/// Adam bound to a fixed list of graph leaves. A leaf without an accumulated
/// gradient is stepped with a zero gradient.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var<Scalar>> params, AdamOptions options = {});

  void step();
  void zero_grad();
  /// Fresh moments and step count; used at training stage boundaries.
  void reset();

  AdamState<Scalar>& state() { return state_; }
  const AdamState<Scalar>& state() const { return state_; }
  const std::vector<Var<Scalar>>& params() const { return params_; }

 private:
  std::vector<Var<Scalar>> params_;
  AdamState<Scalar> state_;
};

}  // namespace tlgen
