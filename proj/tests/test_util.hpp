#pragma once

#include <random>

#include "tlgen/tensor.hpp"

namespace tlgen::test {

template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(u(rng));
  return t;
}

/// NHWC element accessor for hand-written oracles.
template <typename Scalar>
Scalar at4(const Tensor<Scalar>& t, Index n, Index y, Index x, Index c) {
  return t[((n * t.dim(1) + y) * t.dim(2) + x) * t.dim(3) + c];
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

}  // namespace tlgen::test
