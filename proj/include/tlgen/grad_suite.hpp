#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tlgen {

inline constexpr double kGradSuiteTolerance = 1e-3;
/// A case fails when more than this fraction of its probed coordinates sit
/// on a relu kink even at the smallest step.
inline constexpr double kGradSuiteMaxKinkFraction = 0.25;

/// Outcome of one gradient-check case. `double_error` compares double-precision
/// reverse-mode gradients with central differences; `float_error` compares the
/// single-precision gradients with the double-precision ones on identical
/// values.
struct GradSuiteEntry {
  std::string name;
  double double_error = 0.0;
  double float_error = 0.0;
  long coords = 0;
  long kinks = 0;  // coordinates skipped as ReLU kink crossings
  double seconds = 0.0;
  std::string worst;  // worst coordinate of the double check
  std::string float_worst;

  double max_error() const { return double_error > float_error ? double_error : float_error; }
  bool passed() const {
    return max_error() < kGradSuiteTolerance &&
           static_cast<double>(kinks) <= kGradSuiteMaxKinkFraction * static_cast<double>(coords);
  }
};

/// Every differentiable op, every loss, and tiny clones of each model kind.
std::vector<GradSuiteEntry> run_grad_suite(std::uint64_t seed = 0);

}  // namespace tlgen
