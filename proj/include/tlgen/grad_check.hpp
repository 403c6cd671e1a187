#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tlgen/autodiff.hpp"

namespace tlgen {

inline constexpr double kMinGradCheckEps = 1e-6;
inline constexpr double kMaxGradCheckEps = 1e-3;

struct GradCheckOptions {
  double eps = 1e-6;
  /// Coordinates probed per input; 0 probes every coordinate. Probed
  /// coordinates are drawn without replacement from a seeded generator.
  Index max_coords_per_input = 0;
  std::uint64_t seed = 0;
  /// Retry coordinates whose +-eps probes switch any relu (see
  /// begin_relu_trace) with smaller steps; those still switching at
  /// kMinGradCheckEps are counted in `kinks` and left out. Across a kink the
  /// central difference measures no derivative at all.
  bool skip_kinks = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index coords_checked = 0;
  Index kinks = 0;
  std::string worst;  // "input#i[coord]" of the worst coordinate
};

/// Compares reverse-mode gradients of `fn` against central differences.
/// `fn` recomputes its output from `inputs` (leaves with requires_grad). A
/// non-scalar output is reduced with fixed pseudo-random weights in [0.5, 1.5]
/// so that sum-invariant ops (e.g. batch norm) still get a non-trivial probe.
/// Error per coordinate: |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const std::function<Var<double>()>& fn, std::vector<Var<double>> inputs,
                           GradCheckOptions options = {});

/// Single-input convenience form returning the max relative error.
double grad_check(const std::function<Var<double>(const Var<double>&)>& op,
                  const Tensor<double>& input, double eps);

}  // namespace tlgen
