#include "tlgen/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tlgen {

GradCheckResult grad_check(const std::function<Var<double>()>& fn, std::vector<Var<double>> inputs,
                           GradCheckOptions options) {
  if (options.eps < kMinGradCheckEps || options.eps > kMaxGradCheckEps) {
    throw InvalidArgument("grad_check: eps must lie in [1e-6, 1e-3]");
  }
  std::mt19937_64 rng(options.seed);

  Var<double> probe = fn();
  Tensor<double> weights;
  if (probe.size() != 1) {
    weights = Tensor<double>(probe.shape());
    std::uniform_real_distribution<double> w(0.5, 1.5);
    for (Index i = 0; i < weights.size(); ++i) weights[i] = w(rng);
  }
  std::uint64_t last_pattern = 0;
  auto loss = [&]() {
    if (options.skip_kinks) begin_relu_trace();
    Var<double> out = fn();
    if (options.skip_kinks) last_pattern = end_relu_trace();
    return weights.empty() ? out : weighted_sum(out, weights);
  };

  for (auto& in : inputs) in.zero_grad();
  backward(loss());
  const std::uint64_t pattern = last_pattern;

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Var<double>& in = inputs[k];
    const Index n = in.size();
    std::vector<Index> coords(static_cast<std::size_t>(n));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (options.max_coords_per_input > 0 && options.max_coords_per_input < n) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_input));
      std::sort(coords.begin(), coords.end());
    }
    const Tensor<double> analytic = in.has_grad() ? in.grad() : Tensor<double>(in.shape());
    for (Index c : coords) {
      double& x = in.mutable_value()[c];
      const double saved = x;
      double eps = options.eps;
      double numeric = 0.0;
      bool kink = false;
      // A probe that switches a relu is retried with a tenth of the step,
      // down to the smallest allowed eps.
      for (;;) {
        x = saved + eps;
        const double up = loss().item();
        const std::uint64_t up_pattern = last_pattern;
        x = saved - eps;
        const double down = loss().item();
        const std::uint64_t down_pattern = last_pattern;
        x = saved;
        numeric = (up - down) / (2.0 * eps);
        kink = options.skip_kinks && (up_pattern != pattern || down_pattern != pattern);
        if (!kink || eps / 10.0 < kMinGradCheckEps * (1.0 - 1e-9)) break;
        eps /= 10.0;
      }
      ++result.coords_checked;
      if (kink) {
        ++result.kinks;
        continue;
      }
      const double a = analytic[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = "input#" + std::to_string(k) + "[" + std::to_string(c) + "]";
      }
    }
  }
  for (auto& in : inputs) in.zero_grad();
  return result;
}

double grad_check(const std::function<Var<double>(const Var<double>&)>& op,
                  const Tensor<double>& input, double eps) {
  Var<double> x(input, true);
  GradCheckOptions options;
  options.eps = eps;
  return grad_check([&] { return op(x); }, {x}, options).max_rel_error;
}

}  // namespace tlgen
