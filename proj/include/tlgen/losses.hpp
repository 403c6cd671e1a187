#pragma once

#include <optional>
#include <string>

#include "tlgen/autodiff.hpp"

namespace tlgen {

/// Floor applied to probabilities before taking logs.
inline constexpr double kLogFloor = 1e-7;

enum class Regime { kPixelMse, kPixelMseAdv, kPixelGradMseAdv, kPixelGradMseAdvFinetune };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& text);
bool is_adversarial(Regime regime);
bool uses_gradient_term(Regime regime);
bool uses_pretraining(Regime regime);

struct LossConfig {
  bool use_gradient_term = false;
  bool adversarial = false;
  double lambda_adv = 0.2;
  double alpha = 1.0;  // target label for the generator's adversarial term

  static LossConfig for_regime(Regime regime, double lambda_adv = 0.2);
  void validate() const;
};

/// Maps network output range (-1,1) to [0,1].
template <typename Scalar>
Var<Scalar> to_unit_range(const Var<Scalar>& x);

/// Mean squared difference after rescaling both batches to [0,1].
template <typename Scalar>
Var<Scalar> p_mse(const Var<Scalar>& target, const Var<Scalar>& prediction);

/// Gradient-domain error: mean (gx[y]-gx[y_hat])^2 + mean (gy[y]-gy[y_hat])^2,
/// forward differences on the [0,1]-rescaled images.
template <typename Scalar>
Var<Scalar> g_mse(const Var<Scalar>& target, const Var<Scalar>& prediction);

/// Binary cross-entropy of D's output against label alpha:
/// mean(-alpha log d - (1 - alpha) log(1 - d)). alpha = 1 gives mean(-log d).
template <typename Scalar>
Var<Scalar> adv_loss_g(const Var<Scalar>& d_out, double alpha = 1.0);

/// mean(-log d_real) + mean(-log(1 - d_fake)).
template <typename Scalar>
Var<Scalar> d_loss(const Var<Scalar>& d_real, const Var<Scalar>& d_fake);

template <typename Scalar>
struct GeneratorLoss {
  Var<Scalar> total;
  double pixel = 0.0;
  double gradient = 0.0;     // 0 when the regime has no gradient term
  double adversarial = 0.0;  // unweighted L_adv; 0 when not adversarial
};

/// L_G = L_pmse [+ L_gmse] [+ lambda_adv * L_adv]. `d_out` is required exactly
/// when the config is adversarial.
template <typename Scalar>
GeneratorLoss<Scalar> generator_loss(const LossConfig& config, const Var<Scalar>& target,
                                     const Var<Scalar>& prediction,
                                     const std::optional<Var<Scalar>>& d_out);

}  // namespace tlgen
