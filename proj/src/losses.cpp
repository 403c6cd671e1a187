#include "tlgen/losses.hpp"

#include "tlgen/layers.hpp"

namespace tlgen {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kPixelMse:
      return "p_mse";
    case Regime::kPixelMseAdv:
      return "p_mse+adv";
    case Regime::kPixelGradMseAdv:
      return "p_g_mse+adv";
    case Regime::kPixelGradMseAdvFinetune:
      return "p_g_mse+adv+ft";
  }
  return "unknown";
}

Regime parse_regime(const std::string& text) {
  for (Regime r : {Regime::kPixelMse, Regime::kPixelMseAdv, Regime::kPixelGradMseAdv,
                   Regime::kPixelGradMseAdvFinetune}) {
    if (to_string(r) == text) return r;
  }
  throw ConfigError("unknown regime '" + text + "'");
}

bool is_adversarial(Regime regime) { return regime != Regime::kPixelMse; }

bool uses_gradient_term(Regime regime) {
  return regime == Regime::kPixelGradMseAdv || regime == Regime::kPixelGradMseAdvFinetune;
}

bool uses_pretraining(Regime regime) { return regime == Regime::kPixelGradMseAdvFinetune; }

LossConfig LossConfig::for_regime(Regime regime, double lambda_adv) {
  LossConfig c;
  c.use_gradient_term = uses_gradient_term(regime);
  c.adversarial = is_adversarial(regime);
  c.lambda_adv = lambda_adv;
  c.validate();
  return c;
}

void LossConfig::validate() const {
  if (!(lambda_adv >= 0.0)) throw ConfigError("lambda_adv must be >= 0");
  if (alpha != 0.0 && alpha != 1.0) throw ConfigError("alpha must be 0 or 1");
}

template <typename Scalar>
Var<Scalar> to_unit_range(const Var<Scalar>& x) {
  return add_scalar(scale(x, Scalar(0.5)), Scalar(0.5));
}

namespace {

template <typename Scalar>
void require_same(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

template <typename Scalar>
void require_probabilities(const char* op, const Var<Scalar>& d) {
  const auto& v = d.value().data();
  if (!v.allFinite() || (v.array() < Scalar(0)).any() || (v.array() > Scalar(1)).any()) {
    throw NumericError(std::string(op) + ": discriminator output outside [0,1]");
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> p_mse(const Var<Scalar>& target, const Var<Scalar>& prediction) {
  require_same("p_mse", target, prediction);
  // (a/2 + 1/2) - (b/2 + 1/2) = (a - b)/2
  return mean(square(scale(sub(target, prediction), Scalar(0.5))));
}

template <typename Scalar>
Var<Scalar> g_mse(const Var<Scalar>& target, const Var<Scalar>& prediction) {
  require_same("g_mse", target, prediction);
  Var<Scalar> diff = scale(sub(target, prediction), Scalar(0.5));
  // Gradient operators are linear, so gx[y] - gx[y_hat] = gx[y - y_hat].
  return add(mean(square(image_gradient_x(diff))), mean(square(image_gradient_y(diff))));
}

template <typename Scalar>
Var<Scalar> adv_loss_g(const Var<Scalar>& d_out, double alpha) {
  require_probabilities("adv_loss_g", d_out);
  const Scalar floor = static_cast<Scalar>(kLogFloor);
  if (alpha == 1.0) return scale(mean(log_clamped(d_out, floor)), Scalar(-1));
  if (alpha == 0.0) {
    return scale(mean(log_clamped(add_scalar(scale(d_out, Scalar(-1)), Scalar(1)), floor)),
                 Scalar(-1));
  }
  throw InvalidArgument("adv_loss_g: alpha must be 0 or 1");
}

template <typename Scalar>
Var<Scalar> d_loss(const Var<Scalar>& d_real, const Var<Scalar>& d_fake) {
  require_probabilities("d_loss", d_real);
  require_probabilities("d_loss", d_fake);
  const Scalar floor = static_cast<Scalar>(kLogFloor);
  Var<Scalar> real_term = mean(log_clamped(d_real, floor));
  Var<Scalar> fake_term =
      mean(log_clamped(add_scalar(scale(d_fake, Scalar(-1)), Scalar(1)), floor));
  return scale(add(real_term, fake_term), Scalar(-1));
}

template <typename Scalar>
GeneratorLoss<Scalar> generator_loss(const LossConfig& config, const Var<Scalar>& target,
                                     const Var<Scalar>& prediction,
                                     const std::optional<Var<Scalar>>& d_out) {
  config.validate();
  if (config.adversarial != d_out.has_value()) {
    throw InvalidArgument(config.adversarial
                              ? "generator_loss: adversarial regime needs discriminator output"
                              : "generator_loss: non-adversarial regime got discriminator output");
  }
  GeneratorLoss<Scalar> out;
  Var<Scalar> pixel = p_mse(target, prediction);
  out.pixel = static_cast<double>(pixel.item());
  out.total = pixel;
  if (config.use_gradient_term) {
    Var<Scalar> grad = g_mse(target, prediction);
    out.gradient = static_cast<double>(grad.item());
    out.total = add(out.total, grad);
  }
  if (config.adversarial) {
    Var<Scalar> adv = adv_loss_g(*d_out, config.alpha);
    out.adversarial = static_cast<double>(adv.item());
    // A zero weight contributes nothing, not a signed-zero gradient.
    if (config.lambda_adv != 0.0) {
      out.total = add(out.total, scale(adv, static_cast<Scalar>(config.lambda_adv)));
    }
  }
  return out;
}

#define TLGEN_INSTANTIATE(S)                                                                   \
  template Var<S> to_unit_range<S>(const Var<S>&);                                             \
  template Var<S> p_mse<S>(const Var<S>&, const Var<S>&);                                      \
  template Var<S> g_mse<S>(const Var<S>&, const Var<S>&);                                      \
  template Var<S> adv_loss_g<S>(const Var<S>&, double);                                        \
  template Var<S> d_loss<S>(const Var<S>&, const Var<S>&);                                     \
  template GeneratorLoss<S> generator_loss<S>(const LossConfig&, const Var<S>&, const Var<S>&, \
                                              const std::optional<Var<S>>&);

TLGEN_INSTANTIATE(float)
TLGEN_INSTANTIATE(double)

}  // namespace tlgen
