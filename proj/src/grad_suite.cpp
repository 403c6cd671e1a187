#include "tlgen/grad_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include "tlgen/grad_check.hpp"
#include "tlgen/layers.hpp"
#include "tlgen/losses.hpp"
#include "tlgen/models.hpp"

namespace tlgen {

namespace {

struct Rng {
  std::mt19937_64 engine;

  // Values are drawn in float so that both precisions see identical inputs.
  Tensor<float> uniform(Shape shape, float lo, float hi) {
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor<float> t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = u(engine);
    return t;
  }
  // |x| in [lo, hi] with random sign, keeping probes away from kinks.
  Tensor<float> away_from_zero(Shape shape, float lo, float hi) {
    Tensor<float> t = uniform(std::move(shape), lo, hi);
    std::bernoulli_distribution flip(0.5);
    for (Index i = 0; i < t.size(); ++i) t[i] = flip(engine) ? -t[i] : t[i];
    return t;
  }
};

template <typename S>
std::vector<Var<S>> leaves(const std::vector<Tensor<float>>& values) {
  std::vector<Var<S>> out;
  for (const auto& v : values) out.emplace_back(v.template cast<S>(), true);
  return out;
}

// Double-precision check against central differences, then the float
// gradients against the double ones on every coordinate.
GradSuiteEntry compare(const std::string& name, const std::function<Var<double>()>& fd,
                       std::vector<Var<double>> pd, const std::function<Var<float>()>& ff,
                       std::vector<Var<float>> pf, Index max_coords, double eps,
                       std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  GradSuiteEntry e;
  e.name = name;
  GradCheckOptions options;
  options.eps = eps;
  options.max_coords_per_input = max_coords;
  options.seed = seed;
  options.skip_kinks = true;
  const GradCheckResult r = grad_check(fd, pd, options);
  e.double_error = r.max_rel_error;
  e.coords = static_cast<long>(r.coords_checked);
  e.worst = r.worst;
  e.kinks = static_cast<long>(r.kinks);

  for (auto& p : pd) p.zero_grad();
  backward(fd());
  for (auto& p : pf) p.zero_grad();
  backward(ff());
  for (std::size_t k = 0; k < pd.size(); ++k) {
    if (!pd[k].has_grad() && !pf[k].has_grad()) continue;
    const Tensor<double> gd = pd[k].has_grad() ? pd[k].grad() : Tensor<double>(pd[k].shape());
    const Tensor<float> gf = pf[k].has_grad() ? pf[k].grad() : Tensor<float>(pf[k].shape());
    double diff = 0.0, scale = 1e-8;
    for (Index i = 0; i < gd.size(); ++i) {
      diff = std::max(diff, std::abs(static_cast<double>(gf[i]) - gd[i]));
      scale = std::max(scale, std::abs(gd[i]));
    }
    if (diff / scale > e.float_error) {
      e.float_error = diff / scale;
      e.float_worst = "input#" + std::to_string(k);
    }
  }
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return e;
}

// An op case: `f(tag, vars)` returns a scalar built from `vars`.
template <typename F>
GradSuiteEntry op_case(const std::string& name, const std::vector<Tensor<float>>& inputs, F f,
                       std::uint64_t seed, double eps = 1e-6) {
  auto pd = leaves<double>(inputs);
  auto pf = leaves<float>(inputs);
  return compare(
      name, [&] { return f(double{}, pd); }, pd, [&] { return f(float{}, pf); }, pf, 0, eps, seed);
}

template <typename S>
Var<S> reduce(const Var<S>& out, const Tensor<float>& w) {
  return weighted_sum(out, w.template cast<S>());
}

// Signed weights scaled by 1/sqrt(n): the probe stays O(1) and the
// finite-difference roundoff stays small next to per-parameter gradients.
Tensor<float> probe_weights(Tensor<float> w, std::mt19937_64& engine) {
  std::bernoulli_distribution flip(0.5);
  const float norm = 1.0f / std::sqrt(static_cast<float>(w.size()));
  for (Index i = 0; i < w.size(); ++i) w[i] *= (flip(engine) ? -norm : norm);
  return w;
}

// Copies float parameter values into the double clone so both precisions
// evaluate the same function.
template <typename ModelF, typename ModelD>
void mirror(const ModelF& f, ModelD& d) {
  const auto& pf = f.named_parameters();
  const auto& pd = d.named_parameters();
  for (std::size_t i = 0; i < pf.size(); ++i) {
    Var<double> v = pd[i].var;
    v.mutable_value() = pf[i].var.value().template cast<double>();
  }
}

template <typename S>
std::vector<Var<S>> with_params(std::vector<Var<S>> params, const Var<S>& extra) {
  params.push_back(extra);
  return params;
}

constexpr Index kModelCoords = 6;
constexpr double kModelEps = 1e-4;

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(std::uint64_t seed) {
  Rng rng{std::mt19937_64(seed)};
  std::vector<GradSuiteEntry> out;
  std::uint64_t case_seed = seed;
  auto next = [&] { return ++case_seed; };

  // --- elementwise and structural ops ---
  {
    const Tensor<float> a = rng.uniform({2, 3}, -1, 1), b = rng.uniform({2, 3}, -1, 1);
    const Tensor<float> w = rng.uniform({2, 3}, 0.5f, 1.5f);
    out.push_back(
        op_case("add", {a, b}, [&](auto, auto& v) { return reduce(add(v[0], v[1]), w); }, next()));
    out.push_back(
        op_case("sub", {a, b}, [&](auto, auto& v) { return reduce(sub(v[0], v[1]), w); }, next()));
    out.push_back(
        op_case("mul", {a, b}, [&](auto, auto& v) { return reduce(mul(v[0], v[1]), w); }, next()));
    out.push_back(op_case(
        "scale", {a},
        [&](auto s, auto& v) {
          using S = decltype(s);
          return reduce(scale(v[0], S(-1.75)), w);
        },
        next()));
    out.push_back(op_case(
        "add_scalar", {a},
        [&](auto s, auto& v) {
          using S = decltype(s);
          return reduce(add_scalar(v[0], S(0.5)), w);
        },
        next()));
    out.push_back(
        op_case("square", {a}, [&](auto, auto& v) { return reduce(square(v[0]), w); }, next()));
    out.push_back(op_case("sum", {a}, [&](auto, auto& v) { return sum(square(v[0])); }, next()));
    out.push_back(op_case("mean", {a}, [&](auto, auto& v) { return mean(square(v[0])); }, next()));
    out.push_back(
        op_case("weighted_sum", {a}, [&](auto, auto& v) { return reduce(v[0], w); }, next()));
    out.push_back(op_case(
        "reshape", {a},
        [&](auto, auto& v) { return reduce(reshape(square(v[0]), {3, 2}), w.reshaped({3, 2})); },
        next()));
    const Tensor<float> c = rng.uniform({2, 2, 3}, -1, 1), d = rng.uniform({2, 1, 3}, -1, 1);
    const Tensor<float> wc = rng.uniform({2, 3, 3}, 0.5f, 1.5f);
    out.push_back(op_case(
        "concat", {c, d},
        [&](auto, auto& v) {
          using V = std::decay_t<decltype(v[0])>;
          return reduce(square(concat(std::vector<V>{v[0], v[1]}, 1)), wc);
        },
        next()));
    const Tensor<float> ws = rng.uniform({2, 2, 2}, 0.5f, 1.5f);
    out.push_back(op_case(
        "slice", {c}, [&](auto, auto& v) { return reduce(square(slice(v[0], 2, 1, 2)), ws); },
        next()));
    const Tensor<float> pos = rng.uniform({2, 3}, 0.05f, 1.0f);
    out.push_back(op_case(
        "log_clamped", {pos},
        [&](auto s, auto& v) {
          using S = decltype(s);
          return reduce(log_clamped(v[0], S(1e-7)), w);
        },
        next()));
    const Tensor<float> off = rng.away_from_zero({2, 3}, 0.1f, 1.0f);
    out.push_back(
        op_case("relu", {off}, [&](auto, auto& v) { return reduce(relu(v[0]), w); }, next()));
    out.push_back(
        op_case("tanh", {a}, [&](auto, auto& v) { return reduce(tanh(v[0]), w); }, next()));
    out.push_back(
        op_case("sigmoid", {a}, [&](auto, auto& v) { return reduce(sigmoid(v[0]), w); }, next()));
  }

  // --- layers ---
  {
    const Tensor<float> x = rng.uniform({2, 8, 8, 2}, -1, 1);
    const Tensor<float> k = rng.uniform({5, 5, 2, 3}, -0.3f, 0.3f);
    const Tensor<float> bias = rng.uniform({3}, -0.1f, 0.1f);
    const Tensor<float> wconv = rng.uniform({2, 4, 4, 3}, 0.5f, 1.5f);
    out.push_back(op_case(
        "conv2d", {x, k, bias},
        [&](auto, auto& v) { return reduce(conv2d(v[0], v[1], v[2]), wconv); }, next()));
    out.push_back(op_case(
        "conv2d+tanh", {x, k, bias},
        [&](auto, auto& v) { return reduce(tanh(conv2d(v[0], v[1], v[2])), wconv); }, next()));
    const Tensor<float> y = rng.uniform({2, 4, 4, 3}, -1, 1);
    const Tensor<float> kd = rng.uniform({5, 5, 2, 3}, -0.3f, 0.3f);
    const Tensor<float> bd = rng.uniform({2}, -0.1f, 0.1f);
    const Tensor<float> wdec = rng.uniform({2, 8, 8, 2}, 0.5f, 1.5f);
    out.push_back(op_case(
        "deconv2d", {y, kd, bd},
        [&](auto, auto& v) { return reduce(deconv2d(v[0], v[1], v[2]), wdec); }, next()));
    const Tensor<float> li = rng.uniform({3, 4}, -1, 1), lw = rng.uniform({4, 5}, -1, 1);
    const Tensor<float> lb = rng.uniform({5}, -1, 1), wl = rng.uniform({3, 5}, 0.5f, 1.5f);
    out.push_back(op_case(
        "linear", {li, lw, lb}, [&](auto, auto& v) { return reduce(linear(v[0], v[1], v[2]), wl); },
        next()));
    out.push_back(op_case(
        "matmul", {li, lw}, [&](auto, auto& v) { return reduce(matmul(v[0], v[1]), wl); }, next()));
    const Tensor<float> bx = rng.uniform({4, 3, 3, 2}, -1, 1);
    const Tensor<float> gamma = rng.uniform({2}, 0.5f, 1.5f), beta = rng.uniform({2}, -0.5f, 0.5f);
    const Tensor<float> wb = rng.uniform({4, 3, 3, 2}, 0.5f, 1.5f);
    const Tensor<float> mean_f = rng.uniform({2}, -0.2f, 0.2f),
                        var_f = rng.uniform({2}, 0.5f, 1.5f);
    out.push_back(op_case(
        "batch_norm_train", {bx, gamma, beta},
        [&](auto s, auto& v) {
          using S = decltype(s);
          auto state = BatchNormState<S>::identity(2);
          return reduce(batch_norm(v[0], v[1], v[2], state, Mode::kTrain), wb);
        },
        next()));
    out.push_back(op_case(
        "batch_norm_eval", {bx, gamma, beta},
        [&](auto s, auto& v) {
          using S = decltype(s);
          BatchNormState<S> state{mean_f.template cast<S>(), var_f.template cast<S>()};
          return reduce(batch_norm(v[0], v[1], v[2], state, Mode::kEval), wb);
        },
        next()));
    const Index din = 3, hid = 2;
    const Tensor<float> lx = rng.uniform({2, din}, -1, 1), lh = rng.uniform({2, hid}, -1, 1);
    const Tensor<float> lc = rng.uniform({2, hid}, -1, 1);
    const Tensor<float> wi = rng.uniform({din, 4 * hid}, -0.5f, 0.5f);
    const Tensor<float> wr = rng.uniform({hid, 4 * hid}, -0.5f, 0.5f);
    const Tensor<float> lbias = rng.uniform({4 * hid}, -0.2f, 0.2f);
    const Tensor<float> wh = rng.uniform({2, hid}, 0.5f, 1.5f),
                        wcell = rng.uniform({2, hid}, 0.5f, 1.5f);
    out.push_back(op_case(
        "lstm_step", {lx, lh, lc, wi, wr, lbias},
        [&](auto, auto& v) {
          using S = std::decay_t<decltype(v[0].item())>;
          LstmParams<S> p{v[3], v[4], v[5]};
          auto [h, cell] = lstm_step(v[0], v[1], v[2], p);
          return add(reduce(h, wh), reduce(cell, wcell));
        },
        next()));
    const Tensor<float> img = rng.uniform({2, 4, 5, 3}, -1, 1);
    const Tensor<float> wimg = rng.uniform({2, 4, 5, 3}, 0.5f, 1.5f);
    out.push_back(op_case(
        "image_gradient_x", {img},
        [&](auto, auto& v) { return reduce(square(image_gradient_x(v[0])), wimg); }, next()));
    out.push_back(op_case(
        "image_gradient_y", {img},
        [&](auto, auto& v) { return reduce(square(image_gradient_y(v[0])), wimg); }, next()));
  }

  // --- losses ---
  {
    const Tensor<float> t = rng.uniform({2, 4, 4, 3}, -1, 1), p = rng.uniform({2, 4, 4, 3}, -1, 1);
    const Tensor<float> dr = rng.uniform({4, 1}, 0.05f, 0.95f),
                        df = rng.uniform({4, 1}, 0.05f, 0.95f);
    out.push_back(
        op_case("p_mse", {t, p}, [&](auto, auto& v) { return p_mse(v[0], v[1]); }, next()));
    out.push_back(
        op_case("g_mse", {t, p}, [&](auto, auto& v) { return g_mse(v[0], v[1]); }, next()));
    out.push_back(
        op_case("adv_loss_g", {df}, [&](auto, auto& v) { return adv_loss_g(v[0], 1.0); }, next()));
    out.push_back(
        op_case("d_loss", {dr, df}, [&](auto, auto& v) { return d_loss(v[0], v[1]); }, next()));
    out.push_back(op_case(
        "generator_loss", {t, p, df},
        [&](auto, auto& v) {
          using V = std::decay_t<decltype(v[0])>;
          const LossConfig cfg = LossConfig::for_regime(Regime::kPixelGradMseAdv, 0.2);
          return generator_loss(cfg, v[0], v[1], std::optional<V>(v[2])).total;
        },
        next()));
  }

  // --- tiny model clones (sampled coordinates of every parameter tensor) ---
  {
    const Tensor<float> image = rng.uniform({2, kImageSize, kImageSize, kImageChannels}, -1, 1);
    const Tensor<float> second = rng.uniform({2, kImageSize, kImageSize, kImageChannels}, -1, 1);
    const std::vector<int> conds{1, 3};
    const Tensor<float> cond = condition_batch<float>(conds);
    const Tensor<float> wimg = probe_weights(
        rng.uniform({2, kImageSize, kImageSize, kImageChannels}, 0.5f, 1.5f), rng.engine);
    const Tensor<float> wrec = probe_weights(
        rng.uniform({8, kImageSize, kImageSize, kImageChannels}, 0.5f, 1.5f), rng.engine);
    const Tensor<float> wd = probe_weights(rng.uniform({2, 1}, 0.5f, 1.5f), rng.engine);

    auto model_case = [&](const std::string& name, auto& gf, auto& gd, auto forward_f,
                          auto forward_d, const std::vector<Tensor<float>>& extra_inputs) {
      mirror(gf, gd);
      auto pf = gf.parameters();
      auto pd = gd.parameters();
      auto xf = leaves<float>(extra_inputs);
      auto xd = leaves<double>(extra_inputs);
      for (auto& v : xf) pf.push_back(v);
      for (auto& v : xd) pd.push_back(v);
      out.push_back(compare(
          name, [&] { return forward_d(xd); }, pd, [&] { return forward_f(xf); }, pf, kModelCoords,
          kModelEps, next()));
    };

    {
      const std::uint64_t s = next();
      PairwiseGenerator<float> gf(ModelConfig::tiny(ModelKind::kPairwise), s);
      PairwiseGenerator<double> gd(ModelConfig::tiny(ModelKind::kPairwise), s);
      const Var<float> cf(cond);
      const Var<double> cd(cond.cast<double>());
      model_case(
          "model_pairwise", gf, gd,
          [&](auto& x) { return reduce(gf.forward(x[0], cf, Mode::kTrain), wimg); },
          [&](auto& x) { return reduce(gd.forward(x[0], cd, Mode::kTrain), wimg); }, {image});
    }
    {
      const std::uint64_t s = next();
      TwoStackGenerator<float> gf(ModelConfig::tiny(ModelKind::kTwoStack), s);
      TwoStackGenerator<double> gd(ModelConfig::tiny(ModelKind::kTwoStack), s);
      model_case(
          "model_twostack", gf, gd,
          [&](auto& x) { return reduce(gf.forward(x[0], x[1], Mode::kTrain), wimg); },
          [&](auto& x) { return reduce(gd.forward(x[0], x[1], Mode::kTrain), wimg); },
          {image, second});
    }
    {
      const std::uint64_t s = next();
      RecurrentGenerator<float> gf(ModelConfig::tiny(ModelKind::kRecurrent), s);
      RecurrentGenerator<double> gd(ModelConfig::tiny(ModelKind::kRecurrent), s);
      model_case(
          "model_recurrent", gf, gd,
          [&](auto& x) {
            return reduce(concat(gf.forward(x[0], kRecurrentSteps, Mode::kTrain), 0), wrec);
          },
          [&](auto& x) {
            return reduce(concat(gd.forward(x[0], kRecurrentSteps, Mode::kTrain), 0), wrec);
          },
          {image});
    }
    {
      const std::uint64_t s = next();
      Discriminator<float> df(ModelConfig::tiny(ModelKind::kDiscriminator), s);
      Discriminator<double> dd(ModelConfig::tiny(ModelKind::kDiscriminator), s);
      model_case(
          "model_discriminator", df, dd,
          [&](auto& x) { return reduce(df.forward(x[0], std::nullopt, Mode::kTrain), wd); },
          [&](auto& x) { return reduce(dd.forward(x[0], std::nullopt, Mode::kTrain), wd); },
          {image});
    }
    {
      const std::uint64_t s = next();
      Discriminator<float> df(ModelConfig::tiny(ModelKind::kConditionalDiscriminator), s);
      Discriminator<double> dd(ModelConfig::tiny(ModelKind::kConditionalDiscriminator), s);
      const Var<float> cf(cond);
      const Var<double> cd(cond.cast<double>());
      model_case(
          "model_discriminator_cond", df, dd,
          [&](auto& x) { return reduce(df.forward(x[0], cf, Mode::kTrain), wd); },
          [&](auto& x) { return reduce(dd.forward(x[0], cd, Mode::kTrain), wd); }, {image});
    }
  }
  return out;
}

}  // namespace tlgen
