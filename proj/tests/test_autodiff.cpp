#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "tlgen/autodiff.hpp"
#include "tlgen/grad_check.hpp"
#include "tlgen/grad_suite.hpp"
#include "tlgen/layers.hpp"

using namespace tlgen;
using test::random_tensor;

namespace {

using UnaryOp = std::function<Var<double>(const Var<double>&)>;

double check_unary(const UnaryOp& op, Shape shape, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
  std::mt19937_64 rng(seed);
  return grad_check(op, random_tensor(std::move(shape), rng, lo, hi), 1e-6);
}

}  // namespace

TEST_CASE("tensor construction validates extents and lengths") {
  CHECK_THROWS_AS(Tensor<double>({2, 0}), InvalidArgument);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, VectorX<double>::Zero(3)), InvalidArgument);
  const auto t = Tensor<double>::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.dim(-1) == 3);
  CHECK(t.reshaped({3, 2}).data() == t.data());
  CHECK_THROWS_AS(t.reshaped({4, 2}), InvalidArgument);
}

TEST_CASE("elementwise ops match central differences") {
  const Shape s{3, 4};
  CHECK(check_unary([](const Var<double>& x) { return square(x); }, s, 1) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return scale(x, -2.5); }, s, 2) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return add_scalar(x, 0.75); }, s, 3) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return tanh(x); }, s, 4) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return sigmoid(x); }, s, 5) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return mean(x); }, s, 6) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return sum(x); }, s, 7) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return log_clamped(x, 1e-7); }, s, 8, 0.2, 2.0) <
        1e-7);
  // Keep every input clear of the kink.
  CHECK(check_unary([](const Var<double>& x) { return relu(x); }, s, 9, 0.1, 1.0) < 1e-7);
  CHECK(check_unary([](const Var<double>& x) { return relu(scale(x, -1.0)); }, s, 10, 0.1, 1.0) <
        1e-7);
}

TEST_CASE("binary and structural ops match central differences") {
  std::mt19937_64 rng(11);
  Var<double> a(random_tensor({2, 3, 4}, rng), true);
  Var<double> b(random_tensor({2, 3, 4}, rng), true);
  Var<double> c(random_tensor({2, 5, 4}, rng), true);
  const Tensor<double> w = random_tensor({2, 3, 4}, rng);
  auto run = [](const std::function<Var<double>()>& fn, std::vector<Var<double>> in) {
    return grad_check(fn, std::move(in)).max_rel_error;
  };
  CHECK(run([&] { return add(a, b); }, {a, b}) < 1e-7);
  CHECK(run([&] { return sub(a, b); }, {a, b}) < 1e-7);
  CHECK(run([&] { return mul(a, b); }, {a, b}) < 1e-7);
  CHECK(run([&] { return mul(a, a); }, {a}) < 1e-7);  // shared parent accumulates twice
  CHECK(run([&] { return weighted_sum(a, w); }, {a}) < 1e-7);
  CHECK(run([&] { return reshape(a, {6, 4}); }, {a}) < 1e-7);
  CHECK(run([&] { return concat<double>({a, c}, 1); }, {a, c}) < 1e-7);
  CHECK(run([&] { return slice(c, 1, 1, 3); }, {c}) < 1e-7);
  CHECK(run([&] { return slice(a, 2, 2, 2); }, {a}) < 1e-7);
}

TEST_CASE("values of structural ops") {
  const auto a = Tensor<double>::from_values({2, 2}, {1, 2, 3, 4});
  const auto b = Tensor<double>::from_values({2, 1}, {5, 6});
  const auto c = concat<double>({Var<double>(a), Var<double>(b)}, 1);
  CHECK(c.value() == Tensor<double>::from_values({2, 3}, {1, 2, 5, 3, 4, 6}));
  const auto s = slice(c, 1, 1, 2);
  CHECK(s.value() == Tensor<double>::from_values({2, 2}, {2, 5, 4, 6}));
  CHECK_THROWS_AS(slice(c, 1, 2, 2), InvalidArgument);
}

TEST_CASE("square and mul of a shared operand agree") {
  std::mt19937_64 rng(12);
  Var<double> a(random_tensor({5}, rng), true);
  backward(sum(square(a)));
  const Tensor<double> g1 = a.grad();
  a.zero_grad();
  backward(sum(mul(a, a)));
  CHECK(test::max_abs_diff(g1, a.grad()) < 1e-15);
  CHECK(test::max_abs_diff(g1, Tensor<double>(a.shape(), 2.0 * a.value().data())) < 1e-15);
}

TEST_CASE("log_clamped passes no gradient below the floor") {
  Var<double> x(Tensor<double>::from_values({3}, {1e-9, 0.5, 2.0}), true);
  backward(sum(log_clamped(x, 1e-7)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == doctest::Approx(2.0));
  CHECK(x.value()[0] == 1e-9);
  CHECK(log_clamped(x, 1e-7).value()[0] == doctest::Approx(std::log(1e-7)));
}

TEST_CASE("non-finite forward values raise NumericError") {
  Var<double> x(Tensor<double>::from_values({2}, {1.0, std::numeric_limits<double>::infinity()}));
  CHECK_THROWS_AS(scale(x, 2.0), NumericError);
  Var<double> y(Tensor<double>::from_values({1}, {std::numeric_limits<double>::max()}));
  CHECK_THROWS_AS(square(y), NumericError);
}

TEST_CASE("detach cuts the graph") {
  Var<double> x(Tensor<double>::from_values({2}, {1.0, 2.0}), true);
  Var<double> y = add(detach(square(x)), x);
  backward(sum(y));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("backward requires a single-element root") {
  Var<double> x(Tensor<double>::from_values({2}, {1.0, 2.0}), true);
  CHECK_THROWS_AS(backward(square(x)), InvalidArgument);
}

TEST_CASE("relu trace signature tracks the activation pattern") {
  std::mt19937_64 rng(13);
  Tensor<double> t = random_tensor({64}, rng, 0.1, 1.0);
  auto signature = [](const Tensor<double>& v) {
    begin_relu_trace();
    relu(Var<double>(v));
    return end_relu_trace();
  };
  const auto base = signature(t);
  CHECK(signature(t) == base);
  Tensor<double> nudged = t;
  nudged[10] *= 1.5;  // same sign, same pattern
  CHECK(signature(nudged) == base);
  Tensor<double> flipped = t;
  flipped[10] = -flipped[10];
  CHECK(signature(flipped) != base);
  // Relus outside a trace leave nothing behind.
  begin_relu_trace();
  const auto empty = end_relu_trace();
  relu(Var<double>(flipped));
  begin_relu_trace();
  CHECK(end_relu_trace() == empty);
}

TEST_CASE("grad_check skips relu kinks instead of reporting them") {
  // Inputs straddle zero closely enough that a +-1e-3 probe switches the
  // relu; analytic and one-sided derivatives then disagree.
  Var<double> x(Tensor<double>::from_values({4}, {2e-4, -3e-4, 0.5, -0.5}), true);
  auto fn = [&] { return relu(x); };
  GradCheckOptions naive{.eps = 1e-3};
  CHECK(grad_check(fn, {x}, naive).max_rel_error > 0.1);
  GradCheckOptions skipping{.eps = 1e-3, .skip_kinks = true};
  const auto r = grad_check(fn, {x}, skipping);
  CHECK(r.max_rel_error < 1e-7);
  CHECK(r.kinks == 0);  // the step ladder resolves both
  CHECK(r.coords_checked == 4);

  Var<double> at_kink(Tensor<double>::from_values({2}, {1e-9, 0.5}), true);
  const auto k = grad_check([&] { return relu(at_kink); }, {at_kink}, skipping);
  CHECK(k.kinks == 1);
  CHECK(k.coords_checked == 2);  // kinks count as probed
  CHECK(k.max_rel_error < 1e-7);
}

// --- layers ------------------------------------------------------------------

namespace {

Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k,
                           const Tensor<double>* bias) {
  const Index n = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3), cout = k.dim(3);
  Tensor<double> out({n, h / 2, w / 2, cout});
  for (Index b = 0; b < n; ++b) {
    for (Index oy = 0; oy < h / 2; ++oy) {
      for (Index ox = 0; ox < w / 2; ++ox) {
        for (Index co = 0; co < cout; ++co) {
          double acc = bias ? (*bias)[co] : 0.0;
          for (Index ky = 0; ky < 5; ++ky) {
            for (Index kx = 0; kx < 5; ++kx) {
              // One row/column of zero padding before, two after.
              const Index iy = 2 * oy + ky - 1, ix = 2 * ox + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (Index ci = 0; ci < cin; ++ci) {
                acc += test::at4(x, b, iy, ix, ci) * k[((ky * 5 + kx) * cin + ci) * cout + co];
              }
            }
          }
          out[((b * (h / 2) + oy) * (w / 2) + ox) * cout + co] = acc;
        }
      }
    }
  }
  return out;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) { return a.data().dot(b.data()); }

}  // namespace

TEST_CASE("conv2d matches a brute-force convolution") {
  std::mt19937_64 rng(21);
  for (Index size : {2, 4, 8, 10}) {
    const Tensor<double> x = random_tensor({2, size, size, 3}, rng);
    const Tensor<double> k = random_tensor({5, 5, 3, 4}, rng);
    const Tensor<double> b = random_tensor({4}, rng);
    const auto y = conv2d(Var<double>(x), Var<double>(k), Var<double>(b));
    CHECK(y.shape() == Shape{2, size / 2, size / 2, 4});
    CHECK(test::max_abs_diff(y.value(), conv_oracle(x, k, &b)) < 1e-12);
    const auto y0 = conv2d(Var<double>(x), Var<double>(k), Var<double>());
    CHECK(test::max_abs_diff(y0.value(), conv_oracle(x, k, nullptr)) < 1e-12);
  }
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  std::mt19937_64 rng(22);
  const Tensor<double> k = random_tensor({5, 5, 3, 6}, rng);
  const Tensor<double> x = random_tensor({2, 8, 8, 3}, rng);
  const Tensor<double> y = random_tensor({2, 4, 4, 6}, rng);
  const auto cx = conv2d(Var<double>(x), Var<double>(k), Var<double>()).value();
  const auto dy = deconv2d(Var<double>(y), Var<double>(k), Var<double>()).value();
  CHECK(dy.shape() == Shape{2, 8, 8, 3});
  CHECK(dot(cx, y) == doctest::Approx(dot(x, dy)).epsilon(1e-12));
}

TEST_CASE("conv, deconv and linear gradients match central differences") {
  std::mt19937_64 rng(23);
  Var<double> x(random_tensor({2, 8, 8, 2}, rng), true);
  Var<double> k(random_tensor({5, 5, 2, 3}, rng), true);
  Var<double> b(random_tensor({3}, rng), true);
  CHECK(grad_check([&] { return conv2d(x, k, b); }, {x, k, b}).max_rel_error < 1e-6);
  Var<double> y(random_tensor({2, 4, 4, 3}, rng), true);
  Var<double> kt(random_tensor({5, 5, 2, 3}, rng), true);
  Var<double> bt(random_tensor({2}, rng), true);
  CHECK(grad_check([&] { return deconv2d(y, kt, bt); }, {y, kt, bt}).max_rel_error < 1e-6);
  Var<double> a(random_tensor({3, 5}, rng), true);
  Var<double> w(random_tensor({5, 2}, rng), true);
  Var<double> lb(random_tensor({2}, rng), true);
  CHECK(grad_check([&] { return linear(a, w, lb); }, {a, w, lb}).max_rel_error < 1e-7);
  CHECK(grad_check([&] { return matmul(a, w); }, {a, w}).max_rel_error < 1e-7);
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Var<double> x(Tensor<double>({1, 8, 8, 3}));
  CHECK_THROWS_AS(conv2d(x, Var<double>(Tensor<double>({5, 5, 2, 4})), Var<double>()),
                  InvalidArgument);
  CHECK_THROWS_AS(conv2d(x, Var<double>(Tensor<double>({3, 3, 3, 4})), Var<double>()),
                  InvalidArgument);
  CHECK_THROWS_AS(conv2d(Var<double>(Tensor<double>({1, 7, 8, 3})),
                         Var<double>(Tensor<double>({5, 5, 3, 4})), Var<double>()),
                  InvalidArgument);
}

TEST_CASE("batch norm normalizes in train mode and tracks running statistics") {
  std::mt19937_64 rng(24);
  const Index c = 3;
  Tensor<double> x = random_tensor({4, 2, 2, c}, rng, -2.0, 5.0);
  Var<double> gamma(Tensor<double>::from_values({c}, {1.5, 0.5, 2.0}), true);
  Var<double> beta(Tensor<double>::from_values({c}, {0.1, -0.2, 0.3}), true);
  auto state = BatchNormState<double>::identity(c);
  const auto y = batch_norm(Var<double>(x), gamma, beta, state, Mode::kTrain).value();
  const auto xm = x.channels();
  const auto ym = y.channels();
  const double m = static_cast<double>(xm.rows());
  for (Index ch = 0; ch < c; ++ch) {
    const double mu = xm.col(ch).mean();
    const double var = (xm.col(ch).array() - mu).square().sum() / m;
    CHECK(ym.col(ch).mean() == doctest::Approx(beta.value()[ch]).epsilon(1e-12));
    const double yvar = (ym.col(ch).array() - ym.col(ch).mean()).square().sum() / m;
    const double expected = gamma.value()[ch] * gamma.value()[ch] * var / (var + kBatchNormEps);
    CHECK(yvar == doctest::Approx(expected).epsilon(1e-10));
    CHECK(state.running_mean[ch] == doctest::Approx(0.1 * mu).epsilon(1e-12));
    CHECK(state.running_var[ch] == doctest::Approx(0.9 + 0.1 * var * m / (m - 1.0)).epsilon(1e-12));
  }
  // Eval mode uses the running statistics and leaves them alone.
  const auto before = state;
  const auto e = batch_norm(Var<double>(x), gamma, beta, state, Mode::kEval).value();
  CHECK(state.running_mean == before.running_mean);
  const double expect0 = (x[0] - state.running_mean[0]) /
                             std::sqrt(state.running_var[0] + kBatchNormEps) * gamma.value()[0] +
                         beta.value()[0];
  CHECK(e[0] == doctest::Approx(expect0).epsilon(1e-12));
}

TEST_CASE("lstm_step matches a scalar oracle") {
  // Hidden size 1, input size 2: every gate is a scalar.
  const double x0 = 0.3, x1 = -0.7, h = 0.2, c = -0.4;
  const double wi[2][4] = {{0.1, -0.2, 0.3, 0.4}, {0.5, 0.6, -0.7, 0.8}};
  const double wh[4] = {-0.3, 0.2, 0.1, -0.5};
  const double bias[4] = {0.05, 1.0, -0.1, 0.2};
  LstmParams<double> p;
  p.input_weight = Var<double>(Tensor<double>::from_values(
      {2, 4}, {wi[0][0], wi[0][1], wi[0][2], wi[0][3], wi[1][0], wi[1][1], wi[1][2], wi[1][3]}));
  p.recurrent_weight =
      Var<double>(Tensor<double>::from_values({1, 4}, {wh[0], wh[1], wh[2], wh[3]}));
  p.bias = Var<double>(Tensor<double>::from_values({4}, {bias[0], bias[1], bias[2], bias[3]}));
  auto [h1, c1] = lstm_step(Var<double>(Tensor<double>::from_values({1, 2}, {x0, x1})),
                            Var<double>(Tensor<double>::from_values({1, 1}, {h})),
                            Var<double>(Tensor<double>::from_values({1, 1}, {c})), p);
  auto pre = [&](int g) { return x0 * wi[0][g] + x1 * wi[1][g] + h * wh[g] + bias[g]; };
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(pre(0)), f = sig(pre(1)), g = std::tanh(pre(2)), o = sig(pre(3));
  const double c_next = f * c + i * g;
  CHECK(c1.item() == doctest::Approx(c_next).epsilon(1e-14));
  CHECK(h1.item() == doctest::Approx(o * std::tanh(c_next)).epsilon(1e-14));
}

TEST_CASE("image gradients are forward differences with a zero last column") {
  const auto img = Tensor<double>::from_values({1, 2, 3, 1}, {1, 4, 9, 2, 3, 5});
  const auto gx = image_gradient_x(Var<double>(img)).value();
  const auto gy = image_gradient_y(Var<double>(img)).value();
  CHECK(gx == Tensor<double>::from_values({1, 2, 3, 1}, {3, 5, 0, 1, 2, 0}));
  CHECK(gy == Tensor<double>::from_values({1, 2, 3, 1}, {1, -1, -4, 0, 0, 0}));
}

TEST_CASE("full gradient suite passes for several probe seeds") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    for (const auto& e : run_grad_suite(seed)) {
      INFO(e.name << " seed " << seed << " double " << e.double_error << " float " << e.float_error
                  << " kinks " << e.kinks << "/" << e.coords);
      CHECK(e.passed());
    }
  }
}
