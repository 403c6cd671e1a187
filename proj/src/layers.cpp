#include "tlgen/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlgen {

namespace {

constexpr Index kTaps = kKernelSize * kKernelSize;

struct ConvGeometry {
  Index batch, height, width, channels;  // of the full-resolution image
  Index out_height() const { return height / 2; }
  Index out_width() const { return width / 2; }
  Index rows() const { return batch * out_height() * out_width(); }
  Index cols() const { return kTaps * channels; }
};

// Gathers stride-2 5x5 patches of an NHWC image into a (rows x 25*C) matrix,
// columns ordered (ky, kx, c) to match the kernel layout.
template <typename Scalar>
void im2col(const Scalar* img, const ConvGeometry& g, Scalar* cols) {
  const Index C = g.channels, H = g.height, W = g.width;
  const Index Ho = g.out_height(), Wo = g.out_width();
  Scalar* row = cols;
  for (Index n = 0; n < g.batch; ++n) {
    for (Index oy = 0; oy < Ho; ++oy) {
      for (Index ox = 0; ox < Wo; ++ox) {
        for (Index ky = 0; ky < kKernelSize; ++ky) {
          const Index iy = 2 * oy + ky - kPadBefore;
          Scalar* dst = row + ky * kKernelSize * C;
          if (iy < 0 || iy >= H) {
            std::fill_n(dst, kKernelSize * C, Scalar(0));
            continue;
          }
          for (Index kx = 0; kx < kKernelSize; ++kx) {
            const Index ix = 2 * ox + kx - kPadBefore;
            if (ix < 0 || ix >= W) {
              std::fill_n(dst + kx * C, C, Scalar(0));
            } else {
              std::copy_n(img + ((n * H + iy) * W + ix) * C, C, dst + kx * C);
            }
          }
        }
        row += kTaps * C;
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch rows back into the image.
template <typename Scalar>
void col2im(const Scalar* cols, const ConvGeometry& g, Scalar* img) {
  const Index C = g.channels, H = g.height, W = g.width;
  const Index Ho = g.out_height(), Wo = g.out_width();
  std::fill_n(img, g.batch * H * W * C, Scalar(0));
  const Scalar* row = cols;
  for (Index n = 0; n < g.batch; ++n) {
    for (Index oy = 0; oy < Ho; ++oy) {
      for (Index ox = 0; ox < Wo; ++ox) {
        for (Index ky = 0; ky < kKernelSize; ++ky) {
          const Index iy = 2 * oy + ky - kPadBefore;
          if (iy < 0 || iy >= H) continue;
          for (Index kx = 0; kx < kKernelSize; ++kx) {
            const Index ix = 2 * ox + kx - kPadBefore;
            if (ix < 0 || ix >= W) continue;
            const Scalar* src = row + (ky * kKernelSize + kx) * C;
            Scalar* dst = img + ((n * H + iy) * W + ix) * C;
            for (Index c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
        row += kTaps * C;
      }
    }
  }
}

template <typename Scalar>
void require_finite_input(const char* op, const Var<Scalar>& v) {
  if (!v.value().all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

template <typename Scalar>
void check_bias(const char* op, const Var<Scalar>& bias, Index channels) {
  if (bias.valid()) {
    require(bias.shape() == Shape{channels}, std::string(op) + ": bias shape " +
                                                 shape_string(bias.shape()) + " expected [" +
                                                 std::to_string(channels) + "]");
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  require(xs.size() == 4, "conv2d: input must be NHWC, got " + shape_string(xs));
  require(ks.size() == 4 && ks[0] == kKernelSize && ks[1] == kKernelSize && ks[2] == xs[3],
          "conv2d: kernel " + shape_string(ks) + " incompatible with input " + shape_string(xs));
  require(xs[1] >= 2 && xs[2] >= 2 && xs[1] % 2 == 0 && xs[2] % 2 == 0,
          "conv2d: spatial extents must be even and >= 2, got " + shape_string(xs));
  const Index cout = ks[3];
  check_bias("conv2d", bias, cout);
  require_finite_input("conv2d", input);

  const ConvGeometry g{xs[0], xs[1], xs[2], xs[3]};
  RowMatrix<Scalar> cols(g.rows(), g.cols());
  im2col(input.value().ptr(), g, cols.data());
  Tensor<Scalar> out({g.batch, g.out_height(), g.out_width(), cout});
  auto out_m = out.matrix(g.rows(), cout);
  out_m.noalias() = cols * kernel.value().matrix(g.cols(), cout);
  if (bias.valid()) out_m.rowwise() += bias.value().data().transpose();

  std::vector<Var<Scalar>> parents{input, kernel};
  if (bias.valid()) parents.push_back(bias);
  const bool has_bias = bias.valid();
  return make_result<Scalar>(
      "conv2d", std::move(out), std::move(parents),
      [g, cout, has_bias, cols = std::move(cols)](Node<Scalar>& self) {
        auto dy = self.grad.matrix(g.rows(), cout);
        auto& x = *self.parents[0];
        auto& k = *self.parents[1];
        if (k.requires_grad) {
          RowMatrix<Scalar> dk = cols.transpose() * dy;
          k.accumulate(Eigen::Map<const VectorX<Scalar>>(dk.data(), dk.size()));
        }
        if (has_bias && self.parents[2]->requires_grad) {
          self.parents[2]->accumulate_expr(dy.colwise().sum().transpose());
        }
        if (x.requires_grad) {
          RowMatrix<Scalar> dcols = dy * k.value.matrix(g.cols(), cout).transpose();
          VectorX<Scalar> dx(x.value.size());
          col2im(dcols.data(), g, dx.data());
          x.accumulate(dx);
        }
      });
}

template <typename Scalar>
Var<Scalar> deconv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias) {
  const Shape& ys = input.shape();
  const Shape& ks = kernel.shape();
  require(ys.size() == 4, "deconv2d: input must be NHWC, got " + shape_string(ys));
  require(ks.size() == 4 && ks[0] == kKernelSize && ks[1] == kKernelSize && ks[3] == ys[3],
          "deconv2d: kernel " + shape_string(ks) + " incompatible with input " + shape_string(ys));
  const Index cin = ys[3];
  const Index cout = ks[2];
  check_bias("deconv2d", bias, cout);
  require_finite_input("deconv2d", input);

  // Geometry of the conv whose input-adjoint this is.
  const ConvGeometry g{ys[0], 2 * ys[1], 2 * ys[2], cout};
  auto kmat = kernel.value().matrix(g.cols(), cin);
  RowMatrix<Scalar> cols(g.rows(), g.cols());
  cols.noalias() = input.value().matrix(g.rows(), cin) * kmat.transpose();
  Tensor<Scalar> out({g.batch, g.height, g.width, cout});
  col2im(cols.data(), g, out.ptr());
  if (bias.valid()) out.channels().rowwise() += bias.value().data().transpose();

  std::vector<Var<Scalar>> parents{input, kernel};
  if (bias.valid()) parents.push_back(bias);
  const bool has_bias = bias.valid();
  return make_result<Scalar>(
      "deconv2d", std::move(out), std::move(parents), [g, cin, cout, has_bias](Node<Scalar>& self) {
        auto& y = *self.parents[0];
        auto& k = *self.parents[1];
        if (has_bias && self.parents[2]->requires_grad) {
          self.parents[2]->accumulate_expr(self.grad.channels().colwise().sum().transpose());
        }
        if (!y.requires_grad && !k.requires_grad) return;
        RowMatrix<Scalar> dcols(g.rows(), g.cols());
        im2col(self.grad.ptr(), g, dcols.data());
        if (y.requires_grad) {
          RowMatrix<Scalar> dy = dcols * k.value.matrix(g.cols(), cin);
          y.accumulate(Eigen::Map<const VectorX<Scalar>>(dy.data(), dy.size()));
        }
        if (k.requires_grad) {
          RowMatrix<Scalar> dk = dcols.transpose() * y.value.matrix(g.rows(), cin);
          k.accumulate(Eigen::Map<const VectorX<Scalar>>(dk.data(), dk.size()));
        }
      });
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.dim(1) == b.dim(0),
          "matmul: shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const Index n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor<Scalar> out({n, m});
  out.matrix(n, m).noalias() = a.value().matrix(n, k) * b.value().matrix(k, m);
  return make_result<Scalar>("matmul", std::move(out), {a, b}, [n, k, m](Node<Scalar>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    auto dy = self.grad.matrix(n, m);
    if (pa.requires_grad) {
      RowMatrix<Scalar> da = dy * pb.value.matrix(k, m).transpose();
      pa.accumulate(Eigen::Map<const VectorX<Scalar>>(da.data(), da.size()));
    }
    if (pb.requires_grad) {
      RowMatrix<Scalar> db = pa.value.matrix(n, k).transpose() * dy;
      pb.accumulate(Eigen::Map<const VectorX<Scalar>>(db.data(), db.size()));
    }
  });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  require(input.shape().size() == 2 && weight.shape().size() == 2 && input.dim(1) == weight.dim(0),
          "linear: shape mismatch " + shape_string(input.shape()) + " x " +
              shape_string(weight.shape()));
  const Index n = input.dim(0), din = input.dim(1), dout = weight.dim(1);
  check_bias("linear", bias, dout);
  require_finite_input("linear", input);
  Tensor<Scalar> out({n, dout});
  auto out_m = out.matrix(n, dout);
  out_m.noalias() = input.value().matrix(n, din) * weight.value().matrix(din, dout);
  if (bias.valid()) out_m.rowwise() += bias.value().data().transpose();

  std::vector<Var<Scalar>> parents{input, weight};
  if (bias.valid()) parents.push_back(bias);
  const bool has_bias = bias.valid();
  return make_result<Scalar>(
      "linear", std::move(out), std::move(parents), [n, din, dout, has_bias](Node<Scalar>& self) {
        auto& x = *self.parents[0];
        auto& w = *self.parents[1];
        auto dy = self.grad.matrix(n, dout);
        if (x.requires_grad) {
          RowMatrix<Scalar> dx = dy * w.value.matrix(din, dout).transpose();
          x.accumulate(Eigen::Map<const VectorX<Scalar>>(dx.data(), dx.size()));
        }
        if (w.requires_grad) {
          RowMatrix<Scalar> dw = x.value.matrix(n, din).transpose() * dy;
          w.accumulate(Eigen::Map<const VectorX<Scalar>>(dw.data(), dw.size()));
        }
        if (has_bias && self.parents[2]->requires_grad) {
          self.parents[2]->accumulate_expr(dy.colwise().sum().transpose());
        }
      });
}

template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar>& input, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       BatchNormState<Scalar>& state, Mode mode) {
  const Index channels = input.dim(-1);
  const Index m = input.size() / channels;
  require(gamma.shape() == Shape{channels} && beta.shape() == Shape{channels},
          "batch_norm: gamma/beta must be [" + std::to_string(channels) + "]");
  require(
      state.running_mean.shape() == Shape{channels} && state.running_var.shape() == Shape{channels},
      "batch_norm: running statistics have wrong shape");
  require_finite_input("batch_norm", input);
  const Scalar eps = static_cast<Scalar>(kBatchNormEps);
  auto x = input.value().channels();

  VectorX<Scalar> mu, var;
  if (mode == Mode::kTrain) {
    require(input.dim(0) >= 2,
            "batch_norm: train mode needs batch size >= 2, got " + std::to_string(input.dim(0)));
    mu = x.colwise().mean().transpose();
    var = (x.rowwise() - mu.transpose()).array().square().colwise().mean().transpose();
    const Scalar mom = static_cast<Scalar>(kBatchNormMomentum);
    const Scalar unbias = static_cast<Scalar>(m) / static_cast<Scalar>(std::max<Index>(m - 1, 1));
    state.running_mean.data() = mom * state.running_mean.data() + (Scalar(1) - mom) * mu;
    state.running_var.data() = mom * state.running_var.data() + (Scalar(1) - mom) * unbias * var;
  } else {
    mu = state.running_mean.data();
    var = state.running_var.data();
  }
  const VectorX<Scalar> inv_std = (var.array() + eps).rsqrt().matrix();

  RowMatrix<Scalar> xhat =
      (x.rowwise() - mu.transpose()).array().rowwise() * inv_std.transpose().array();
  Tensor<Scalar> out(input.shape());
  out.channels() = (xhat.array().rowwise() * gamma.value().data().transpose().array()).rowwise() +
                   beta.value().data().transpose().array();

  const bool batch_stats = mode == Mode::kTrain;
  return make_result<Scalar>(
      "batch_norm", std::move(out), {input, gamma, beta},
      [m, batch_stats, inv_std, xhat = std::move(xhat)](Node<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        auto dy = self.grad.channels();
        if (pg.requires_grad) {
          pg.accumulate_expr(dy.cwiseProduct(xhat).colwise().sum().transpose());
        }
        if (pb.requires_grad) pb.accumulate_expr(dy.colwise().sum().transpose());
        if (!px.requires_grad) return;
        RowMatrix<Scalar> dxhat = dy.array().rowwise() * pg.value.data().transpose().array();
        Tensor<Scalar> dx(px.value.shape());
        if (batch_stats) {
          const Scalar inv_m = Scalar(1) / static_cast<Scalar>(m);
          VectorX<Scalar> sum_d = dxhat.colwise().sum().transpose();
          VectorX<Scalar> sum_dx = dxhat.cwiseProduct(xhat).colwise().sum().transpose();
          dx.channels() = ((dxhat.rowwise() - (sum_d * inv_m).transpose()).array() -
                           xhat.array().rowwise() * (sum_dx * inv_m).transpose().array())
                              .rowwise() *
                          inv_std.transpose().array();
        } else {
          dx.channels() = dxhat.array().rowwise() * inv_std.transpose().array();
        }
        px.accumulate(dx.data());
      });
}

template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> lstm_step(const Var<Scalar>& x, const Var<Scalar>& h,
                                              const Var<Scalar>& c,
                                              const LstmParams<Scalar>& params) {
  const Index hidden = params.hidden();
  require(h.shape().size() == 2 && h.dim(1) == hidden && c.shape() == h.shape(),
          "lstm_step: state shapes " + shape_string(h.shape()) + "/" + shape_string(c.shape()) +
              " do not match hidden size " + std::to_string(hidden));
  require(params.recurrent_weight.dim(1) == 4 * hidden &&
              params.input_weight.dim(1) == 4 * hidden && params.bias.shape() == Shape{4 * hidden},
          "lstm_step: gate parameter shapes inconsistent");
  require(x.shape().size() == 2 && x.dim(0) == h.dim(0) && x.dim(1) == params.input_weight.dim(0),
          "lstm_step: input " + shape_string(x.shape()) + " incompatible with weights " +
              shape_string(params.input_weight.shape()));

  Var<Scalar> gates =
      add(linear(x, params.input_weight, params.bias), matmul(h, params.recurrent_weight));
  Var<Scalar> in_gate = sigmoid(slice(gates, 1, 0, hidden));
  Var<Scalar> forget_gate = sigmoid(slice(gates, 1, hidden, hidden));
  Var<Scalar> candidate = tanh(slice(gates, 1, 2 * hidden, hidden));
  Var<Scalar> out_gate = sigmoid(slice(gates, 1, 3 * hidden, hidden));
  Var<Scalar> c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
  Var<Scalar> h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

namespace {

template <typename Scalar>
Var<Scalar> forward_difference(const Var<Scalar>& img, bool along_x) {
  require(img.shape().size() == 4, "image_gradient: input must be NHWC");
  const Index n = img.dim(0), height = img.dim(1), width = img.dim(2), ch = img.dim(3);
  require(height >= 2 && width >= 2, "image_gradient: spatial extents must be >= 2");
  const Index step = along_x ? ch : width * ch;
  const Index limit = along_x ? width : height;
  auto index_along = [=](Index flat) {
    return along_x ? (flat / ch) % width : (flat / (width * ch)) % height;
  };
  const Scalar* src = img.value().ptr();
  Tensor<Scalar> out(img.shape());
  Scalar* dst = out.ptr();
  const Index total = n * height * width * ch;
  for (Index i = 0; i < total; ++i) {
    dst[i] = index_along(i) + 1 < limit ? src[i + step] - src[i] : Scalar(0);
  }
  return make_result<Scalar>(along_x ? "image_gradient_x" : "image_gradient_y", std::move(out),
                             {img}, [total, step, limit, index_along](Node<Scalar>& self) {
                               VectorX<Scalar> g = VectorX<Scalar>::Zero(total);
                               const Scalar* dy = self.grad.ptr();
                               for (Index i = 0; i < total; ++i) {
                                 if (index_along(i) + 1 < limit) {
                                   g[i + step] += dy[i];
                                   g[i] -= dy[i];
                                 }
                               }
                               self.parents[0]->accumulate(g);
                             });
}

}  // namespace

template <typename Scalar>
Var<Scalar> image_gradient_x(const Var<Scalar>& img) {
  return forward_difference(img, true);
}

template <typename Scalar>
Var<Scalar> image_gradient_y(const Var<Scalar>& img) {
  return forward_difference(img, false);
}

#define TLGEN_INSTANTIATE(S)                                                                     \
  template Var<S> conv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&);                        \
  template Var<S> deconv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&);                      \
  template Var<S> linear<S>(const Var<S>&, const Var<S>&, const Var<S>&);                        \
  template Var<S> matmul<S>(const Var<S>&, const Var<S>&);                                       \
  template Var<S> batch_norm<S>(const Var<S>&, const Var<S>&, const Var<S>&, BatchNormState<S>&, \
                                Mode);                                                           \
  template std::pair<Var<S>, Var<S>> lstm_step<S>(const Var<S>&, const Var<S>&, const Var<S>&,   \
                                                  const LstmParams<S>&);                         \
  template Var<S> image_gradient_x<S>(const Var<S>&);                                            \
  template Var<S> image_gradient_y<S>(const Var<S>&);

TLGEN_INSTANTIATE(float)
TLGEN_INSTANTIATE(double)

}  // namespace tlgen
