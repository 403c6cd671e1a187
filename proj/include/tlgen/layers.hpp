#pragma once

#include <utility>

#include "tlgen/autodiff.hpp"

namespace tlgen {

/// Spatial kernel extent of every conv/deconv layer.
inline constexpr Index kKernelSize = 5;
/// Rows/columns of zero padding before the image in a stride-2 conv. With a
/// 5x5 kernel the total padding is 3 (one before, two after), so an even
/// extent H maps to exactly H/2 and the transposed op maps H back to 2H.
inline constexpr Index kPadBefore = 1;

/// 5x5 stride-2 convolution. input [N,H,W,Cin], kernel [5,5,Cin,Cout],
/// bias [Cout] (may be invalid for none). Output [N,H/2,W/2,Cout].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias);

/// Transposed 5x5 stride-2 convolution, the exact adjoint of conv2d in its
/// input argument. input [N,H,W,Cin], kernel [5,5,Cout,Cin], bias [Cout].
/// Output [N,2H,2W,Cout].
template <typename Scalar>
Var<Scalar> deconv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias);

/// x [N,Din] * weight [Din,Dout] + bias [Dout].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias);

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b);

enum class Mode { kTrain, kEval };

template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;

  static BatchNormState identity(Index channels) {
    return {Tensor<Scalar>::zeros({channels}), Tensor<Scalar>::constant({channels}, Scalar(1))};
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-channel normalization over all leading axes. Train mode uses batch
/// statistics and updates `state` with an exponential moving average
/// (running = momentum * running + (1 - momentum) * batch, unbiased variance).
template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar>& input, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       BatchNormState<Scalar>& state, Mode mode);

template <typename Scalar>
struct LstmParams {
  Var<Scalar> input_weight;      // [Din, 4H], gate order i, f, g, o
  Var<Scalar> recurrent_weight;  // [H, 4H]
  Var<Scalar> bias;              // [4H]

  Index hidden() const { return recurrent_weight.dim(0); }
};

/// One LSTM cell update. Returns (h', c').
template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> lstm_step(const Var<Scalar>& x, const Var<Scalar>& h,
                                              const Var<Scalar>& c,
                                              const LstmParams<Scalar>& params);

/// Forward differences along width (x) and height (y) of an NHWC tensor;
/// the last column/row is zero.
template <typename Scalar>
Var<Scalar> image_gradient_x(const Var<Scalar>& img);
template <typename Scalar>
Var<Scalar> image_gradient_y(const Var<Scalar>& img);

}  // namespace tlgen
