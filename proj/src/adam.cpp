#include "tlgen/adam.hpp"

#include <cmath>
#include <string>

namespace tlgen {

template <typename Scalar>
AdamState<Scalar> AdamState<Scalar>::for_shapes(std::span<const Shape> shapes,
                                                AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const Shape& shape : shapes) {
    s.first_moment.emplace_back(shape);
    s.second_moment.emplace_back(shape);
  }
  return s;
}

template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params,
               std::span<const Tensor<Scalar>* const> grads, AdamState<Scalar>& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw InvalidArgument("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i] && grads[i]->shape() != params[i]->shape()) {
      throw InvalidArgument("adam_step: gradient shape " + shape_string(grads[i]->shape()) +
                            " does not match parameter " + shape_string(params[i]->shape()));
    }
    if (state.first_moment[i].shape() != params[i]->shape()) {
      throw InvalidArgument("adam_step: moment shape does not match parameter");
    }
    if (grads[i] && !grads[i]->all_finite()) {
      throw NumericError("adam_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  const AdamOptions& o = state.options;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const Scalar b1 = static_cast<Scalar>(o.beta1);
  const Scalar b2 = static_cast<Scalar>(o.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(o.beta1, t));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(o.beta2, t));
  const Scalar lr = static_cast<Scalar>(o.learning_rate);
  const Scalar eps = static_cast<Scalar>(o.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment[i].data().array();
    auto v = state.second_moment[i].data().array();
    if (grads[i]) {
      const auto g = grads[i]->data().array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
    } else {
      m = b1 * m;
      v = b2 * v;
    }
    params[i]->data().array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

template <typename Scalar>
Adam<Scalar>::Adam(std::vector<Var<Scalar>> params, AdamOptions options)
    : params_(std::move(params)) {
  state_.options = options;
  reset();
}

template <typename Scalar>
void Adam<Scalar>::reset() {
  std::vector<Shape> shapes;
  for (const auto& p : params_) shapes.push_back(p.shape());
  state_ = AdamState<Scalar>::for_shapes(shapes, state_.options);
}

template <typename Scalar>
void Adam<Scalar>::step() {
  std::vector<Tensor<Scalar>*> values;
  std::vector<const Tensor<Scalar>*> grads;
  for (auto& p : params_) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.has_grad() ? &p.grad() : nullptr);
  }
  adam_step<Scalar>(values, grads, state_);
}

template <typename Scalar>
void Adam<Scalar>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template struct AdamState<float>;
template struct AdamState<double>;
template class Adam<float>;
template class Adam<double>;
template void adam_step<float>(std::span<Tensor<float>* const>,
                               std::span<const Tensor<float>* const>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>* const>,
                                std::span<const Tensor<double>* const>, AdamState<double>&);

}  // namespace tlgen
