#include "tlgen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "tlgen/seed.hpp"

namespace tlgen {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
Var<Scalar> make_result(const char* op, Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                        std::function<void(Node<Scalar>&)> backward_fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite value in output " +
                       shape_string(value.shape()));
  }
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  bool needs = std::any_of(parents.begin(), parents.end(),
                           [](const Var<Scalar>& p) { return p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var<Scalar>(std::move(node));
}

template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.size() != 1) {
    throw InvalidArgument("backward: root must hold a single element, got " +
                          shape_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  using NodeT = Node<Scalar>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(VectorX<Scalar>::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Intermediate gradients are no longer needed; leaves keep theirs.
  for (NodeT* node : order) {
    if (node->backward_fn) node->grad = Tensor<Scalar>();
  }
}

template <typename Scalar>
Var<Scalar> detach(const Var<Scalar>& v) {
  return Var<Scalar>(v.value(), false);
}

namespace {

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

template <typename Scalar>
Node<Scalar>& parent(Node<Scalar>& n, std::size_t i) {
  return *n.parents[i];
}

}  // namespace

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape("add", a, b);
  Tensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  return make_result<Scalar>("add", std::move(out), {a, b}, [](Node<Scalar>& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (parent(self, i).requires_grad) parent(self, i).accumulate(self.grad.data());
    }
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape("sub", a, b);
  Tensor<Scalar> out(a.shape(), a.value().data() - b.value().data());
  return make_result<Scalar>("sub", std::move(out), {a, b}, [](Node<Scalar>& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad.data());
    if (parent(self, 1).requires_grad) parent(self, 1).accumulate_expr(-self.grad.data());
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape("mul", a, b);
  Tensor<Scalar> out(a.shape(), a.value().data().cwiseProduct(b.value().data()));
  return make_result<Scalar>("mul", std::move(out), {a, b}, [](Node<Scalar>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate_expr(self.grad.data().cwiseProduct(pb.value.data()));
    if (pb.requires_grad) pb.accumulate_expr(self.grad.data().cwiseProduct(pa.value.data()));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), a.value().data() * s);
  return make_result<Scalar>("scale", std::move(out), {a}, [s](Node<Scalar>& self) {
    parent(self, 0).accumulate_expr(self.grad.data() * s);
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), a.value().data().array() + s);
  return make_result<Scalar>("add_scalar", std::move(out), {a}, [](Node<Scalar>& self) {
    parent(self, 0).accumulate(self.grad.data());
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  Tensor<Scalar> out(a.shape(), a.value().data().array().square().matrix());
  return make_result<Scalar>("square", std::move(out), {a}, [](Node<Scalar>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate_expr(Scalar(2) * self.grad.data().cwiseProduct(pa.value.data()));
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Tensor<Scalar> out = Tensor<Scalar>::constant({1}, a.value().data().sum());
  return make_result<Scalar>("sum", std::move(out), {a}, [](Node<Scalar>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate_expr(VectorX<Scalar>::Constant(pa.value.size(), self.grad[0]));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  const Scalar n = static_cast<Scalar>(a.size());
  Tensor<Scalar> out = Tensor<Scalar>::constant({1}, a.value().data().sum() / n);
  return make_result<Scalar>("mean", std::move(out), {a}, [n](Node<Scalar>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate_expr(VectorX<Scalar>::Constant(pa.value.size(), self.grad[0] / n));
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& a, const Tensor<Scalar>& w) {
  if (a.shape() != w.shape()) {
    throw InvalidArgument("weighted_sum: shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(w.shape()));
  }
  Tensor<Scalar> out = Tensor<Scalar>::constant({1}, a.value().data().dot(w.data()));
  return make_result<Scalar>("weighted_sum", std::move(out), {a}, [w](Node<Scalar>& self) {
    parent(self, 0).accumulate_expr(w.data() * self.grad[0]);
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape) {
  Tensor<Scalar> out = a.value().reshaped(std::move(shape));
  return make_result<Scalar>("reshape", std::move(out), {a}, [](Node<Scalar>& self) {
    parent(self, 0).accumulate(self.grad.data());
  });
}

namespace {

// Splits a shape around `axis` into (outer, extent, inner) block counts.
struct AxisSplit {
  Index outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.extent = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= shape[i];
  }
  return s;
}

int normalize_axis(int axis, int rank, const char* op) {
  int a = axis < 0 ? rank + axis : axis;
  if (a < 0 || a >= rank) throw InvalidArgument(std::string(op) + ": axis out of range");
  return a;
}

}  // namespace

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  const Shape& first = parts.front().shape();
  const int ax = normalize_axis(axis, static_cast<int>(first.size()), "concat");
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(ax)] = 0;
  std::vector<Index> extents;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw InvalidArgument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != first[i]) {
        throw InvalidArgument("concat: shape mismatch " + shape_string(s) + " vs " +
                              shape_string(first));
      }
    }
    extents.push_back(s[static_cast<std::size_t>(ax)]);
    out_shape[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
  }
  const AxisSplit os = split_at(out_shape, ax);
  Tensor<Scalar> out(out_shape);
  Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Index block = extents[k] * os.inner;
    const Scalar* src = parts[k].value().ptr();
    for (Index o = 0; o < os.outer; ++o) {
      std::copy_n(src + o * block, block, out.ptr() + o * os.extent * os.inner + offset);
    }
    offset += block;
  }
  return make_result<Scalar>("concat", std::move(out), parts, [os, extents](Node<Scalar>& self) {
    Index off = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const Index block = extents[k] * os.inner;
      auto& p = parent(self, k);
      if (p.requires_grad) {
        VectorX<Scalar> g(p.value.size());
        for (Index o = 0; o < os.outer; ++o) {
          g.segment(o * block, block) =
              self.grad.data().segment(o * os.extent * os.inner + off, block);
        }
        p.accumulate(g);
      }
      off += block;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& a, int axis, Index start, Index length) {
  const int ax = normalize_axis(axis, static_cast<int>(a.shape().size()), "slice");
  const AxisSplit is = split_at(a.shape(), ax);
  if (start < 0 || length <= 0 || start + length > is.extent) {
    throw InvalidArgument("slice: range out of bounds");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  Tensor<Scalar> out(out_shape);
  const Index block = length * is.inner;
  for (Index o = 0; o < is.outer; ++o) {
    out.data().segment(o * block, block) =
        a.value().data().segment(o * is.extent * is.inner + start * is.inner, block);
  }
  return make_result<Scalar>("slice", std::move(out), {a}, [is, start, block](Node<Scalar>& self) {
    auto& p = parent(self, 0);
    VectorX<Scalar> g = VectorX<Scalar>::Zero(p.value.size());
    for (Index o = 0; o < is.outer; ++o) {
      g.segment(o * is.extent * is.inner + start * is.inner, block) =
          self.grad.data().segment(o * block, block);
    }
    p.accumulate(g);
  });
}

template <typename Scalar>
Var<Scalar> log_clamped(const Var<Scalar>& a, Scalar floor) {
  const auto& x = a.value().data();
  Tensor<Scalar> out(a.shape(), x.array().max(floor).log().matrix());
  return make_result<Scalar>("log_clamped", std::move(out), {a}, [floor](Node<Scalar>& self) {
    auto& p = parent(self, 0);
    const auto& xv = p.value.data().array();
    p.accumulate_expr((xv > floor).select(self.grad.data().array() / xv, Scalar(0)).matrix());
  });
}

namespace {

struct ReluTrace {
  bool active = false;
  std::uint64_t signature = 0;
};
thread_local ReluTrace relu_trace;

template <typename Scalar>
void trace_pattern(const Tensor<Scalar>& x) {
  std::uint64_t word = 0;
  for (Index i = 0; i < x.size(); ++i) {
    word = (word << 1) | (x[i] > Scalar(0) ? 1u : 0u);
    if (i % 64 == 63 || i + 1 == x.size()) {
      relu_trace.signature = mix64(relu_trace.signature ^ word);
      word = 0;
    }
  }
}

}  // namespace

void begin_relu_trace() { relu_trace = {true, 0}; }

std::uint64_t end_relu_trace() {
  relu_trace.active = false;
  return relu_trace.signature;
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  if (relu_trace.active) trace_pattern(a.value());
  Tensor<Scalar> out(a.shape(), a.value().data().cwiseMax(Scalar(0)));
  return make_result<Scalar>("relu", std::move(out), {a}, [](Node<Scalar>& self) {
    auto& p = parent(self, 0);
    p.accumulate_expr(
        (p.value.data().array() > Scalar(0)).select(self.grad.data().array(), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  Tensor<Scalar> out(a.shape(), a.value().data().array().tanh().matrix());
  return make_result<Scalar>("tanh", std::move(out), {a}, [](Node<Scalar>& self) {
    const auto y = self.value.data().array();
    parent(self, 0).accumulate_expr((self.grad.data().array() * (Scalar(1) - y * y)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Tensor<Scalar> out(a.shape(),
                     (Scalar(1) / (Scalar(1) + (-a.value().data().array()).exp())).matrix());
  return make_result<Scalar>("sigmoid", std::move(out), {a}, [](Node<Scalar>& self) {
    const auto y = self.value.data().array();
    parent(self, 0).accumulate_expr((self.grad.data().array() * y * (Scalar(1) - y)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> activation(const Var<Scalar>& a, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return relu(a);
    case Activation::kTanh:
      return tanh(a);
    case Activation::kSigmoid:
      return sigmoid(a);
  }
  throw InvalidArgument("activation: unknown kind");
}

#define TLGEN_INSTANTIATE(S)                                                  \
  template Var<S> make_result<S>(const char*, Tensor<S>, std::vector<Var<S>>, \
                                 std::function<void(Node<S>&)>);              \
  template void backward<S>(const Var<S>&);                                   \
  template Var<S> detach<S>(const Var<S>&);                                   \
  template Var<S> add<S>(const Var<S>&, const Var<S>&);                       \
  template Var<S> sub<S>(const Var<S>&, const Var<S>&);                       \
  template Var<S> mul<S>(const Var<S>&, const Var<S>&);                       \
  template Var<S> scale<S>(const Var<S>&, S);                                 \
  template Var<S> add_scalar<S>(const Var<S>&, S);                            \
  template Var<S> square<S>(const Var<S>&);                                   \
  template Var<S> sum<S>(const Var<S>&);                                      \
  template Var<S> mean<S>(const Var<S>&);                                     \
  template Var<S> weighted_sum<S>(const Var<S>&, const Tensor<S>&);           \
  template Var<S> reshape<S>(const Var<S>&, Shape);                           \
  template Var<S> concat<S>(const std::vector<Var<S>>&, int);                 \
  template Var<S> slice<S>(const Var<S>&, int, Index, Index);                 \
  template Var<S> log_clamped<S>(const Var<S>&, S);                           \
  template Var<S> relu<S>(const Var<S>&);                                     \
  template Var<S> tanh<S>(const Var<S>&);                                     \
  template Var<S> sigmoid<S>(const Var<S>&);                                  \
  template Var<S> activation<S>(const Var<S>&, Activation);

TLGEN_INSTANTIATE(float)
TLGEN_INSTANTIATE(double)

}  // namespace tlgen
