#include "tlgen/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "tlgen/config.hpp"

namespace tlgen {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPairwise:
      return "pairwise";
    case ModelKind::kTwoStack:
      return "twostack";
    case ModelKind::kRecurrent:
      return "recurrent";
    case ModelKind::kDiscriminator:
      return "discriminator";
    case ModelKind::kConditionalDiscriminator:
      return "discriminator_cond";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  for (ModelKind k : {ModelKind::kPairwise, ModelKind::kTwoStack, ModelKind::kRecurrent,
                      ModelKind::kDiscriminator, ModelKind::kConditionalDiscriminator}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown model kind '" + text + "'");
}

ModelConfig ModelConfig::paper(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  return c;
}

ModelConfig ModelConfig::scaled(ModelKind kind, double width) {
  if (!(width > 0.0)) throw ConfigError("width multiplier must be positive");
  ModelConfig c = paper(kind);
  for (auto& ch : c.channels) {
    ch = std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(ch) * width)));
  }
  return c;
}

ModelConfig ModelConfig::tiny(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.channels = {4, 8, 12, 16};
  c.code_width = 16;
  return c;
}

ModelConfig ModelConfig::discriminator() const {
  ModelConfig d = *this;
  d.kind = conditional() ? ModelKind::kConditionalDiscriminator : ModelKind::kDiscriminator;
  return d;
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "kind = " << to_string(kind) << "\n";
  os << "channels = " << channels[0] << "," << channels[1] << "," << channels[2] << ","
     << channels[3] << "\n";
  os << "code_width = " << code_width << "\n";
  os << "condition_arity = " << (conditional() ? kConditionArity : 0) << "\n";
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  KeyValueConfig kv = KeyValueConfig::parse(text);
  ModelConfig c;
  c.kind = parse_model_kind(kv.get("kind"));
  const auto widths = kv.get_list<Index>("channels");
  if (widths.size() != 4) throw ConfigError("channels must list four widths");
  std::copy(widths.begin(), widths.end(), c.channels.begin());
  c.code_width = kv.get_or<Index>("code_width", 512);
  const Index arity = kv.get_or<Index>("condition_arity", c.conditional() ? kConditionArity : 0);
  if (arity != (c.conditional() ? kConditionArity : 0)) {
    throw ConfigError("condition_arity " + std::to_string(arity) + " inconsistent with kind " +
                      to_string(c.kind));
  }
  for (Index w : c.channels) {
    if (w <= 0) throw ConfigError("channel widths must be positive");
  }
  if (c.code_width <= 0) throw ConfigError("code_width must be positive");
  kv.require_all_used();
  return c;
}

ConditionVector ConditionVector::from_index(int index) {
  if (index < 0 || index >= kConditionArity) {
    throw InvalidArgument("condition index must be in 0..3, got " + std::to_string(index));
  }
  return ConditionVector{index};
}

ConditionVector ConditionVector::from_one_hot(std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(kConditionArity)) {
    throw InvalidArgument("condition must have 4 entries");
  }
  int hot = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 1.0) {
      if (hot >= 0) throw InvalidArgument("condition has more than one hot entry");
      hot = static_cast<int>(i);
    } else if (values[i] != 0.0) {
      throw InvalidArgument("condition entries must be 0 or 1");
    }
  }
  if (hot < 0) throw InvalidArgument("condition has no hot entry");
  return ConditionVector{hot};
}

std::array<double, kConditionArity> ConditionVector::one_hot() const {
  std::array<double, kConditionArity> v{};
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

template <typename Scalar>
Tensor<Scalar> condition_batch(std::span<const int> indices) {
  if (indices.empty()) throw InvalidArgument("condition_batch: empty batch");
  Tensor<Scalar> t({static_cast<Index>(indices.size()), kConditionArity});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    t[static_cast<Index>(i) * kConditionArity + ConditionVector::from_index(indices[i]).index] =
        Scalar(1);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Module

template <typename Scalar>
Module<Scalar>::Module(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {}

template <typename Scalar>
Var<Scalar> Module<Scalar>::weight(const std::string& name, Shape shape) {
  Tensor<Scalar> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 0.02);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng_));
  Var<Scalar> v(std::move(t), true);
  params_.push_back({name, v});
  return v;
}

template <typename Scalar>
Var<Scalar> Module<Scalar>::zeros(const std::string& name, Shape shape) {
  Var<Scalar> v(Tensor<Scalar>(std::move(shape)), true);
  params_.push_back({name, v});
  return v;
}

template <typename Scalar>
BatchNormLayer<Scalar>* Module<Scalar>::batch_norm_layer(const std::string& name, Index channels) {
  BatchNormLayer<Scalar> layer;
  layer.gamma = Var<Scalar>(Tensor<Scalar>::constant({channels}, Scalar(1)), true);
  layer.beta = Var<Scalar>(Tensor<Scalar>({channels}), true);
  layer.state = BatchNormState<Scalar>::identity(channels);
  params_.push_back({name + ".gamma", layer.gamma});
  params_.push_back({name + ".beta", layer.beta});
  norms_.emplace_back(name, std::move(layer));
  return &norms_.back().second;
}

template <typename Scalar>
std::vector<NamedBuffer<Scalar>> Module<Scalar>::named_buffers() {
  std::vector<NamedBuffer<Scalar>> out;
  for (auto& [name, layer] : norms_) {
    out.push_back({name + ".running_mean", &layer.state.running_mean});
    out.push_back({name + ".running_var", &layer.state.running_var});
  }
  return out;
}

template <typename Scalar>
std::vector<Var<Scalar>> Module<Scalar>::parameters() const {
  std::vector<Var<Scalar>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var);
  return out;
}

template <typename Scalar>
Index Module<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.var.size();
  return n;
}

template <typename Scalar>
void Module<Scalar>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

template <typename Scalar>
ConvStack<Scalar> build_conv_stack(Module<Scalar>& m, const std::string& prefix,
                                   Index in_channels) {
  ConvStack<Scalar> stack;
  Index cin = in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    const Index cout = m.config().channels[i];
    const std::string name = prefix + ".conv" + std::to_string(i);
    stack.blocks[i].kernel = m.weight(name + ".kernel", {kKernelSize, kKernelSize, cin, cout});
    // No bias: batch norm follows.
    stack.blocks[i].norm = m.batch_norm_layer(name + ".bn", cout);
    cin = cout;
  }
  return stack;
}

template <typename Scalar>
Index flat_features(const ModelConfig& c) {
  return kBottleneckSize * kBottleneckSize * c.channels[3];
}

template <typename Scalar>
EncoderParams<Scalar> build_encoder(Module<Scalar>& m, const std::string& prefix) {
  EncoderParams<Scalar> e;
  e.convs = build_conv_stack(m, prefix, kImageChannels);
  const Index flat = flat_features<Scalar>(m.config());
  e.bottleneck_weight = m.weight(prefix + ".bottleneck.weight", {flat, m.config().code_width});
  e.bottleneck_bias = m.zeros(prefix + ".bottleneck.bias", {m.config().code_width});
  return e;
}

template <typename Scalar>
DecoderParams<Scalar> build_decoder(Module<Scalar>& m, const std::string& prefix,
                                    Index input_width) {
  const auto& ch = m.config().channels;
  DecoderParams<Scalar> d;
  d.entry_channels = ch[3];
  const Index flat = flat_features<Scalar>(m.config());
  d.entry_weight = m.weight(prefix + ".entry.weight", {input_width, flat});
  d.entry_norm = m.batch_norm_layer(prefix + ".entry.bn", ch[3]);
  const std::array<Index, 5> widths{ch[3], ch[2], ch[1], ch[0], kImageChannels};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = prefix + ".deconv" + std::to_string(i);
    d.blocks[i].kernel =
        m.weight(name + ".kernel", {kKernelSize, kKernelSize, widths[i + 1], widths[i]});
    // Batch norm cancels any bias, so only the output layer has one.
    if (i < 3) {
      d.blocks[i].norm = m.batch_norm_layer(name + ".bn", widths[i + 1]);
    } else {
      d.blocks[i].bias = m.zeros(name + ".bias", {widths[i + 1]});
    }
  }
  return d;
}

void require_image_batch(const char* op, const Shape& s, Index channels = kImageChannels) {
  if (s.size() != 4 || s[1] != kImageSize || s[2] != kImageSize || s[3] != channels) {
    throw InvalidArgument(std::string(op) + ": expected [N,64,64," + std::to_string(channels) +
                          "] image batch, got " + shape_string(s));
  }
}

template <typename Scalar>
void require_condition(const char* op, const Var<Scalar>& cond, Index batch) {
  if (!cond.valid() || cond.shape() != Shape{batch, kConditionArity}) {
    throw InvalidArgument(std::string(op) + ": condition must be [N,4] one-hot");
  }
  for (Index n = 0; n < batch; ++n) {
    std::array<double, kConditionArity> row{};
    for (Index k = 0; k < kConditionArity; ++k) {
      row[static_cast<std::size_t>(k)] = static_cast<double>(cond.value()[n * kConditionArity + k]);
    }
    ConditionVector::from_one_hot(row);
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> ConvStack<Scalar>::forward(const Var<Scalar>& image, Mode mode) const {
  Var<Scalar> h = image;
  for (const auto& b : blocks) h = relu((*b.norm)(conv2d(h, b.kernel, b.bias), mode));
  return h;
}

template <typename Scalar>
Var<Scalar> EncoderParams<Scalar>::forward(const Var<Scalar>& image, Mode mode) const {
  Var<Scalar> features = convs.forward(image, mode);
  const Index n = features.dim(0);
  return linear(reshape(features, {n, features.size() / n}), bottleneck_weight, bottleneck_bias);
}

template <typename Scalar>
Var<Scalar> DecoderParams<Scalar>::forward(const Var<Scalar>& code, Mode mode) const {
  const Index n = code.dim(0);
  Var<Scalar> h = linear(code, entry_weight, entry_bias);
  h = reshape(h, {n, kBottleneckSize, kBottleneckSize, entry_channels});
  h = relu((*entry_norm)(h, mode));
  for (std::size_t i = 0; i < 3; ++i) {
    h = relu((*blocks[i].norm)(deconv2d(h, blocks[i].kernel, blocks[i].bias), mode));
  }
  return tanh(deconv2d(h, blocks[3].kernel, blocks[3].bias));
}

// ---------------------------------------------------------------------------
// Generators

template <typename Scalar>
PairwiseGenerator<Scalar>::PairwiseGenerator(const ModelConfig& config, std::uint64_t seed)
    : Generator<Scalar>(config, seed) {
  if (config.kind != ModelKind::kPairwise) throw InvalidArgument("config is not pairwise");
  encoder = build_encoder(*this, "encoder");
  condition_weight = this->weight("condition.weight", {kConditionArity, config.code_width});
  condition_bias = this->zeros("condition.bias", {config.code_width});
  decoder = build_decoder(*this, "decoder", 2 * config.code_width);
}

template <typename Scalar>
Var<Scalar> PairwiseGenerator<Scalar>::forward(const Var<Scalar>& image,
                                               const Var<Scalar>& condition, Mode mode) {
  require_image_batch("pairwise_forward", image.shape());
  require_condition("pairwise_forward", condition, image.dim(0));
  Var<Scalar> z = encoder.forward(image, mode);
  Var<Scalar> c = linear(condition, condition_weight, condition_bias);
  return decoder.forward(concat<Scalar>({z, c}, 1), mode);
}

template <typename Scalar>
std::vector<Var<Scalar>> PairwiseGenerator<Scalar>::generate(const GeneratorInput<Scalar>& in,
                                                             Mode mode) {
  return {forward(in.image, in.condition, mode)};
}

template <typename Scalar>
TwoStackGenerator<Scalar>::TwoStackGenerator(const ModelConfig& config, std::uint64_t seed)
    : Generator<Scalar>(config, seed) {
  if (config.kind != ModelKind::kTwoStack) throw InvalidArgument("config is not twostack");
  first_encoder = build_encoder(*this, "encoder1");
  second_encoder = build_encoder(*this, "encoder2");
  decoder = build_decoder(*this, "decoder", 2 * config.code_width);
}

template <typename Scalar>
Var<Scalar> TwoStackGenerator<Scalar>::forward(const Var<Scalar>& first, const Var<Scalar>& second,
                                               Mode mode) {
  require_image_batch("twostack_forward", first.shape());
  require_image_batch("twostack_forward", second.shape());
  if (first.dim(0) != second.dim(0)) throw InvalidArgument("twostack_forward: batch mismatch");
  Var<Scalar> z1 = first_encoder.forward(first, mode);
  Var<Scalar> z2 = second_encoder.forward(second, mode);
  return decoder.forward(concat<Scalar>({z1, z2}, 1), mode);
}

template <typename Scalar>
std::vector<Var<Scalar>> TwoStackGenerator<Scalar>::generate(const GeneratorInput<Scalar>& in,
                                                             Mode mode) {
  return {forward(in.image, in.second_image, mode)};
}

template <typename Scalar>
RecurrentGenerator<Scalar>::RecurrentGenerator(const ModelConfig& config, std::uint64_t seed)
    : Generator<Scalar>(config, seed) {
  if (config.kind != ModelKind::kRecurrent) throw InvalidArgument("config is not recurrent");
  const Index code = config.code_width;
  encoder = build_encoder(*this, "encoder");
  lstm.input_weight = this->weight("lstm.input_weight", {code, 4 * code});
  lstm.recurrent_weight = this->weight("lstm.recurrent_weight", {code, 4 * code});
  lstm.bias = this->zeros("lstm.bias", {4 * code});
  decoder = build_decoder(*this, "decoder", code);
}

template <typename Scalar>
std::vector<Var<Scalar>> RecurrentGenerator<Scalar>::forward(const Var<Scalar>& image, int steps,
                                                             Mode mode) {
  if (steps != kRecurrentSteps) {
    throw InvalidArgument("recurrent_forward: only 4 steps are supported, got " +
                          std::to_string(steps));
  }
  require_image_batch("recurrent_forward", image.shape());
  const Index n = image.dim(0);
  Var<Scalar> z = encoder.forward(image, mode);
  Var<Scalar> h(Tensor<Scalar>({n, lstm.hidden()}));
  Var<Scalar> c(Tensor<Scalar>({n, lstm.hidden()}));
  std::vector<Var<Scalar>> frames;
  for (int s = 0; s < steps; ++s) {
    std::tie(h, c) = lstm_step(z, h, c, lstm);
    frames.push_back(decoder.forward(h, mode));
  }
  return frames;
}

template <typename Scalar>
std::vector<Var<Scalar>> RecurrentGenerator<Scalar>::generate(const GeneratorInput<Scalar>& in,
                                                              Mode mode) {
  return forward(in.image, kRecurrentSteps, mode);
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename Scalar>
Discriminator<Scalar>::Discriminator(const ModelConfig& config, std::uint64_t seed)
    : Module<Scalar>(config, seed) {
  if (!config.is_discriminator()) throw InvalidArgument("config is not a discriminator");
  Index in_channels = kImageChannels;
  if (config.conditional()) {
    condition_weight = this->weight("condition.weight", {kConditionArity, kImageSize * kImageSize});
    condition_bias = this->zeros("condition.bias", {kImageSize * kImageSize});
    in_channels += 1;
  }
  convs = build_conv_stack(*this, "disc", in_channels);
  output_weight = this->weight("output.weight", {flat_features<Scalar>(config), 1});
  output_bias = this->zeros("output.bias", {1});
}

template <typename Scalar>
Var<Scalar> Discriminator<Scalar>::forward(const Var<Scalar>& image,
                                           const std::optional<Var<Scalar>>& condition, Mode mode) {
  require_image_batch("discriminate", image.shape());
  const Index n = image.dim(0);
  if (condition.has_value() != this->config().conditional()) {
    throw InvalidArgument(this->config().conditional()
                              ? "discriminate: conditional discriminator needs a condition"
                              : "discriminate: unconditional discriminator got a condition");
  }
  Var<Scalar> input = image;
  if (condition) {
    require_condition("discriminate", *condition, n);
    Var<Scalar> plane = reshape(linear(*condition, condition_weight, condition_bias),
                                {n, kImageSize, kImageSize, 1});
    input = concat<Scalar>({image, plane}, 3);
  }
  Var<Scalar> features = convs.forward(input, mode);
  Var<Scalar> flat = reshape(features, {n, features.size() / n});
  return sigmoid(linear(flat, output_weight, output_bias));
}

template <typename Scalar>
std::unique_ptr<Generator<Scalar>> make_generator(const ModelConfig& config, std::uint64_t seed) {
  switch (config.kind) {
    case ModelKind::kPairwise:
      return std::make_unique<PairwiseGenerator<Scalar>>(config, seed);
    case ModelKind::kTwoStack:
      return std::make_unique<TwoStackGenerator<Scalar>>(config, seed);
    case ModelKind::kRecurrent:
      return std::make_unique<RecurrentGenerator<Scalar>>(config, seed);
    default:
      break;
  }
  throw InvalidArgument("make_generator: " + to_string(config.kind) + " is not a generator");
}

template <typename Scalar>
std::unique_ptr<Module<Scalar>> init_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.is_discriminator()) return std::make_unique<Discriminator<Scalar>>(config, seed);
  return make_generator<Scalar>(config, seed);
}

#define TLGEN_INSTANTIATE(S)                                                                   \
  template Tensor<S> condition_batch<S>(std::span<const int>);                                 \
  template class Module<S>;                                                                    \
  template struct ConvStack<S>;                                                                \
  template struct EncoderParams<S>;                                                            \
  template struct DecoderParams<S>;                                                            \
  template class PairwiseGenerator<S>;                                                         \
  template class TwoStackGenerator<S>;                                                         \
  template class RecurrentGenerator<S>;                                                        \
  template class Discriminator<S>;                                                             \
  template std::unique_ptr<Generator<S>> make_generator<S>(const ModelConfig&, std::uint64_t); \
  template std::unique_ptr<Module<S>> init_model<S>(const ModelConfig&, std::uint64_t);

TLGEN_INSTANTIATE(float)
TLGEN_INSTANTIATE(double)

}  // namespace tlgen
