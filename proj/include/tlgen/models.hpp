#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tlgen/layers.hpp"

namespace tlgen {

inline constexpr Index kImageSize = 64;
inline constexpr Index kImageChannels = 3;
inline constexpr Index kBottleneckSize = 4;  // spatial extent after four stride-2 convs
inline constexpr int kRecurrentSteps = 4;
inline constexpr Index kConditionArity = 4;

enum class ModelKind {
  kPairwise,
  kTwoStack,
  kRecurrent,
  kDiscriminator,
  kConditionalDiscriminator
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Architecture hyperparameters. `channels` are the encoder widths; the
/// decoder uses them in reverse and ends in three image channels.
struct ModelConfig {
  ModelKind kind = ModelKind::kPairwise;
  std::array<Index, 4> channels{64, 128, 256, 512};
  Index code_width = 512;

  /// Full-size architecture: channels 64..512, code 512.
  static ModelConfig paper(ModelKind kind);
  /// Channels scaled by `width` (rounded, at least 1); code width kept at 512.
  static ModelConfig scaled(ModelKind kind, double width);
  /// Gradient-check clone: channels 4,8,12,16, code 16.
  static ModelConfig tiny(ModelKind kind);

  bool conditional() const {
    return kind == ModelKind::kPairwise || kind == ModelKind::kConditionalDiscriminator;
  }
  bool is_discriminator() const {
    return kind == ModelKind::kDiscriminator || kind == ModelKind::kConditionalDiscriminator;
  }
  /// The discriminator that pairs with this generator.
  ModelConfig discriminator() const;

  /// Human-readable key = value text.
  std::string to_text() const;
  static ModelConfig parse(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

/// One-hot future-offset label; offset = 0.25 * index.
struct ConditionVector {
  int index = 0;

  static ConditionVector from_index(int index);
  /// Throws InvalidArgument unless `values` is a valid 4-way one-hot.
  static ConditionVector from_one_hot(std::span<const double> values);
  double degree_value() const { return 0.25 * index; }
  std::array<double, kConditionArity> one_hot() const;
};

/// [N, 4] one-hot batch for the given indices.
template <typename Scalar>
Tensor<Scalar> condition_batch(std::span<const int> indices);

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Var<Scalar> var;
};

template <typename Scalar>
struct NamedBuffer {
  std::string name;
  Tensor<Scalar>* tensor;
};

template <typename Scalar>
struct BatchNormLayer {
  Var<Scalar> gamma, beta;
  BatchNormState<Scalar> state;

  Var<Scalar> operator()(const Var<Scalar>& x, Mode mode) {
    return batch_norm(x, gamma, beta, state, mode);
  }
};

/// Owns named parameters and batch-norm buffers. Not movable: buffer
/// registrations point into the module.
template <typename Scalar>
class Module {
 public:
  explicit Module(ModelConfig config, std::uint64_t seed);
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParameter<Scalar>>& named_parameters() const { return params_; }
  std::vector<NamedBuffer<Scalar>> named_buffers();
  std::vector<Var<Scalar>> parameters() const;
  Index parameter_count() const;
  void zero_grad();

  // Registration, in a fixed order so that a seed fixes every value.
  Var<Scalar> weight(const std::string& name, Shape shape);  // N(0, 0.02)
  Var<Scalar> zeros(const std::string& name, Shape shape);
  BatchNormLayer<Scalar>* batch_norm_layer(const std::string& name, Index channels);

 private:
  ModelConfig config_;
  std::mt19937_64 rng_;
  std::vector<NamedParameter<Scalar>> params_;
  std::deque<std::pair<std::string, BatchNormLayer<Scalar>>> norms_;
};

template <typename Scalar>
struct ConvBlock {
  Var<Scalar> kernel, bias;
  BatchNormLayer<Scalar>* norm = nullptr;
};

/// Four conv(5x5, stride 2) + batch-norm + relu blocks: 64 -> 32 -> 16 -> 8 -> 4.
template <typename Scalar>
struct ConvStack {
  std::array<ConvBlock<Scalar>, 4> blocks;
  Var<Scalar> forward(const Var<Scalar>& image, Mode mode) const;
};

/// Conv stack followed by flatten and a linear map to the code.
template <typename Scalar>
struct EncoderParams {
  ConvStack<Scalar> convs;
  Var<Scalar> bottleneck_weight, bottleneck_bias;
  Var<Scalar> forward(const Var<Scalar>& image, Mode mode) const;
};

/// Linear code -> 4x4xC4 (batch-norm + relu), then four deconv blocks; the
/// last one ends in tanh with three output channels.
template <typename Scalar>
struct DecoderParams {
  Var<Scalar> entry_weight, entry_bias;
  BatchNormLayer<Scalar>* entry_norm = nullptr;
  std::array<ConvBlock<Scalar>, 4> blocks;  // blocks[3].norm is null
  Index entry_channels = 0;
  Var<Scalar> forward(const Var<Scalar>& code, Mode mode) const;
};

/// Generator input; which members are used depends on the model kind.
template <typename Scalar>
struct GeneratorInput {
  Var<Scalar> image;         // x, or the frame at t for two-stack
  Var<Scalar> second_image;  // frame at t+m (two-stack)
  Var<Scalar> condition;     // [N,4] one-hot (pairwise)
};

template <typename Scalar>
class Generator : public Module<Scalar> {
 public:
  using Module<Scalar>::Module;
  /// One output frame batch, or four for the recurrent model.
  virtual std::vector<Var<Scalar>> generate(const GeneratorInput<Scalar>& input, Mode mode) = 0;
};

template <typename Scalar>
class PairwiseGenerator : public Generator<Scalar> {
 public:
  PairwiseGenerator(const ModelConfig& config, std::uint64_t seed);
  /// image [N,64,64,3], condition [N,4] one-hot. Output [N,64,64,3] in (-1,1).
  Var<Scalar> forward(const Var<Scalar>& image, const Var<Scalar>& condition, Mode mode);
  std::vector<Var<Scalar>> generate(const GeneratorInput<Scalar>& input, Mode mode) override;

  EncoderParams<Scalar> encoder;
  Var<Scalar> condition_weight, condition_bias;  // 4 -> code width
  DecoderParams<Scalar> decoder;
};

template <typename Scalar>
class TwoStackGenerator : public Generator<Scalar> {
 public:
  TwoStackGenerator(const ModelConfig& config, std::uint64_t seed);
  /// Frames at t and t+m; predicts t+2m.
  Var<Scalar> forward(const Var<Scalar>& first, const Var<Scalar>& second, Mode mode);
  std::vector<Var<Scalar>> generate(const GeneratorInput<Scalar>& input, Mode mode) override;

  EncoderParams<Scalar> first_encoder;
  EncoderParams<Scalar> second_encoder;
  DecoderParams<Scalar> decoder;
};

template <typename Scalar>
class RecurrentGenerator : public Generator<Scalar> {
 public:
  RecurrentGenerator(const ModelConfig& config, std::uint64_t seed);
  /// Four frames at offsets 0, 0.1, 0.2, 0.3. The LSTM sees the code at every
  /// step and carries (h, c); one decoder is shared by all steps.
  std::vector<Var<Scalar>> forward(const Var<Scalar>& image, int steps, Mode mode);
  std::vector<Var<Scalar>> generate(const GeneratorInput<Scalar>& input, Mode mode) override;

  EncoderParams<Scalar> encoder;
  LstmParams<Scalar> lstm;
  DecoderParams<Scalar> decoder;
};

template <typename Scalar>
class Discriminator : public Module<Scalar> {
 public:
  Discriminator(const ModelConfig& config, std::uint64_t seed);
  /// Probability in (0,1) per image, shape [N,1]. The conditional variant maps
  /// the one-hot through a linear layer to a 64x64 plane stacked as a fourth
  /// input channel.
  Var<Scalar> forward(const Var<Scalar>& image, const std::optional<Var<Scalar>>& condition,
                      Mode mode);

  Var<Scalar> condition_weight, condition_bias;  // conditional only
  ConvStack<Scalar> convs;
  Var<Scalar> output_weight, output_bias;
};

template <typename Scalar>
std::unique_ptr<Generator<Scalar>> make_generator(const ModelConfig& config, std::uint64_t seed);

/// Any model kind; discriminators come back as Discriminator.
template <typename Scalar>
std::unique_ptr<Module<Scalar>> init_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace tlgen
