#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "test_util.hpp"
#include "tlgen/checkpoint.hpp"
#include "tlgen/models.hpp"

using namespace tlgen;

namespace {

// Parameter counts written out layer by layer. Batch-normed layers carry no
// bias; each batch norm adds gamma and beta.
Index conv_stack_params(Index cin, const std::array<Index, 4>& ch) {
  Index n = 0;
  for (Index c : ch) {
    n += 25 * cin * c + 2 * c;
    cin = c;
  }
  return n;
}

Index encoder_params(const ModelConfig& c) {
  return conv_stack_params(3, c.channels) + 16 * c.channels[3] * c.code_width + c.code_width;
}

Index decoder_params(const ModelConfig& c, Index input) {
  const auto& ch = c.channels;
  return input * 16 * ch[3] + 2 * ch[3]    // entry linear + bn
         + 25 * ch[3] * ch[2] + 2 * ch[2]  // deconv0
         + 25 * ch[2] * ch[1] + 2 * ch[1]  // deconv1
         + 25 * ch[1] * ch[0] + 2 * ch[0]  // deconv2
         + 25 * ch[0] * 3 + 3;             // deconv3 + bias
}

}  // namespace

TEST_CASE("parameter counts match a hand count") {
  const ModelConfig p = ModelConfig::paper(ModelKind::kPairwise);
  // Full-size pairwise generator, every term spelled out.
  const Index pairwise_full = (25 * 3 * 64 + 2 * 64) + (25 * 64 * 128 + 2 * 128) +
                              (25 * 128 * 256 + 2 * 256) + (25 * 256 * 512 + 2 * 512) +
                              (8192 * 512 + 512) + (4 * 512 + 512) + (1024 * 8192 + 2 * 512) +
                              (25 * 512 * 256 + 2 * 256) + (25 * 256 * 128 + 2 * 128) +
                              (25 * 128 * 64 + 2 * 64) + (25 * 64 * 3 + 3);
  CHECK(PairwiseGenerator<float>(p, 0).parameter_count() == pairwise_full);
  CHECK(pairwise_full == 21'201'027);

  for (double width : {1.0, 0.25}) {
    const auto pw = ModelConfig::scaled(ModelKind::kPairwise, width);
    const auto ts = ModelConfig::scaled(ModelKind::kTwoStack, width);
    const auto rc = ModelConfig::scaled(ModelKind::kRecurrent, width);
    const Index code = pw.code_width;
    CHECK(PairwiseGenerator<float>(pw, 0).parameter_count() ==
          encoder_params(pw) + 4 * code + code + decoder_params(pw, 2 * code));
    CHECK(TwoStackGenerator<float>(ts, 0).parameter_count() ==
          2 * encoder_params(ts) + decoder_params(ts, 2 * code));
    CHECK(RecurrentGenerator<float>(rc, 0).parameter_count() ==
          encoder_params(rc) + 2 * code * 4 * code + 4 * code + decoder_params(rc, code));
    const auto d = pw.discriminator();
    CHECK(d.kind == ModelKind::kConditionalDiscriminator);
    CHECK(Discriminator<float>(d, 0).parameter_count() ==
          4 * 4096 + 4096 + conv_stack_params(4, d.channels) + 16 * d.channels[3] + 1);
    const auto du = ts.discriminator();
    CHECK(Discriminator<float>(du, 0).parameter_count() ==
          conv_stack_params(3, du.channels) + 16 * du.channels[3] + 1);
  }
}

TEST_CASE("scaled configs round channel widths and keep the code") {
  const auto c = ModelConfig::scaled(ModelKind::kPairwise, 0.25);
  CHECK(c.channels == std::array<Index, 4>{16, 32, 64, 128});
  CHECK(c.code_width == 512);
  CHECK(ModelConfig::scaled(ModelKind::kPairwise, 0.001).channels[0] == 1);
  CHECK_THROWS_AS(ModelConfig::scaled(ModelKind::kPairwise, 0.0), ConfigError);
  CHECK(ModelConfig::parse(c.to_text()) == c);
  CHECK_THROWS_AS(ModelConfig::parse("kind = pairwise\nchannels = 1,2,3\n"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::parse("kind = twostack\nchannels = 1,2,3,4\ncondition_arity = 4\n"),
                  ConfigError);
}

TEST_CASE("condition vectors") {
  CHECK(ConditionVector::from_index(3).degree_value() == 0.75);
  CHECK_THROWS_AS(ConditionVector::from_index(4), InvalidArgument);
  const std::array<double, 4> ok{0, 0, 1, 0}, two{1, 0, 1, 0}, none{0, 0, 0, 0}, frac{0, 0.5, 0, 0};
  CHECK(ConditionVector::from_one_hot(ok).index == 2);
  CHECK_THROWS_AS(ConditionVector::from_one_hot(two), InvalidArgument);
  CHECK_THROWS_AS(ConditionVector::from_one_hot(none), InvalidArgument);
  CHECK_THROWS_AS(ConditionVector::from_one_hot(frac), InvalidArgument);
  const std::vector<int> idx{0, 3};
  const auto batch = condition_batch<float>(idx);
  CHECK(batch == Tensor<float>::from_values({2, 4}, {1, 0, 0, 0, 0, 0, 0, 1}));
}

TEST_CASE("models produce the documented shapes and ranges") {
  std::mt19937_64 rng(31);
  const Index n = 2;
  Var<float> img(test::random_tensor<float>({n, 64, 64, 3}, rng));
  const std::vector<int> idx{0, 2};
  Var<float> cond(condition_batch<float>(idx));
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    PairwiseGenerator<float> g(ModelConfig::tiny(ModelKind::kPairwise), 1);
    const auto y = g.forward(img, cond, mode);
    CHECK(y.shape() == Shape{n, 64, 64, 3});
    CHECK(y.value().data().cwiseAbs().maxCoeff() < 1.0f);
    TwoStackGenerator<float> t(ModelConfig::tiny(ModelKind::kTwoStack), 1);
    CHECK(t.forward(img, img, mode).shape() == Shape{n, 64, 64, 3});
    RecurrentGenerator<float> r(ModelConfig::tiny(ModelKind::kRecurrent), 1);
    const auto frames = r.forward(img, 4, mode);
    CHECK(frames.size() == 4);
    for (const auto& f : frames) CHECK(f.shape() == Shape{n, 64, 64, 3});
    Discriminator<float> d(ModelConfig::tiny(ModelKind::kConditionalDiscriminator), 1);
    const auto p = d.forward(img, cond, mode);
    CHECK(p.shape() == Shape{n, 1});
    CHECK(p.value().data().minCoeff() > 0.0f);
    CHECK(p.value().data().maxCoeff() < 1.0f);
  }
}

TEST_CASE("models reject malformed inputs") {
  PairwiseGenerator<float> g(ModelConfig::tiny(ModelKind::kPairwise), 1);
  Var<float> small(Tensor<float>({1, 32, 32, 3}));
  Var<float> img(Tensor<float>({1, 64, 64, 3}));
  const std::vector<int> idx{1};
  Var<float> cond(condition_batch<float>(idx));
  CHECK_THROWS_AS(g.forward(small, cond, Mode::kEval), InvalidArgument);
  CHECK_THROWS_AS(g.forward(img, Var<float>(Tensor<float>({1, 4})), Mode::kEval), InvalidArgument);
  RecurrentGenerator<float> r(ModelConfig::tiny(ModelKind::kRecurrent), 1);
  CHECK_THROWS_AS(r.forward(img, 3, Mode::kEval), InvalidArgument);
  Discriminator<float> d(ModelConfig::tiny(ModelKind::kDiscriminator), 1);
  CHECK_THROWS_AS(d.forward(img, cond, Mode::kEval), InvalidArgument);
  CHECK_THROWS_AS(PairwiseGenerator<float>(ModelConfig::tiny(ModelKind::kTwoStack), 1),
                  InvalidArgument);
}

TEST_CASE("initialization is a pure function of the seed") {
  const auto c = ModelConfig::tiny(ModelKind::kRecurrent);
  RecurrentGenerator<float> a(c, 7), b(c, 7), other(c, 8);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.named_parameters().size(); ++i) {
    CHECK(a.named_parameters()[i].name == b.named_parameters()[i].name);
    CHECK(a.named_parameters()[i].var.value() == b.named_parameters()[i].var.value());
    if (!(a.named_parameters()[i].var.value() == other.named_parameters()[i].var.value())) {
      any_differs = true;
    }
  }
  CHECK(any_differs);
}

TEST_CASE("weights start near N(0, 0.02)") {
  PairwiseGenerator<double> g(ModelConfig::scaled(ModelKind::kPairwise, 0.25), 3);
  const auto& w = g.encoder.bottleneck_weight.value().data();
  const double m = w.mean();
  const double sd = std::sqrt((w.array() - m).square().mean());
  CHECK(std::abs(m) < 1e-3);
  CHECK(sd == doctest::Approx(0.02).epsilon(0.01));
}

TEST_CASE("checkpoint round trip is byte identical and restores every value") {
  const auto c = ModelConfig::tiny(ModelKind::kPairwise);
  PairwiseGenerator<float> g(c, 5);
  std::mt19937_64 rng(32);
  // Populate running statistics with one train-mode pass.
  const std::vector<int> idx{0, 1};
  g.forward(Var<float>(test::random_tensor<float>({2, 64, 64, 3}, rng)),
            Var<float>(condition_batch<float>(idx)), Mode::kTrain);
  Checkpoint ckpt;
  ckpt.metadata["note"] = "unit";
  store_module(ckpt, "generator", g);
  const auto bytes = ckpt.to_bytes();
  const auto path = (std::filesystem::temp_directory_path() / "tlgen_unit.ckpt").string();
  ckpt.save(path);
  const Checkpoint loaded = Checkpoint::load(path);
  std::remove(path.c_str());
  CHECK(loaded.to_bytes() == bytes);
  CHECK(ModelConfig::parse(loaded.meta("generator.config")) == c);

  PairwiseGenerator<float> h(c, 99);
  restore_module(loaded, "generator", h);
  for (std::size_t i = 0; i < g.named_parameters().size(); ++i) {
    CHECK(g.named_parameters()[i].var.value() == h.named_parameters()[i].var.value());
  }
  auto gb = g.named_buffers();
  auto hb = h.named_buffers();
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(*gb[i].tensor == *hb[i].tensor);
  Checkpoint again;
  again.metadata["note"] = "unit";
  store_module(again, "generator", h);
  CHECK(again.to_bytes() == bytes);
}

TEST_CASE("checkpoint loading rejects corrupt or mismatched data") {
  PairwiseGenerator<float> g(ModelConfig::tiny(ModelKind::kPairwise), 5);
  Checkpoint ckpt;
  store_module(ckpt, "generator", g);
  auto bytes = ckpt.to_bytes();
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS(Checkpoint::from_bytes(truncated));
  auto bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  CHECK_THROWS(Checkpoint::from_bytes(bad_magic));
  TwoStackGenerator<float> t(ModelConfig::tiny(ModelKind::kTwoStack), 5);
  CHECK_THROWS_AS(restore_module(ckpt, "generator", t), InvalidArgument);
  CHECK_THROWS_AS(ckpt.at("missing"), InvalidArgument);
  CHECK_THROWS_AS(ckpt.at("generator/encoder.conv0.kernel").to<double>(), InvalidArgument);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/x.ckpt"), FileError);
}

TEST_CASE("adam state survives a checkpoint") {
  std::vector<Shape> shapes{{2, 3}, {4}};
  auto s = AdamState<double>::for_shapes(shapes);
  s.first_moment[0][1] = 0.25;
  s.second_moment[1][3] = 1e-3;
  s.step_count = 17;
  Checkpoint ckpt;
  store_adam(ckpt, "opt", s);
  auto r = AdamState<double>::for_shapes(shapes);
  restore_adam(Checkpoint::from_bytes(ckpt.to_bytes()), "opt", r);
  CHECK(r.step_count == 17);
  CHECK(r.first_moment[0] == s.first_moment[0]);
  CHECK(r.second_moment[1] == s.second_moment[1]);
}
