#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tlgen/pipeline.hpp"
#include "tlgen/training.hpp"

using namespace tlgen;

namespace {

// Small enough to run a handful of steps in well under a second.
TrainConfig tiny_config(Task task, Regime regime) {
  TrainConfig c = TrainConfig::desk(task, regime);
  c.width = 0.0625;
  c.code_width = 16;
  c.batch_size = 2;
  c.iterations_scratch = 6;
  c.iterations_pretrain = 3;
  c.iterations_finetune = 3;
  c.scale_factor = 1.0;
  c.seed = 21;
  return c;
}

TrainingData tiny_data(const TrainConfig& c) {
  std::vector<Video> videos;
  for (int i = 0; i < 3; ++i) videos.push_back(synth_video(c.category, 200 + i, 21));
  return make_training_data(c, split_for_training(videos, c.category, 0.67, c.seed), 8);
}

}  // namespace

TEST_CASE("full-size schedules and desk scaling") {
  const auto p = TrainConfig::paper(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  const auto stages = p.stages();
  REQUIRE(stages.size() == 2);
  CHECK(stages[0].phase == "pretrain");
  CHECK(stages[0].iterations == 5000);
  CHECK(stages[1].iterations == 5500);
  CHECK(TrainConfig::paper(Task::kPairwise, Regime::kPixelMse).total_iterations() == 12500);
  const auto t = TrainConfig::paper(Task::kTwoStack, Regime::kPixelGradMseAdvFinetune).stages();
  CHECK(t[0].iterations == 4000);
  CHECK(t[1].iterations == 6500);
  CHECK(TrainConfig::paper(Task::kRecurrent, Regime::kPixelGradMseAdv).total_iterations() == 8500);

  const auto d = TrainConfig::desk(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  CHECK(d.batch_size == 16);
  CHECK(d.width == 0.25);
  const auto ds = d.stages();
  CHECK(ds[0].iterations == 1000);
  CHECK(ds[1].iterations == 1100);
  CHECK(static_cast<double>(ds[0].iterations) / static_cast<double>(ds[1].iterations) ==
        doctest::Approx(5000.0 / 5500.0));
  CHECK(p.lr == 2e-4);
  CHECK(p.lambda_adv == 0.2);
  CHECK(p.batch_size == 64);
}

TEST_CASE("train config text round trip and validation") {
  TrainConfig c = tiny_config(Task::kTwoStack, Regime::kPixelGradMseAdv);
  c.lr = 1.2345678901234e-4;
  c.augment = false;
  CHECK(TrainConfig::parse(c.to_text()).to_text() == c.to_text());
  CHECK_THROWS_AS(TrainConfig::parse(c.to_text() + "bogus = 1\n"), InvalidArgument);
  TrainConfig bad = c;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.regime = Regime::kPixelMse;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(parse_task("triple"), ConfigError);
}

TEST_CASE("batches are laid out per task and deterministic") {
  for (Task task : {Task::kPairwise, Task::kTwoStack, Task::kRecurrent}) {
    const TrainConfig c = tiny_config(task, Regime::kPixelGradMseAdvFinetune);
    const TrainingData data = tiny_data(c);
    for (const char* phase : {"pretrain", "finetune"}) {
      const Batch a = make_batch(c, data, phase, 5);
      const Batch b = make_batch(c, data, phase, 5);
      CHECK(a.input == b.input);
      CHECK(a.input.shape() == Shape{2, 64, 64, 3});
      CHECK(a.targets.size() == (task == Task::kRecurrent ? 4u : 1u));
      CHECK(a.second.empty() == (task != Task::kTwoStack));
      CHECK(a.condition.empty() == (task != Task::kPairwise));
      if (std::string(phase) == "pretrain") {
        // Reconstruction: every target and the second input equal the input.
        for (const auto& t : a.targets) CHECK(t == a.input);
        if (task == Task::kTwoStack) CHECK(a.second == a.input);
        if (task == Task::kPairwise) {
          for (int k : a.condition_index) CHECK(k == 0);
        }
        for (const auto& id : a.video_ids) CHECK(id.empty());
      }
    }
  }
}

TEST_CASE("trainer rejects data that cannot fill a batch") {
  TrainConfig c = tiny_config(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  TrainingData empty;
  CHECK_THROWS_AS(Trainer(c, empty), InvalidArgument);
  TrainingData data = tiny_data(c);
  data.corpus.resize(1);
  CHECK_THROWS_AS(Trainer(c, data), InvalidArgument);
}

TEST_CASE("training runs both stages and logs every step") {
  const TrainConfig c = tiny_config(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  Trainer t(c, tiny_data(c));
  std::vector<std::string> phases;
  t.run(-1, [&](const LogEntry& e) { phases.push_back(e.phase); });
  CHECK(t.finished());
  CHECK(phases == std::vector<std::string>{"pretrain", "pretrain", "pretrain", "finetune",
                                           "finetune", "finetune"});
  for (const auto& e : t.log().entries) {
    CHECK(std::isfinite(e.losses.generator));
    CHECK(std::isfinite(e.losses.discriminator));
    CHECK(e.losses.gradient > 0.0);
  }
  CHECK(t.log().to_text().find("phase=finetune") != std::string::npos);
}

TEST_CASE("replay from the same seed is bitwise identical") {
  const TrainConfig c = tiny_config(Task::kRecurrent, Regime::kPixelGradMseAdv);
  Trainer a(c, tiny_data(c)), b(c, tiny_data(c));
  a.run();
  b.run();
  CHECK(a.checkpoint().to_bytes() == b.checkpoint().to_bytes());
  CHECK(a.log().entries.back().losses.generator == b.log().entries.back().losses.generator);
}

TEST_CASE("resume continues exactly where the run stopped") {
  for (Regime r : {Regime::kPixelMseAdv, Regime::kPixelGradMseAdvFinetune}) {
    const TrainConfig c = tiny_config(Task::kPairwise, r);
    Trainer full(c, tiny_data(c));
    full.run();
    Trainer first(c, tiny_data(c));
    first.run(2);  // stops inside the first stage
    CHECK_FALSE(first.finished());
    const auto bytes = first.checkpoint().to_bytes();
    Trainer resumed(c, tiny_data(c));
    resumed.restore(Checkpoint::from_bytes(bytes));
    CHECK(resumed.iteration() == 2);
    resumed.run();
    CHECK(resumed.finished());
    CHECK(resumed.checkpoint().to_bytes() == full.checkpoint().to_bytes());
  }
}

TEST_CASE("restore refuses a checkpoint from a different config") {
  const TrainConfig c = tiny_config(Task::kPairwise, Regime::kPixelMse);
  Trainer t(c, tiny_data(c));
  TrainConfig other = c;
  other.lr = 1e-3;
  Trainer u(other, tiny_data(other));
  CHECK_THROWS_AS(u.restore(t.checkpoint()), ConfigError);
}

TEST_CASE("checkpoints load back into a generator and evaluate") {
  const TrainConfig c = tiny_config(Task::kPairwise, Regime::kPixelMse);
  Trainer t(c, tiny_data(c));
  t.run(2);
  const Checkpoint ckpt = t.checkpoint();
  CHECK(checkpoint_task(ckpt) == Task::kPairwise);
  auto g = load_generator(ckpt);
  const auto& a = g->named_parameters();
  const auto& b = t.generator().named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].var.value() == b[i].var.value());
  std::vector<Video> videos{synth_video(Category::kBloom, 300, 21)};
  EvalOptions options;
  options.count = 4;
  const EvalReport report = evaluate_checkpoint(ckpt, videos, options);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].regime == "p_mse");
  CHECK(report.top1.has_value());
}
