#include "tlgen/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "tlgen/config.hpp"
#include "tlgen/seed.hpp"

namespace tlgen {

std::string to_string(Task task) {
  switch (task) {
    case Task::kPairwise:
      return "pairwise";
    case Task::kTwoStack:
      return "twostack";
    case Task::kRecurrent:
      return "recurrent";
  }
  return "unknown";
}

Task parse_task(const std::string& text) {
  for (Task t : {Task::kPairwise, Task::kTwoStack, Task::kRecurrent}) {
    if (to_string(t) == text) return t;
  }
  throw ConfigError("unknown task '" + text + "'");
}

ModelKind generator_kind(Task task) {
  switch (task) {
    case Task::kPairwise:
      return ModelKind::kPairwise;
    case Task::kTwoStack:
      return ModelKind::kTwoStack;
    case Task::kRecurrent:
      return ModelKind::kRecurrent;
  }
  return ModelKind::kPairwise;
}

// ---------------------------------------------------------------------------
// TrainConfig

TrainConfig TrainConfig::paper(Task task, Regime regime) {
  TrainConfig c;
  c.task = task;
  c.regime = regime;
  switch (task) {
    case Task::kPairwise:
      c.iterations_scratch = 12500;
      c.iterations_pretrain = 5000;
      c.iterations_finetune = 5500;
      break;
    case Task::kTwoStack:
      c.iterations_scratch = 12500;
      c.iterations_pretrain = 4000;
      c.iterations_finetune = 6500;
      break;
    case Task::kRecurrent:
      c.iterations_scratch = 8500;
      c.iterations_pretrain = 5000;
      c.iterations_finetune = 5500;
      break;
  }
  return c;
}

TrainConfig TrainConfig::desk(Task task, Regime regime) {
  TrainConfig c = paper(task, regime);
  c.width = 0.25;
  c.scale_factor = 0.2;
  c.batch_size = 16;
  return c;
}

std::vector<Stage> TrainConfig::stages() const {
  auto scaled = [&](std::int64_t n) {
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(n) * scale_factor));
  };
  if (uses_pretraining(regime)) {
    return {{"pretrain", scaled(iterations_pretrain)}, {"finetune", scaled(iterations_finetune)}};
  }
  return {{"scratch", scaled(iterations_scratch)}};
}

std::int64_t TrainConfig::total_iterations() const {
  std::int64_t n = 0;
  for (const Stage& s : stages()) n += s.iterations;
  return n;
}

ModelConfig TrainConfig::generator_config() const {
  ModelConfig c = width == 1.0 ? ModelConfig::paper(generator_kind(task))
                               : ModelConfig::scaled(generator_kind(task), width);
  if (code_width > 0) c.code_width = code_width;
  return c;
}

ModelConfig TrainConfig::discriminator_config() const { return generator_config().discriminator(); }

LossConfig TrainConfig::loss_config() const { return LossConfig::for_regime(regime, lambda_adv); }

void TrainConfig::validate() const {
  if (regime == Regime::kPixelMse && task != Task::kPairwise) {
    throw ConfigError("regime p_mse is only defined for the pairwise task");
  }
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for batch normalization");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(lambda_adv >= 0.0)) throw ConfigError("lambda_adv must be >= 0");
  if (!(scale_factor > 0.0)) throw ConfigError("scale_factor must be positive");
  if (!(width > 0.0)) throw ConfigError("width must be positive");
  if (code_width < 0) throw ConfigError("code_width must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (uses_pretraining(regime)) {
    if (iterations_pretrain < 1 || iterations_finetune < 1) {
      throw ConfigError("regime " + to_string(regime) +
                        " needs positive iterations_pretrain and iterations_finetune");
    }
  } else if (iterations_scratch < 1) {
    throw ConfigError("regime " + to_string(regime) + " needs positive iterations_scratch");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "task = " << to_string(task) << "\n"
     << "regime = " << to_string(regime) << "\n"
     << "category = " << to_string(category) << "\n"
     << "iterations_scratch = " << iterations_scratch << "\n"
     << "iterations_pretrain = " << iterations_pretrain << "\n"
     << "iterations_finetune = " << iterations_finetune << "\n"
     << "batch_size = " << batch_size << "\n"
     << "lr = " << lr << "\n"
     << "lambda_adv = " << lambda_adv << "\n"
     << "seed = " << seed << "\n"
     << "scale_factor = " << scale_factor << "\n"
     << "width = " << width << "\n"
     << "code_width = " << code_width << "\n"
     << "augment = " << (augment ? 1 : 0) << "\n"
     << "checkpoint_every = " << checkpoint_every << "\n";
  return os.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  const KeyValueConfig kv = KeyValueConfig::parse(text);
  TrainConfig c = paper(parse_task(kv.get("task")), parse_regime(kv.get("regime")));
  c.category = kv.has("category") ? parse_category(kv.get("category")) : c.category;
  c.iterations_scratch = kv.get_or("iterations_scratch", c.iterations_scratch);
  c.iterations_pretrain = kv.get_or("iterations_pretrain", c.iterations_pretrain);
  c.iterations_finetune = kv.get_or("iterations_finetune", c.iterations_finetune);
  c.batch_size = kv.get_or("batch_size", c.batch_size);
  c.lr = kv.get_or("lr", c.lr);
  c.lambda_adv = kv.get_or("lambda_adv", c.lambda_adv);
  c.seed = kv.get_or("seed", c.seed);
  c.scale_factor = kv.get_or("scale_factor", c.scale_factor);
  c.width = kv.get_or("width", c.width);
  c.code_width = kv.get_or("code_width", c.code_width);
  c.augment = kv.get_or("augment", 1) != 0;
  c.checkpoint_every = kv.get_or("checkpoint_every", c.checkpoint_every);
  kv.require_all_used();
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  return parse(KeyValueConfig::load(path).to_text());
}

// ---------------------------------------------------------------------------
// Batches

Batch make_batch(const TrainConfig& config, const TrainingData& data, const std::string& phase,
                 std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(config.batch_size);
  // Per sample: input, [second], targets...
  std::vector<std::vector<Frame>> samples(n);
  std::vector<int> conditions(n, 0);
  std::vector<std::string> ids(n);
  auto frame = [&](std::size_t video, std::size_t index, std::size_t sample) -> const Frame& {
    const Video& v = data.videos[video];
    if (data.held_out_ids.count(v.id)) {
      throw std::logic_error("held-out video '" + v.id + "' reached the training sampler");
    }
    ids[sample] = v.id;
    return v.frames[index];
  };

  if (phase == "pretrain") {
    if (data.corpus.empty()) throw InvalidArgument("reconstruction corpus is empty");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.corpus.size() - 1);
    const std::size_t copies = config.task == Task::kRecurrent  ? 5
                               : config.task == Task::kTwoStack ? 3
                                                                : 2;
    for (auto& s : samples) s.assign(copies, data.corpus[pick(rng)]);
  } else {
    switch (config.task) {
      case Task::kPairwise: {
        const auto pairs = sample_pairs(data.videos, n, seed);
        for (std::size_t i = 0; i < n; ++i) {
          samples[i] = {frame(pairs[i].video, pairs[i].input, i),
                        frame(pairs[i].video, pairs[i].target, i)};
          conditions[i] = pairs[i].condition;
        }
        break;
      }
      case Task::kTwoStack: {
        const auto triples = sample_triples(data.videos, n, seed);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& t = triples[i];
          samples[i] = {frame(t.video, t.first, i), frame(t.video, t.second, i),
                        frame(t.video, t.target, i)};
        }
        break;
      }
      case Task::kRecurrent: {
        const auto groups = sample_groups(data.videos, n, seed);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& g = groups[i];
          samples[i] = {frame(g.video, g.input, i)};
          for (std::size_t t : g.targets) samples[i].push_back(frame(g.video, t, i));
        }
        break;
      }
    }
  }
  if (config.augment) {
    for (std::size_t i = 0; i < n; ++i) augment(samples[i], derive_seed(seed, {i}));
  }

  auto column = [&](std::size_t k) {
    std::vector<const Frame*> frames;
    for (const auto& s : samples) frames.push_back(&s[k]);
    return stack_frames(frames);
  };
  Batch b;
  b.input = column(0);
  std::size_t next = 1;
  if (config.task == Task::kTwoStack) b.second = column(next++);
  for (; next < samples.front().size(); ++next) b.targets.push_back(column(next));
  if (config.task == Task::kPairwise) {
    b.condition = condition_batch<float>(conditions);
    b.condition_index = conditions;
  }
  b.video_ids = std::move(ids);
  return b;
}

Tensor<float> stacked_targets(const Batch& batch) {
  if (batch.targets.size() == 1) return batch.targets.front();
  std::vector<const Frame*> frames;
  std::vector<Frame> singles;
  const Index n = batch.targets.front().dim(0);
  for (const auto& t : batch.targets) {
    for (Index i = 0; i < n; ++i) singles.push_back(batch_frame(t, i));
  }
  for (const auto& f : singles) frames.push_back(&f);
  return stack_frames(frames);
}

// ---------------------------------------------------------------------------
// One adversarial step

StepLosses gan_step(Generator<float>& g, Discriminator<float>* d, Adam<float>& g_opt,
                    Adam<float>* d_opt, const LossConfig& loss, const Batch& batch) {
  if (loss.adversarial && (d == nullptr || d_opt == nullptr)) {
    throw InvalidArgument("gan_step: adversarial loss needs a discriminator");
  }
  g_opt.zero_grad();
  if (d_opt) d_opt->zero_grad();

  GeneratorInput<float> input;
  input.image = Var<float>(batch.input);
  if (!batch.second.empty()) input.second_image = Var<float>(batch.second);
  if (!batch.condition.empty()) input.condition = Var<float>(batch.condition);
  std::vector<Var<float>> outputs = g.generate(input, Mode::kTrain);
  Var<float> fake = outputs.size() == 1 ? outputs.front() : concat(outputs, 0);
  Var<float> real(stacked_targets(batch));

  StepLosses s;
  std::optional<Var<float>> d_fake_for_g;
  if (loss.adversarial) {
    std::optional<Var<float>> cond;
    if (d->config().conditional()) cond = input.condition;
    Var<float> d_real = d->forward(real, cond, Mode::kTrain);
    Var<float> d_fake = d->forward(detach(fake), cond, Mode::kTrain);
    Var<float> ld = d_loss(d_real, d_fake);
    backward(ld);
    d_opt->step();
    s.discriminator = ld.item();
    d_fake_for_g = d->forward(fake, cond, Mode::kTrain);
  }
  GeneratorLoss<float> gl = generator_loss(loss, real, fake, d_fake_for_g);
  backward(gl.total);
  g_opt.step();
  if (d_opt) d_opt->zero_grad();  // drop the adversarial term's gradient into D
  s.pixel = gl.pixel;
  s.gradient = gl.gradient;
  s.adversarial = gl.adversarial;
  s.generator = gl.total.item();
  return s;
}

// ---------------------------------------------------------------------------
// Log

std::string TrainLog::format(const LogEntry& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "iter=%lld phase=%s L_pmse=%.6g L_gmse=%.6g L_adv=%.6g L_G=%.6g L_D=%.6g "
                "time=%.3f",
                static_cast<long long>(e.iteration), e.phase.c_str(), e.losses.pixel,
                e.losses.gradient, e.losses.adversarial, e.losses.generator, e.losses.discriminator,
                e.seconds);
  return buf;
}

std::string TrainLog::to_text() const {
  std::ostringstream os;
  std::size_t c = 0;
  for (const auto& e : entries) {
    os << format(e) << "\n";
    while (c < checkpoints.size() && checkpoints[c].first == e.iteration) {
      os << "checkpoint iter=" << checkpoints[c].first << " path=" << checkpoints[c].second << "\n";
      ++c;
    }
  }
  for (; c < checkpoints.size(); ++c) {
    os << "checkpoint iter=" << checkpoints[c].first << " path=" << checkpoints[c].second << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig config, TrainingData data)
    : config_(std::move(config)), data_(std::move(data)) {
  config_.validate();
  stages_ = config_.stages();
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  for (const Stage& s : stages_) {
    if (s.phase == "pretrain") {
      if (data_.corpus.empty()) throw InvalidArgument("reconstruction corpus is empty");
      if (data_.corpus.size() < batch) {
        throw InvalidArgument("reconstruction corpus of " + std::to_string(data_.corpus.size()) +
                              " images is smaller than batch size " + std::to_string(batch));
      }
    } else {
      std::size_t labelled = 0;
      for (const Video& v : data_.videos) {
        for (const auto& d : v.degrees) labelled += d.has_value();
      }
      if (labelled < batch) {
        throw InvalidArgument("dataset of " + std::to_string(labelled) +
                              " labelled frames is too small for batch size " +
                              std::to_string(batch));
      }
    }
  }
  AdamOptions opts;
  opts.learning_rate = config_.lr;
  g_ = make_generator<float>(config_.generator_config(), derive_seed(config_.seed, {1}));
  g_opt_ = Adam<float>(g_->parameters(), opts);
  if (config_.loss_config().adversarial) {
    d_ = std::make_unique<Discriminator<float>>(config_.discriminator_config(),
                                                derive_seed(config_.seed, {2}));
    d_opt_ = Adam<float>(d_->parameters(), opts);
  }
  enter_stage(0);
}

void Trainer::enter_stage(std::size_t stage) {
  stage_ = stage;
  stage_iteration_ = 0;
  if (finished()) return;
  // Fresh optimizer moments at every stage boundary.
  g_opt_.reset();
  if (d_) d_opt_.reset();
}

bool Trainer::finished() const { return stage_ >= stages_.size(); }

const std::string& Trainer::phase() const {
  return stages_[std::min(stage_, stages_.size() - 1)].phase;
}

StepLosses Trainer::step() {
  if (finished()) throw std::logic_error("Trainer::step: schedule already complete");
  const Stage& stage = stages_[stage_];
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed =
      derive_seed(config_.seed, {3, stage_, static_cast<std::uint64_t>(stage_iteration_)});
  const Batch batch = make_batch(config_, data_, stage.phase, seed);
  StepLosses losses;
  try {
    losses = gan_step(*g_, d_.get(), g_opt_, d_ ? &d_opt_ : nullptr, config_.loss_config(), batch);
  } catch (const NumericError&) {
    if (!output_dir_.empty()) save_checkpoint("diagnostic.ckpt");
    throw;
  }
  ++stage_iteration_;
  ++iteration_;
  LogEntry entry{iteration_, stage.phase, losses,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
  log_.entries.push_back(entry);
  if (stage_iteration_ == stage.iterations) enter_stage(stage_ + 1);
  if (!output_dir_.empty()) {
    if (config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%08lld.bin", static_cast<long long>(iteration_));
      save_checkpoint(name);
    }
  }
  return losses;
}

void Trainer::run(std::int64_t max_steps, const std::function<void(const LogEntry&)>& on_step) {
  for (std::int64_t n = 0; !finished() && (max_steps < 0 || n < max_steps); ++n) {
    step();
    if (on_step) on_step(log_.entries.back());
  }
}

void Trainer::save_checkpoint(const std::string& name) {
  std::filesystem::create_directories(output_dir_);
  const std::string path = (std::filesystem::path(output_dir_) / name).string();
  checkpoint().save(path);
  log_.checkpoints.emplace_back(iteration_, path);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.metadata["format"] = "tlgen-train";
  c.metadata["train.config"] = config_.to_text();
  c.metadata["train.stage"] = std::to_string(stage_);
  c.metadata["train.stage_iteration"] = std::to_string(stage_iteration_);
  c.metadata["train.iteration"] = std::to_string(iteration_);
  c.metadata["train.phase"] = phase();
  store_module(c, "generator", *g_);
  store_adam(c, "generator.adam", g_opt_.state());
  if (d_) {
    store_module(c, "discriminator", *d_);
    store_adam(c, "discriminator.adam", d_opt_.state());
  }
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (TrainConfig::parse(ckpt.meta("train.config")).to_text() != config_.to_text()) {
    throw ConfigError("checkpoint was written with a different training config");
  }
  restore_module(ckpt, "generator", *g_);
  restore_adam(ckpt, "generator.adam", g_opt_.state());
  if (d_) {
    restore_module(ckpt, "discriminator", *d_);
    restore_adam(ckpt, "discriminator.adam", d_opt_.state());
  }
  stage_ = std::stoull(ckpt.meta("train.stage"));
  stage_iteration_ = std::stoll(ckpt.meta("train.stage_iteration"));
  iteration_ = std::stoll(ckpt.meta("train.iteration"));
  log_ = {};
}

std::unique_ptr<Generator<float>> load_generator(const Checkpoint& ckpt) {
  auto g = make_generator<float>(ModelConfig::parse(ckpt.meta("generator.config")), 0);
  restore_module(ckpt, "generator", *g);
  return g;
}

}  // namespace tlgen
