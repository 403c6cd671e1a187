#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tlgen/adam.hpp"
#include "tlgen/checkpoint.hpp"
#include "tlgen/dataset.hpp"
#include "tlgen/losses.hpp"
#include "tlgen/models.hpp"

namespace tlgen {

enum class Task { kPairwise, kTwoStack, kRecurrent };

std::string to_string(Task task);
Task parse_task(const std::string& text);
ModelKind generator_kind(Task task);

struct Stage {
  std::string phase;  // "scratch", "pretrain" or "finetune"
  std::int64_t iterations = 0;
};

struct TrainConfig {
  Task task = Task::kPairwise;
  Regime regime = Regime::kPixelGradMseAdvFinetune;
  Category category = Category::kBloom;
  // Unscaled schedule; stages() applies scale_factor.
  std::int64_t iterations_scratch = 12500;
  std::int64_t iterations_pretrain = 5000;
  std::int64_t iterations_finetune = 5500;
  int batch_size = 64;
  double lr = 2e-4;
  double lambda_adv = 0.2;
  std::uint64_t seed = 0;
  double scale_factor = 1.0;  // multiplies every iteration count
  double width = 1.0;         // channel width multiplier, 1 = full size
  Index code_width = 0;       // 0 keeps the architecture default
  bool augment = true;
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  /// Full-size schedule for a task.
  static TrainConfig paper(Task task, Regime regime);
  /// Width 0.25, iteration scale 0.2, batch 16.
  static TrainConfig desk(Task task, Regime regime);

  std::vector<Stage> stages() const;
  std::int64_t total_iterations() const;
  ModelConfig generator_config() const;
  ModelConfig discriminator_config() const;
  LossConfig loss_config() const;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
  std::string to_text() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::string& path);
};

struct TrainingData {
  std::vector<Video> videos;           // training split only
  std::vector<Frame> corpus;           // static images for the reconstruction stage
  std::set<std::string> held_out_ids;  // ids that must never reach a batch
};

/// One minibatch laid out for the task.
struct Batch {
  Tensor<float> input;      // [N,64,64,3]
  Tensor<float> second;     // two-stack frame at t+m, else empty
  Tensor<float> condition;  // [N,4] one-hot for pairwise, else empty
  std::vector<int> condition_index;
  std::vector<Tensor<float>> targets;  // one per generated step
  std::vector<std::string> video_ids;  // source of each sample; empty for corpus
};

/// Deterministic batch for (phase, seed). Throws std::logic_error when a held
/// out video would be consumed.
Batch make_batch(const TrainConfig& config, const TrainingData& data, const std::string& phase,
                 std::uint64_t seed);

struct StepLosses {
  double pixel = 0, gradient = 0, adversarial = 0, generator = 0, discriminator = 0;
};

/// Targets of every step stacked on the batch axis.
Tensor<float> stacked_targets(const Batch& batch);

/// One discriminator update on real targets against detached generator
/// outputs, then one generator update. Non-adversarial configs skip the
/// discriminator entirely (`d` and `d_opt` may be null).
StepLosses gan_step(Generator<float>& g, Discriminator<float>* d, Adam<float>& g_opt,
                    Adam<float>* d_opt, const LossConfig& loss, const Batch& batch);

struct LogEntry {
  std::int64_t iteration = 0;
  std::string phase;
  StepLosses losses;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<LogEntry> entries;
  std::vector<std::pair<std::int64_t, std::string>> checkpoints;

  static std::string format(const LogEntry& entry);
  std::string to_text() const;
};

class Trainer {
 public:
  /// Throws InvalidArgument when the data cannot fill a batch.
  Trainer(TrainConfig config, TrainingData data);

  /// Runs until the schedule ends or `max_steps` more steps were taken
  /// (negative = no limit).
  void run(std::int64_t max_steps = -1,
           const std::function<void(const LogEntry&)>& on_step = nullptr);
  StepLosses step();
  bool finished() const;

  /// Where periodic and diagnostic checkpoints go; empty disables them.
  void set_output_dir(std::string dir) { output_dir_ = std::move(dir); }

  Checkpoint checkpoint() const;
  /// Restores a checkpoint written by a trainer with the same config.
  void restore(const Checkpoint& ckpt);

  const TrainConfig& config() const { return config_; }
  const TrainLog& log() const { return log_; }
  std::int64_t iteration() const { return iteration_; }
  const std::string& phase() const;
  Generator<float>& generator() { return *g_; }
  Discriminator<float>* discriminator() { return d_.get(); }

 private:
  void enter_stage(std::size_t stage);
  void save_checkpoint(const std::string& name);

  TrainConfig config_;
  TrainingData data_;
  std::vector<Stage> stages_;
  std::unique_ptr<Generator<float>> g_;
  std::unique_ptr<Discriminator<float>> d_;
  Adam<float> g_opt_, d_opt_;
  std::size_t stage_ = 0;
  std::int64_t stage_iteration_ = 0;
  std::int64_t iteration_ = 0;  // global, across stages
  TrainLog log_;
  std::string output_dir_;
};

/// Rebuilds the generator stored in a checkpoint (eval mode use).
std::unique_ptr<Generator<float>> load_generator(const Checkpoint& ckpt);

}  // namespace tlgen
