#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlgen/dataset.hpp"
#include "tlgen/evaluation.hpp"
#include "tlgen/training.hpp"

namespace tlgen {

inline constexpr double kDefaultSplitRatio = 0.8;
inline constexpr std::size_t kDefaultCorpusSize = 500;

/// Videos of `category` split into train and test with a stream of `seed`.
VideoSplit split_for_training(std::span<const Video> videos, Category category, double ratio,
                              std::uint64_t seed);

/// Train split, held-out ids and (for pre-training regimes) the corpus.
TrainingData make_training_data(const TrainConfig& config, const VideoSplit& split,
                                std::size_t corpus_size);

/// Stream seed of the reconstruction corpus for a run seed.
std::uint64_t corpus_seed(std::uint64_t run_seed);

/// "train <id>" / "test <id>" lines.
std::string split_to_text(const VideoSplit& split);
/// Reassembles a split from its text and the videos it names. Throws
/// InvalidArgument for unknown ids or malformed lines.
VideoSplit split_from_text(const std::string& text, std::span<const Video> videos);

/// Everything `train` writes: config, split, log and final checkpoint.
struct TrainArtifacts {
  std::string config_path, split_path, log_path, checkpoint_path;
};

/// File names inside a run directory.
TrainArtifacts train_artifacts(const std::string& directory);

/// Eval cases for a trained generator: `count` draws over the videos.
struct EvalOptions {
  std::size_t count = 64;
  std::uint64_t seed = 0;
  std::optional<int> condition;
  std::optional<double> interval;
  double window = 0.2;
  bool retrieval = true;
};

/// Reconstruction metrics and, for pairwise models, retrieval accuracy.
EvalReport evaluate_checkpoint(const Checkpoint& ckpt, std::span<const Video> videos,
                               const EvalOptions& options);

/// Task stored in a training checkpoint.
Task checkpoint_task(const Checkpoint& ckpt);

}  // namespace tlgen
