#include "tlgen/pipeline.hpp"

#include <map>
#include <sstream>

#include "tlgen/seed.hpp"

namespace tlgen {

VideoSplit split_for_training(std::span<const Video> videos, Category category, double ratio,
                              std::uint64_t seed) {
  std::vector<Video> pool;
  for (const Video& v : videos) {
    if (v.category == category) pool.push_back(v);
  }
  if (pool.size() < 2) {
    throw InvalidArgument("need at least 2 " + to_string(category) + " videos to split, found " +
                          std::to_string(pool.size()));
  }
  return split_videos(std::move(pool), ratio, derive_seed(seed, {4}));
}

std::uint64_t corpus_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {5}); }

TrainingData make_training_data(const TrainConfig& config, const VideoSplit& split,
                                std::size_t corpus_size) {
  TrainingData data;
  data.videos = split.train;
  for (const Video& v : split.test) data.held_out_ids.insert(v.id);
  if (uses_pretraining(config.regime)) {
    data.corpus = make_reconstruction_corpus(corpus_size, corpus_seed(config.seed));
  }
  return data;
}

std::string split_to_text(const VideoSplit& split) {
  std::ostringstream os;
  for (const Video& v : split.train) os << "train " << v.id << "\n";
  for (const Video& v : split.test) os << "test " << v.id << "\n";
  return os.str();
}

VideoSplit split_from_text(const std::string& text, std::span<const Video> videos) {
  std::map<std::string, const Video*> by_id;
  for (const Video& v : videos) by_id[v.id] = &v;
  VideoSplit split;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string side, id, extra;
    if (!(fields >> side >> id) || (fields >> extra) || (side != "train" && side != "test")) {
      throw InvalidArgument("split line " + std::to_string(line_no) +
                            ": expected 'train|test <id>'");
    }
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("split names unknown video '" + id + "'");
    (side == "train" ? split.train : split.test).push_back(*it->second);
  }
  return split;
}

TrainArtifacts train_artifacts(const std::string& directory) {
  const std::string d = directory.empty() ? std::string(".") : directory;
  return {d + "/train_config.txt", d + "/split.txt", d + "/train_log.txt", d + "/final.ckpt"};
}

Task checkpoint_task(const Checkpoint& ckpt) {
  switch (ModelConfig::parse(ckpt.meta("generator.config")).kind) {
    case ModelKind::kPairwise:
      return Task::kPairwise;
    case ModelKind::kTwoStack:
      return Task::kTwoStack;
    case ModelKind::kRecurrent:
      return Task::kRecurrent;
    default:
      break;
  }
  throw InvalidArgument("checkpoint does not hold a generator");
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, std::span<const Video> videos,
                               const EvalOptions& options) {
  const Task task = checkpoint_task(ckpt);
  auto g = load_generator(ckpt);
  const auto cases = make_eval_cases(task, videos, options.count, options.seed, options.condition,
                                     options.interval);
  EvalReport report;
  MetricRow row = evaluate_reconstruction(*g, videos, cases);
  row.task = to_string(task);
  if (ckpt.metadata.count("train.config")) {
    const TrainConfig config = TrainConfig::parse(ckpt.meta("train.config"));
    row.regime = to_string(config.regime);
    row.category = to_string(config.category);
  }
  report.rows.push_back(std::move(row));
  if (options.retrieval && task == Task::kPairwise) {
    const RetrievalResult r = retrieval_experiment(*g, videos, cases, options.window);
    report.top1 = r.top1;
    report.top5 = r.top5;
  }
  return report;
}

}  // namespace tlgen
