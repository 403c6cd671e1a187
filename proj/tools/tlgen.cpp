// tlgen: command-line front end for dataset synthesis, training, generation
// and evaluation.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tlgen/checkpoint.hpp"
#include "tlgen/dataset.hpp"
#include "tlgen/evaluation.hpp"
#include "tlgen/grad_suite.hpp"
#include "tlgen/image.hpp"
#include "tlgen/pipeline.hpp"
#include "tlgen/seed.hpp"
#include "tlgen/training.hpp"

namespace fs = std::filesystem;
using namespace tlgen;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kMissingFile = 3,
  kConfig = 4,
  kNumeric = 5,
  kInvalidInput = 6,
  kCheckFailed = 7,
};

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kOutputRootEnv = "TLGEN_OUTPUT_ROOT";

std::string output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? std::string(env) : std::string("tlgen_out");
}

// Explicit --out wins; otherwise <root>/<command>.
std::string resolve_out(const std::string& out, const std::string& command) {
  return out.empty() ? (fs::path(output_root()) / command).string() : out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FileError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path);
  out << text;
  if (!out) throw FileError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string quote(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        out += c;
    }
  }
  return out;
}

int fail(int code, const char* name, const std::string& message) {
  std::cerr << "error code=" << name << " message=\"" << quote(message) << "\"\n";
  return code;
}

// Test videos for evaluation-style commands: the split's test side when a
// split file is given, otherwise every video of the category.
std::vector<Video> evaluation_videos(const std::string& manifest, const std::string& split_path,
                                     const std::string& category) {
  std::vector<Video> all = load_dataset(manifest);
  if (!split_path.empty()) return split_from_text(read_text(split_path), all).test;
  if (category == "all") return all;
  const Category c = parse_category(category);
  std::vector<Video> out;
  for (Video& v : all) {
    if (v.category == c) out.push_back(std::move(v));
  }
  if (out.empty()) throw InvalidArgument("no " + category + " videos in " + manifest);
  return out;
}

std::string checkpoint_category(const Checkpoint& ckpt) {
  if (ckpt.metadata.count("train.config")) {
    return to_string(TrainConfig::parse(ckpt.meta("train.config")).category);
  }
  return "all";
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string category = "all";
  int count = 10;
  int frames = kDefaultFrameCount;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  if (a.count < 1) throw InvalidArgument("--count must be >= 1");
  std::vector<Category> categories;
  if (a.category == "all") {
    categories.assign(kAllCategories.begin(), kAllCategories.end());
  } else {
    categories.push_back(parse_category(a.category));
  }
  std::vector<Video> videos;
  for (Category c : categories) {
    for (int i = 0; i < a.count; ++i) {
      const std::uint64_t s =
          derive_seed(a.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      videos.push_back(synth_video(c, s, a.frames));
    }
  }
  const std::string dir = resolve_out(a.out, "synth");
  ensure_dir(dir);
  write_dataset(dir, videos);
  std::cout << "wrote " << videos.size() << " videos to " << dir << "/manifest.txt\n";
  std::cout << format_stats(dataset_stats(videos));
  return kOk;
}

// --- annotate ------------------------------------------------------------------

struct AnnotateArgs {
  std::string annotations;
  int frames = kDefaultFrameCount;
  std::string out;
};

int run_annotate(const AnnotateArgs& a) {
  const auto file = DegreeAnnotationFile::load(a.annotations);
  const auto anchors = aggregate_annotations(file);
  const auto degrees = interpolate_degrees(anchors, a.frames);
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    os << i << ' ';
    if (degrees[i]) {
      os << *degrees[i];
    } else {
      os << '-';
    }
    os << '\n';
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << os.str();
  } else {
    write_text(a.out, os.str());
    std::cerr << "anchors";
    for (const Anchor& an : anchors) std::cerr << ' ' << an.frame_index << ':' << an.degree;
    std::cerr << "\nwrote " << a.out << "\n";
  }
  return kOk;
}

// --- stats -----------------------------------------------------------------------

int run_stats(const std::string& manifest) {
  std::cout << format_stats(dataset_stats(load_dataset(manifest)));
  return kOk;
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string config_file;
  std::string task = "pairwise";
  std::string regime = "p_g_mse+adv+ft";
  std::string category = "bloom";
  std::string preset = "desk";
  std::optional<double> scale, width, lr, lambda;
  std::optional<int> batch;
  std::optional<std::int64_t> it_scratch, it_pretrain, it_finetune, checkpoint_every;
  std::optional<Index> code_width;
  bool no_augment = false;
  std::uint64_t seed = 0;
  double split_ratio = kDefaultSplitRatio;
  std::size_t corpus_size = kDefaultCorpusSize;
  std::string resume;
  std::int64_t max_steps = -1;
  int log_every = 50;
  std::string out;
};

TrainConfig build_config(const TrainArgs& a) {
  if (!a.config_file.empty()) return TrainConfig::load(a.config_file);
  const Task task = parse_task(a.task);
  const Regime regime = parse_regime(a.regime);
  TrainConfig c;
  if (a.preset == "desk") {
    c = TrainConfig::desk(task, regime);
  } else if (a.preset == "paper") {
    c = TrainConfig::paper(task, regime);
  } else {
    throw ConfigError("unknown preset '" + a.preset + "' (expected desk or paper)");
  }
  c.category = parse_category(a.category);
  c.seed = a.seed;
  if (a.scale) c.scale_factor = *a.scale;
  if (a.width) c.width = *a.width;
  if (a.lr) c.lr = *a.lr;
  if (a.lambda) c.lambda_adv = *a.lambda;
  if (a.batch) c.batch_size = *a.batch;
  if (a.it_scratch) c.iterations_scratch = *a.it_scratch;
  if (a.it_pretrain) c.iterations_pretrain = *a.it_pretrain;
  if (a.it_finetune) c.iterations_finetune = *a.it_finetune;
  if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
  if (a.code_width) c.code_width = *a.code_width;
  if (a.no_augment) c.augment = false;
  c.validate();
  return c;
}

int run_train(const TrainArgs& a) {
  const TrainConfig config = build_config(a);
  const std::vector<Video> videos = load_dataset(a.manifest);
  const VideoSplit split = split_for_training(videos, config.category, a.split_ratio, config.seed);

  const std::string dir = resolve_out(a.out, "train");
  ensure_dir(dir);
  const TrainArtifacts files = train_artifacts(dir);
  write_text(files.config_path, config.to_text());
  write_text(files.split_path, split_to_text(split));

  Trainer trainer(config, make_training_data(config, split, a.corpus_size));
  trainer.set_output_dir(dir);
  if (!a.resume.empty()) trainer.restore(Checkpoint::load(a.resume));

  std::cout << "train task=" << to_string(config.task) << " regime=" << to_string(config.regime)
            << " category=" << to_string(config.category)
            << " iterations=" << config.total_iterations() << " train_videos=" << split.train.size()
            << " test_videos=" << split.test.size() << "\n";
  trainer.run(a.max_steps, [&](const LogEntry& e) {
    if (a.log_every > 0 && (e.iteration % a.log_every == 0 || trainer.finished())) {
      std::cout << TrainLog::format(e) << std::endl;
    }
  });
  write_text(files.log_path, trainer.log().to_text());
  trainer.checkpoint().save(files.checkpoint_path);
  std::cout << "checkpoint " << files.checkpoint_path << " iteration=" << trainer.iteration()
            << (trainer.finished() ? " finished" : " partial") << "\n";
  return kOk;
}

// --- generate ----------------------------------------------------------------------

struct GenerateArgs {
  std::vector<std::string> checkpoints;
  std::string manifest, split, category;
  std::size_t count = 8;
  std::uint64_t seed = 0;
  std::optional<int> condition;
  std::optional<double> interval;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  std::vector<Checkpoint> ckpts;
  for (const auto& path : a.checkpoints) ckpts.push_back(Checkpoint::load(path));
  const Task task = checkpoint_task(ckpts.front());
  for (const auto& c : ckpts) {
    if (checkpoint_task(c) != task) throw InvalidArgument("checkpoints mix generator tasks");
  }
  const std::string category = a.category.empty() ? checkpoint_category(ckpts.front()) : a.category;
  const auto videos = evaluation_videos(a.manifest, a.split, category);
  const auto cases = make_eval_cases(task, videos, a.count, a.seed, a.condition, a.interval);

  std::vector<std::vector<std::vector<Frame>>> outputs;  // [ckpt][case][step]
  for (const auto& c : ckpts) {
    auto g = load_generator(c);
    outputs.push_back(generate_cases(*g, videos, cases));
  }
  // Columns: inputs | outputs of each checkpoint | ground truth.
  std::vector<std::vector<Frame>> rows;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Video& v = videos[cases[i].video];
    std::vector<Frame> row;
    for (std::size_t f : cases[i].input_frames) row.push_back(v.frames[f]);
    for (const auto& per_ckpt : outputs) {
      for (const Frame& f : per_ckpt[i]) row.push_back(f);
    }
    for (std::size_t f : cases[i].target_frames) row.push_back(v.frames[f]);
    rows.push_back(std::move(row));
  }
  const std::string dir = resolve_out(a.out, "generate");
  ensure_dir(dir);
  const std::string grid = dir + "/grid.ppm";
  write_ppm(grid, tile_frames(rows));
  std::ostringstream legend;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    legend << "row " << i << " video=" << videos[cases[i].video].id << " inputs=";
    for (std::size_t f : cases[i].input_frames) legend << f << ',';
    legend << " targets=";
    for (std::size_t f : cases[i].target_frames) legend << f << ',';
    if (cases[i].condition >= 0) legend << " condition=" << cases[i].condition;
    legend << "\n";
  }
  write_text(dir + "/grid.txt", legend.str());
  std::cout << "wrote " << grid << " (" << cases.size() << " rows, " << ckpts.size()
            << " checkpoints)\n";
  return kOk;
}

// --- eval / retrieve ----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, split, category, json;
  std::size_t count = 64;
  std::uint64_t seed = 0;
  std::optional<int> condition;
  std::optional<double> interval;
  double window = 0.2;
};

int run_eval(const EvalArgs& a, bool retrieval_only) {
  const Checkpoint ckpt = Checkpoint::load(a.checkpoint);
  const std::string category = a.category.empty() ? checkpoint_category(ckpt) : a.category;
  const auto videos = evaluation_videos(a.manifest, a.split, category);
  EvalOptions options;
  options.count = a.count;
  options.seed = a.seed;
  options.condition = a.condition;
  options.interval = a.interval;
  options.window = a.window;
  if (retrieval_only) {
    if (checkpoint_task(ckpt) != Task::kPairwise) {
      throw InvalidArgument("retrieve needs a pairwise checkpoint");
    }
    auto g = load_generator(ckpt);
    const auto cases = make_eval_cases(Task::kPairwise, videos, a.count, a.seed, a.condition);
    const RetrievalResult r = retrieval_experiment(*g, videos, cases, a.window);
    std::cout << std::fixed << std::setprecision(4) << "top1 " << r.top1 << "\ntop5 " << r.top5
              << "\nqueries " << r.queries << "\nnull_top1 "
              << null_hit_rate(videos.front().frame_count(), a.window) << "\n";
    return kOk;
  }
  const EvalReport report = evaluate_checkpoint(ckpt, videos, options);
  std::cout << report.to_table();
  if (!a.json.empty()) write_text(a.json, report.to_json());
  return kOk;
}

// --- flowviz --------------------------------------------------------------------------

struct FlowArgs {
  std::string checkpoint, manifest, split, category;
  std::size_t count = 16;
  int k = 4;
  std::uint64_t seed = 0;
  std::string out;
};

int run_flowviz(const FlowArgs& a) {
  const Checkpoint ckpt = Checkpoint::load(a.checkpoint);
  if (checkpoint_task(ckpt) != Task::kRecurrent) {
    throw InvalidArgument("flowviz needs a recurrent checkpoint");
  }
  const std::string category = a.category.empty() ? checkpoint_category(ckpt) : a.category;
  const auto videos = evaluation_videos(a.manifest, a.split, category);
  const auto cases = make_eval_cases(Task::kRecurrent, videos, a.count, a.seed);
  std::vector<Frame> inputs;
  for (const auto& c : cases) inputs.push_back(videos[c.video].frames[c.input_frames.front()]);
  auto g = load_generator(ckpt);
  const auto maps = flow_cluster_visualization(*g, inputs, a.k, a.seed);
  const std::string dir = resolve_out(a.out, "flowviz");
  ensure_dir(dir);
  for (const auto& path : write_flow_clusters(maps, dir)) std::cout << "wrote " << path << "\n";
  for (const auto& m : maps) {
    std::cout << "step " << m.step << " axis " << m.axis << " cluster_sizes";
    std::vector<int> sizes(static_cast<std::size_t>(a.k), 0);
    for (int l : m.labels) ++sizes[static_cast<std::size_t>(l)];
    for (int s : sizes) std::cout << ' ' << s;
    std::cout << "\n";
  }
  return kOk;
}

// --- gradcheck --------------------------------------------------------------------------

int run_gradcheck(std::uint64_t seed) {
  const auto entries = run_grad_suite(seed);
  double total = 0.0;
  int failed = 0;
  std::printf("%-26s %12s %12s %7s %6s %8s\n", "case", "double_err", "float_err", "coords", "kinks",
              "seconds");
  for (const auto& e : entries) {
    total += e.seconds;
    if (!e.passed()) ++failed;
    std::printf("%-26s %12.3e %12.3e %7ld %6ld %8.3f %s\n", e.name.c_str(), e.double_error,
                e.float_error, e.coords, e.kinks, e.seconds, e.passed() ? "ok" : "FAIL");
  }
  std::printf("cases %zu failed %d total_seconds %.2f tolerance %.0e\n", entries.size(), failed,
              total, kGradSuiteTolerance);
  if (failed > 0) throw CheckFailed(std::to_string(failed) + " gradient check case(s) failed");
  return kOk;
}

// --- dispatch -----------------------------------------------------------------------------

int classify_and_report() {
  try {
    throw;
  } catch (const CheckFailed& e) {
    return fail(kCheckFailed, "check_failed", e.what());
  } catch (const FileError& e) {
    return fail(kMissingFile, "missing_file", e.what());
  } catch (const ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const NumericError& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const InvalidArgument& e) {
    return fail(kInvalidInput, "invalid_input", e.what());
  } catch (const AnnotationError& e) {
    return fail(kInvalidInput, "invalid_input", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "internal", e.what());
  } catch (...) {
    return fail(kInternal, "internal", "unknown exception");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-lapse generation toolkit: synthetic data, training, generation, evaluation."};
  app.set_help_flag("");
  app.set_help_all_flag("-h,--help", "Print help for every subcommand and exit");
  app.require_subcommand(1);
  app.footer(std::string("Environment: ") + kOutputRootEnv +
             " sets the default output root (default ./tlgen_out).\n"
             "Exit codes: 0 ok, 1 internal, 2 usage, 3 missing_file, 4 config, 5 numeric,\n"
             "            6 invalid_input, 7 check_failed.");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic time-lapse dataset");
  s->add_option("--category", synth.category, "bloom|melt|bake|rot|all")->capture_default_str();
  s->add_option("--count", synth.count, "Videos per category")->capture_default_str();
  s->add_option("--frames", synth.frames, "Frames per video")->capture_default_str();
  s->add_option("--seed", synth.seed, "Base seed")->capture_default_str();
  s->add_option("--out", synth.out, "Dataset directory (default $TLGEN_OUTPUT_ROOT/synth)");

  AnnotateArgs annotate;
  auto* an = app.add_subcommand("annotate", "Aggregate degree annotations into per-frame degrees");
  an->add_option("--annotations", annotate.annotations, "Annotation file")->required();
  an->add_option("--frames", annotate.frames, "Frames in the video")->capture_default_str();
  an->add_option("--out", annotate.out, "Degrees file to write (default stdout)");

  std::string stats_manifest;
  auto* st = app.add_subcommand("stats", "Per-category dataset statistics");
  st->add_option("--manifest", stats_manifest, "Dataset manifest")->required();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a generator (and discriminator)");
  tr->add_option("--manifest", train.manifest, "Dataset manifest")->required();
  tr->add_option("--config", train.config_file, "key = value TrainConfig file (overrides flags)");
  tr->add_option("--task", train.task, "pairwise|twostack|recurrent")->capture_default_str();
  tr->add_option("--regime", train.regime, "p_mse|p_mse+adv|p_g_mse+adv|p_g_mse+adv+ft")
      ->capture_default_str();
  tr->add_option("--category", train.category, "bloom|melt|bake|rot")->capture_default_str();
  tr->add_option("--preset", train.preset, "desk|paper base configuration")->capture_default_str();
  tr->add_option("--scale", train.scale, "Iteration scale factor");
  tr->add_option("--width", train.width, "Channel width multiplier");
  tr->add_option("--code-width", train.code_width, "Bottleneck width override");
  tr->add_option("--batch", train.batch, "Batch size");
  tr->add_option("--lr", train.lr, "Adam learning rate");
  tr->add_option("--lambda-adv", train.lambda, "Adversarial weight");
  tr->add_option("--iterations-scratch", train.it_scratch, "Unscaled from-scratch iterations");
  tr->add_option("--iterations-pretrain", train.it_pretrain, "Unscaled pre-training iterations");
  tr->add_option("--iterations-finetune", train.it_finetune, "Unscaled fine-tuning iterations");
  tr->add_option("--checkpoint-every", train.checkpoint_every, "Periodic checkpoint interval");
  tr->add_flag("--no-augment", train.no_augment, "Disable crop/flip augmentation");
  tr->add_option("--seed", train.seed, "Run seed")->capture_default_str();
  tr->add_option("--split-ratio", train.split_ratio, "Train fraction of videos")
      ->capture_default_str();
  tr->add_option("--corpus-size", train.corpus_size, "Reconstruction corpus images")
      ->capture_default_str();
  tr->add_option("--resume", train.resume, "Checkpoint to resume from");
  tr->add_option("--max-steps", train.max_steps, "Stop after this many steps (-1 = schedule)")
      ->capture_default_str();
  tr->add_option("--log-every", train.log_every, "Print every n-th log line")
      ->capture_default_str();
  tr->add_option("--out", train.out, "Run directory (default $TLGEN_OUTPUT_ROOT/train)");

  GenerateArgs gen;
  auto* ge = app.add_subcommand("generate", "Render input | outputs | ground-truth grids");
  ge->add_option("--checkpoint", gen.checkpoints, "Checkpoint (repeatable; one column group each)")
      ->required();
  ge->add_option("--manifest", gen.manifest, "Dataset manifest")->required();
  ge->add_option("--split", gen.split, "split.txt; its test videos are used");
  ge->add_option("--category", gen.category, "Category filter (default: checkpoint's)");
  ge->add_option("--count", gen.count, "Rows")->capture_default_str();
  ge->add_option("--seed", gen.seed, "Sampling seed")->capture_default_str();
  ge->add_option("--condition", gen.condition, "Fixed pairwise condition index 0..3");
  ge->add_option("--interval", gen.interval, "Fixed two-stack interval m");
  ge->add_option("--out", gen.out, "Output directory (default $TLGEN_OUTPUT_ROOT/generate)");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "PSNR / SSIM / MSE report (plus retrieval for pairwise)");
  ev->add_option("--checkpoint", eval.checkpoint, "Checkpoint")->required();
  ev->add_option("--manifest", eval.manifest, "Dataset manifest")->required();
  ev->add_option("--split", eval.split, "split.txt; its test videos are used");
  ev->add_option("--category", eval.category, "Category filter (default: checkpoint's)");
  ev->add_option("--count", eval.count, "Test samples")->capture_default_str();
  ev->add_option("--seed", eval.seed, "Sampling seed")->capture_default_str();
  ev->add_option("--condition", eval.condition, "Fixed pairwise condition index 0..3");
  ev->add_option("--interval", eval.interval, "Fixed two-stack interval m");
  ev->add_option("--window", eval.window, "Retrieval window, fraction of video length")
      ->capture_default_str();
  ev->add_option("--json", eval.json, "Also write the report as JSON");

  EvalArgs retr;
  auto* re = app.add_subcommand("retrieve", "Frame retrieval with a pairwise model's outputs");
  re->add_option("--checkpoint", retr.checkpoint, "Pairwise checkpoint")->required();
  re->add_option("--manifest", retr.manifest, "Dataset manifest")->required();
  re->add_option("--split", retr.split, "split.txt; its test videos are used");
  re->add_option("--category", retr.category, "Category filter (default: checkpoint's)");
  re->add_option("--count", retr.count, "Queries")->capture_default_str();
  re->add_option("--seed", retr.seed, "Sampling seed")->capture_default_str();
  re->add_option("--condition", retr.condition, "Fixed condition index 0..3");
  re->add_option("--window", retr.window, "Hit window, fraction of video length")
      ->capture_default_str();

  FlowArgs flow;
  auto* fl = app.add_subcommand("flowviz", "Cluster optical flow of recurrent outputs");
  fl->add_option("--checkpoint", flow.checkpoint, "Recurrent checkpoint")->required();
  fl->add_option("--manifest", flow.manifest, "Dataset manifest")->required();
  fl->add_option("--split", flow.split, "split.txt; its test videos are used");
  fl->add_option("--category", flow.category, "Category filter (default: checkpoint's)");
  fl->add_option("--count", flow.count, "Input images")->capture_default_str();
  fl->add_option("--k", flow.k, "Clusters")->capture_default_str();
  fl->add_option("--seed", flow.seed, "Sampling and k-means seed")->capture_default_str();
  fl->add_option("--out", flow.out, "Output directory (default $TLGEN_OUTPUT_ROOT/flowviz)");

  std::uint64_t grad_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Run the full gradient-check suite");
  gc->add_option("--seed", grad_seed, "Probe seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*s) return run_synth(synth);
    if (*an) return run_annotate(annotate);
    if (*st) return run_stats(stats_manifest);
    if (*tr) return run_train(train);
    if (*ge) return run_generate(gen);
    if (*ev) return run_eval(eval, false);
    if (*re) return run_eval(retr, true);
    if (*fl) return run_flowviz(flow);
    if (*gc) return run_gradcheck(grad_seed);
  } catch (...) {
    return classify_and_report();
  }
  return fail(kUsage, "usage", "no subcommand");
}
