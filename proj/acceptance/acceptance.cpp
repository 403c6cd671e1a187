// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Progress goes to stderr.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tlgen/grad_suite.hpp"
#include "tlgen/pipeline.hpp"
#include "tlgen/seed.hpp"

using namespace tlgen;

namespace {

constexpr std::uint64_t kSeed = 2017;

// Criterion thresholds.
constexpr double kGradRuntime = 120.0;
constexpr double kMetricTolerance = 1e-6;
constexpr double kPsnrIdentityTolerance = 1e-9;
constexpr double kOffsetTolerance = 1e-12;
constexpr double kPretrainMse = 0.01;
constexpr double kPretrainRuntime = 600.0;
constexpr std::int64_t kPretrainIterations = 2000;
constexpr std::int64_t kFinetuneIterations = 2000;
constexpr std::size_t kCorpusSize = 500;
constexpr std::size_t kMinTriples = 50;
constexpr double kMonotoneFraction = 0.8;
constexpr std::int64_t kStabilitySteps = 500;
constexpr double kStabilityDrop = 0.2;
constexpr double kNullTolerance = 0.1;
constexpr double kTrainedTop1 = 0.6;
constexpr double kFlowLo = 0.7, kFlowHi = 1.3;

// Run sizes that keep the whole suite within its time budget on one core.
constexpr int kVideos = 40;
constexpr std::size_t kEvalCount = 64;
constexpr double kRecurrentScale = 0.1;
constexpr double kReplayScale = 0.02;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void progress(const std::string& text) { std::cerr << "[acceptance] " << text << std::endl; }

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Every metric row produced by the suite, for the PSNR identity check.
std::vector<MetricRow> g_reports;

MetricRow record(MetricRow row) {
  g_reports.push_back(row);
  return row;
}

VideoSplit bloom_split() {
  std::vector<Video> videos;
  for (int i = 0; i < kVideos; ++i) {
    videos.push_back(
        synth_video(Category::kBloom, derive_seed(kSeed, {7, static_cast<std::uint64_t>(i)})));
  }
  return split_for_training(videos, Category::kBloom, kDefaultSplitRatio, kSeed);
}

TrainConfig desk(Task task, Regime regime) {
  TrainConfig c = TrainConfig::desk(task, regime);
  c.seed = kSeed;
  return c;
}

// --- 1 ----------------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const auto entries = run_grad_suite(0);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::size_t failed = 0;
  for (const auto& e : entries) {
    if (!e.passed()) ++failed;
    if (e.max_error() > worst) {
      worst = e.max_error();
      worst_name = e.name;
    }
  }
  return {
      failed == 0 && elapsed < kGradRuntime,
      fmt("%zu cases, %zu failed, max rel error %.2e (%s) < %.0e, %.1f s < %.0f s", entries.size(),
          failed, worst, worst_name.c_str(), kGradSuiteTolerance, elapsed, kGradRuntime)};
}

// --- 2 ----------------------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(derive_seed(kSeed, {2}));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::normal_distribution<double> noise(0.0, 0.02 + 0.02 * (i % 10));
    Frame a({16, 16, 3}), b({16, 16, 3});
    for (Index k = 0; k < a.size(); ++k) {
      a[k] = static_cast<float>(u(rng));
      b[k] = static_cast<float>(std::clamp(a[k] + noise(rng), -1.0, 1.0));
    }
    const double m = test::naive_mse(a, b);
    worst =
        std::max({worst, std::abs(mse(a, b) - m), std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / m)),
                  std::abs(ssim(a, b) - test::naive_ssim(a, b))});
  }
  // PSNR-MSE identity on every sample of every report produced by the suite.
  double identity = 0.0;
  std::size_t samples = 0;
  for (const auto& row : g_reports) {
    for (const auto& s : row.per_sample) {
      const double expected = s.mse < 1e-10 ? kPsnrCap : 10.0 * std::log10(1.0 / s.mse);
      identity = std::max(identity, std::abs(s.psnr - expected));
      ++samples;
    }
  }
  return {worst <= kMetricTolerance && identity <= kPsnrIdentityTolerance && samples > 0,
          fmt("naive oracle max diff %.2e <= %.0e on 100 pairs; psnr identity max %.2e <= %.0e "
              "on %zu report samples",
              worst, kMetricTolerance, identity, kPsnrIdentityTolerance, samples)};
}

// --- 3 ----------------------------------------------------------------------------

bool same_parameters(Generator<float>& a, Generator<float>& b) {
  const auto& pa = a.named_parameters();
  const auto& pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i].var.value() == pb[i].var.value())) return false;
  }
  return true;
}

Outcome loss_algebra() {
  const VideoSplit split = bloom_split();
  TrainConfig tc = desk(Task::kPairwise, Regime::kPixelMse);
  TrainingData data;
  data.videos = split.train;
  bool identical = true;
  for (bool gradient : {false, true}) {
    PairwiseGenerator<float> plain(tc.generator_config(), 5), adv(tc.generator_config(), 5);
    Discriminator<float> d(tc.discriminator_config(), 6);
    Adam<float> plain_opt(plain.parameters()), adv_opt(adv.parameters()), d_opt(d.parameters());
    LossConfig plain_loss;
    plain_loss.use_gradient_term = gradient;
    const LossConfig adv_loss =
        LossConfig::for_regime(gradient ? Regime::kPixelGradMseAdv : Regime::kPixelMseAdv, 0.0);
    for (std::uint64_t step = 0; step < 3; ++step) {
      const Batch batch = make_batch(tc, data, "scratch", step);
      const StepLosses a = gan_step(plain, nullptr, plain_opt, nullptr, plain_loss, batch);
      const StepLosses b = gan_step(adv, &d, adv_opt, &d_opt, adv_loss, batch);
      identical = identical && a.generator == b.generator;
    }
    identical = identical && same_parameters(plain, adv);
  }

  std::mt19937_64 rng(derive_seed(kSeed, {3}));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Tensor<double> y({4, 64, 64, 3}), p({4, 64, 64, 3});
    for (Index k = 0; k < y.size(); ++k) {
      y[k] = u(rng);
      p[k] = u(rng);
    }
    const double offset = u(rng);
    Tensor<double> ys = y, ps = p;
    ys.data().array() += offset;
    ps.data().array() += offset;
    const double base = g_mse(Var<double>(y), Var<double>(p)).value()[0];
    const double shifted = g_mse(Var<double>(ys), Var<double>(ps)).value()[0];
    worst = std::max(worst, std::abs(base - shifted));
  }
  return {identical && worst <= kOffsetTolerance,
          fmt("lambda 0 updates bitwise identical (p_mse, p_g_mse; desk model, 3 steps): %s; "
              "g_mse offset invariance max %.2e <= %.0e",
              identical ? "yes" : "no", worst, kOffsetTolerance)};
}

// --- 4, 5, 9 (one pairwise fine-tuning run) ------------------------------------------

struct PairwiseRun {
  Outcome pretrain, conditioning, retrieval;
};

// Held-out corpus images reconstructed at condition 0.
MetricRow reconstruction_row(Generator<float>& g, const std::vector<Frame>& images) {
  Video v;
  v.id = "holdout";
  v.frames = images;
  v.degrees.assign(images.size(), 0.0);
  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < images.size(); ++i) cases.push_back({0, {i}, 0, {i}});
  const std::vector<Video> videos{v};
  return record(evaluate_reconstruction(g, videos, cases));
}

PairwiseRun pairwise_finetune(const VideoSplit& split) {
  PairwiseRun out;
  TrainConfig c = desk(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  c.scale_factor = 1.0;
  c.iterations_pretrain = kPretrainIterations;
  c.iterations_finetune = kFinetuneIterations;
  const TrainingData data = make_training_data(c, split, kCorpusSize);
  const auto held_out = make_reconstruction_corpus(kEvalCount, derive_seed(kSeed, {6}));

  Trainer trainer(c, data);
  const double untrained = reconstruction_row(trainer.generator(), held_out).mse;
  progress("pairwise pre-training, " + std::to_string(kPretrainIterations) + " iterations");
  const auto t0 = Clock::now();
  trainer.run(kPretrainIterations);
  const double elapsed = seconds_since(t0);
  const double pretrained = reconstruction_row(trainer.generator(), held_out).mse;
  out.pretrain = {
      pretrained <= kPretrainMse && elapsed < kPretrainRuntime,
      fmt("width %.2f, batch %d, corpus %zu, %lld iterations: held-out mse %.4f <= "
          "%.2f (untrained %.4f), %.0f s < %.0f s",
          c.width, c.batch_size, kCorpusSize, static_cast<long long>(kPretrainIterations),
          pretrained, kPretrainMse, untrained, elapsed, kPretrainRuntime)};

  progress("pairwise fine-tuning on bloom, " + std::to_string(kFinetuneIterations) + " iterations");
  trainer.run();
  Generator<float>& g = trainer.generator();

  // Same inputs under every condition; inputs leave room for the largest offset.
  const auto base =
      make_eval_cases(Task::kPairwise, split.test, kEvalCount, derive_seed(kSeed, {8}), 3);
  std::vector<double> by_condition;
  for (int k = 0; k < 4; ++k) {
    auto cases = base;
    for (auto& ec : cases) ec.condition = k;
    const auto outputs = generate_cases(g, split.test, cases);
    std::vector<double> d;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      d.push_back(mse(outputs[i][0], split.test[cases[i].video].frames[cases[i].input_frames[0]]));
    }
    by_condition.push_back(mean(d));
  }
  bool increasing = true;
  for (std::size_t k = 1; k < by_condition.size(); ++k) {
    increasing = increasing && by_condition[k] > by_condition[k - 1];
  }
  out.conditioning = {
      increasing,
      fmt("mean mse(output(k), input) over %zu test inputs: %.6f, %.6f, %.6f, "
          "%.6f (strictly increasing required)",
          base.size(), by_condition[0], by_condition[1], by_condition[2], by_condition[3])};

  // Retrieval: exact frames, a noise null model, and the trained model.
  const auto cases =
      make_eval_cases(Task::kPairwise, split.test, kEvalCount, derive_seed(kSeed, {9}));
  std::vector<Frame> exact;
  for (const auto& ec : cases) exact.push_back(split.test[ec.video].frames[ec.target_frames[0]]);
  const RetrievalResult exact_r = score_retrieval(exact, split.test, cases);

  std::mt19937_64 rng(derive_seed(kSeed, {10}));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = kDefaultFrameCount;
  auto noise_frame = [&] {
    Frame f({8, 8, 3});
    for (Index i = 0; i < f.size(); ++i) f[i] = static_cast<float>(u(rng));
    return f;
  };
  Video noise;
  noise.id = "noise";
  for (std::size_t i = 0; i < n; ++i) {
    noise.frames.push_back(noise_frame());
    noise.degrees.emplace_back(static_cast<double>(i) / static_cast<double>(n - 1));
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<EvalCase> null_cases;
  std::vector<Frame> null_queries;
  for (int q = 0; q < 2000; ++q) {
    null_cases.push_back({0, {0}, -1, {pick(rng)}});
    null_queries.push_back(noise_frame());
  }
  const std::vector<Video> noise_videos{noise};
  const double null_mc = score_retrieval(null_queries, noise_videos, null_cases).top1;
  const double null_analytic = null_hit_rate(n, 0.2);

  const RetrievalResult trained = retrieval_experiment(g, split.test, cases);
  record(evaluate_reconstruction(g, split.test, cases));
  out.retrieval = {exact_r.top1 == 1.0 && std::abs(null_mc - null_analytic) <= kNullTolerance &&
                       trained.top1 >= kTrainedTop1,
                   fmt("exact-frame top-1 %.3f == 1; null MC %.3f vs analytic %.3f (+-%.1f); "
                       "trained top-1 %.3f >= %.1f over %zu queries",
                       exact_r.top1, null_mc, null_analytic, kNullTolerance, trained.top1,
                       kTrainedTop1, trained.queries)};
  return out;
}

// --- 6 ----------------------------------------------------------------------------

Outcome two_stack_sensitivity(const VideoSplit& split) {
  const TrainConfig c = desk(Task::kTwoStack, Regime::kPixelGradMseAdvFinetune);
  Trainer trainer(c, make_training_data(c, split, kCorpusSize));
  progress("two-stack training, " + std::to_string(c.total_iterations()) + " iterations");
  trainer.run();
  std::vector<double> means;
  std::size_t triples = kEvalCount;
  for (double m : {0.1, 0.3}) {
    const auto cases =
        make_eval_cases(Task::kTwoStack, split.test, kEvalCount, derive_seed(kSeed, {11}), {}, m);
    triples = std::min(triples, cases.size());
    const auto outputs = generate_cases(trainer.generator(), split.test, cases);
    record(evaluate_reconstruction(trainer.generator(), split.test, cases));
    std::vector<double> d;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      d.push_back(mse(outputs[i][0], split.test[cases[i].video].frames[cases[i].input_frames[1]]));
    }
    means.push_back(mean(d));
  }
  return {triples >= kMinTriples && means[1] > means[0],
          fmt("%lld iterations; mean mse(output, second input): m=0.3 %.6f > m=0.1 %.6f over "
              "%zu triples each",
              static_cast<long long>(c.total_iterations()), means[1], means[0], triples)};
}

// --- 7 ----------------------------------------------------------------------------

Outcome recurrent_monotonicity(const VideoSplit& split) {
  TrainConfig c = desk(Task::kRecurrent, Regime::kPixelGradMseAdv);
  c.scale_factor = kRecurrentScale;
  Trainer trainer(c, make_training_data(c, split, kCorpusSize));
  progress("recurrent training, " + std::to_string(c.total_iterations()) + " iterations");
  trainer.run();
  const auto cases =
      make_eval_cases(Task::kRecurrent, split.test, kEvalCount, derive_seed(kSeed, {12}));
  const auto outputs = generate_cases(trainer.generator(), split.test, cases);
  record(evaluate_reconstruction(trainer.generator(), split.test, cases));
  std::size_t monotone = 0;
  for (const auto& steps : outputs) {
    bool ok = true;
    for (std::size_t s = 1; s < steps.size(); ++s) {
      ok = ok && bright_area(steps[s]) >= bright_area(steps[s - 1]);
    }
    if (ok) ++monotone;
  }
  const double fraction = static_cast<double>(monotone) / static_cast<double>(outputs.size());
  return {fraction >= kMonotoneFraction,
          fmt("%lld iterations; bright area non-decreasing over 4 steps for %zu/%zu inputs "
              "(%.2f >= %.2f)",
              static_cast<long long>(c.total_iterations()), monotone, outputs.size(), fraction,
              kMonotoneFraction)};
}

// --- 8 ----------------------------------------------------------------------------

Outcome adversarial_stability(const VideoSplit& split) {
  TrainConfig c = desk(Task::kPairwise, Regime::kPixelGradMseAdv);
  c.scale_factor = 1.0;
  c.iterations_scratch = kStabilitySteps;
  Trainer trainer(c, make_training_data(c, split, 0));
  progress("adversarial stability, " + std::to_string(kStabilitySteps) + " steps");
  bool finite = true;
  std::vector<double> pixel;
  trainer.run(-1, [&](const LogEntry& e) {
    const StepLosses& l = e.losses;
    for (double v : {l.pixel, l.gradient, l.adversarial, l.generator, l.discriminator}) {
      finite = finite && std::isfinite(v);
    }
    pixel.push_back(l.pixel);
  });
  const std::span<const double> all(pixel);
  const double first = mean(all.first(50)), last = mean(all.last(50));
  return {finite && pixel.size() == static_cast<std::size_t>(kStabilitySteps) &&
              last <= (1.0 - kStabilityDrop) * first,
          fmt("%zu steps, losses finite: %s; L_pmse first-50 %.4f, last-50 %.4f (drop %.0f%% >= "
              "%.0f%%)",
              pixel.size(), finite ? "yes" : "no", first, last, 100.0 * (1.0 - last / first),
              100.0 * kStabilityDrop)};
}

// --- 10 ---------------------------------------------------------------------------

Frame texture(double shift_x, double shift_y, double phase) {
  Frame f({64, 64, 3});
  for (Index y = 0; y < 64; ++y) {
    for (Index x = 0; x < 64; ++x) {
      const double u = x - shift_x + phase, v = y - shift_y - phase;
      const double val =
          0.5 * std::sin(u * 0.35) * std::cos(v * 0.27) + 0.3 * std::sin((u + v) * 0.18);
      for (Index c = 0; c < 3; ++c) f[(y * 64 + x) * 3 + c] = static_cast<float>(val);
    }
  }
  return f;
}

Outcome flow_clustering() {
  const FlowField shift = optical_flow(texture(0, 0, 0), texture(1, 0, 0));
  const double u = shift.u.mean();

  // Planted sets: each texture moves one pixel in one of four directions.
  std::mt19937_64 rng(derive_seed(kSeed, {13}));
  std::uniform_real_distribution<double> phase(0.0, 10.0);
  const double dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const int per = 10;
  Eigen::MatrixXd points(4 * per, 2 * 64 * 64);
  std::vector<int> truth;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < per; ++i) {
      const double p = phase(rng);
      const FlowField f = optical_flow(texture(0, 0, p), texture(dirs[c][0], dirs[c][1], p));
      Eigen::Map<const Eigen::RowVectorXd> fu(f.u.data(), f.u.size());
      Eigen::Map<const Eigen::RowVectorXd> fv(f.v.data(), f.v.size());
      points.row(c * per + i) << fu, fv;
      truth.push_back(c);
    }
  }
  const KMeansResult km = kmeans(points, 4, kSeed);
  const double ari = adjusted_rand_index(km.labels, truth);
  return {u >= kFlowLo && u <= kFlowHi && ari == 1.0,
          fmt("1-px shift mean u %.3f in [%.1f, %.1f]; planted 4-cluster ARI %.3f == 1", u, kFlowLo,
              kFlowHi, ari)};
}

// --- 11 ---------------------------------------------------------------------------

Outcome determinism(const VideoSplit& split) {
  TrainConfig c = desk(Task::kPairwise, Regime::kPixelGradMseAdvFinetune);
  c.scale_factor = kReplayScale;
  const TrainingData data = make_training_data(c, split, kCorpusSize);
  EvalOptions options;
  options.count = kEvalCount;
  options.seed = kSeed;
  progress("replayed pipeline, 2 x " + std::to_string(c.total_iterations()) + " iterations");
  std::vector<std::vector<std::byte>> ckpts;
  std::vector<std::string> reports;
  for (int run = 0; run < 2; ++run) {
    Trainer t(c, data);
    t.run();
    ckpts.push_back(t.checkpoint().to_bytes());
    const EvalReport report = evaluate_checkpoint(t.checkpoint(), split.test, options);
    for (const auto& row : report.rows) record(row);
    reports.push_back(report.to_json());
  }
  const bool replay = ckpts[0] == ckpts[1] && reports[0] == reports[1];

  const auto dir = std::filesystem::temp_directory_path() / "tlgen_acceptance";
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a.ckpt").string(), b = (dir / "b.ckpt").string();
  Checkpoint::from_bytes(ckpts[0]).save(a);
  Checkpoint::load(a).save(b);
  const bool round_trip = Checkpoint::load(b).to_bytes() == ckpts[0] &&
                          std::filesystem::file_size(a) == std::filesystem::file_size(b);
  std::filesystem::remove_all(dir);
  return {replay && round_trip,
          fmt("%lld-iteration train+eval replay bitwise identical: %s; checkpoint save/load/save "
              "byte-identical: %s (%zu bytes)",
              static_cast<long long>(c.total_iterations()), replay ? "yes" : "no",
              round_trip ? "yes" : "no", ckpts[0].size())};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::vector<Outcome> results(12);

  progress("gradient suite");
  results[1] = gradient_integrity();
  progress("loss algebra");
  results[3] = loss_algebra();
  progress("flow and clustering");
  results[10] = flow_clustering();

  const VideoSplit split = bloom_split();
  results[8] = adversarial_stability(split);
  results[11] = determinism(split);
  {
    PairwiseRun run = pairwise_finetune(split);
    results[4] = run.pretrain;
    results[5] = run.conditioning;
    results[9] = run.retrieval;
  }
  results[6] = two_stack_sensitivity(split);
  results[7] = recurrent_monotonicity(split);
  // Last, so the identity covers every report above.
  results[2] = metric_oracles();

  const char* names[] = {"",
                         "gradient integrity",
                         "metric oracles",
                         "loss algebra",
                         "reconstruction pre-training",
                         "degree conditioning",
                         "two-stack interval sensitivity",
                         "recurrent monotonicity",
                         "adversarial stability",
                         "retrieval harness",
                         "flow and clustering",
                         "determinism and persistence"};
  int failed = 0;
  for (int i = 1; i <= 11; ++i) {
    if (!results[i].pass) ++failed;
    std::cout << "C" << i << " " << (results[i].pass ? "PASS" : "FAIL") << " " << names[i] << ": "
              << results[i].detail << "\n";
  }
  std::cout << "total " << fmt("%.0f", seconds_since(t0)) << " s, " << 11 - failed << "/11 passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
