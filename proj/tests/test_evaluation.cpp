#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tlgen/evaluation.hpp"
#include "tlgen/pipeline.hpp"

using namespace tlgen;
using test::naive_mse;
using test::naive_ssim;

namespace {

Frame random_frame(std::mt19937_64& rng, Index h = 64, Index w = 64) {
  return test::random_tensor<float>({h, w, 3}, rng);
}

// Correlated pair: b = a + noise, clamped to [-1,1].
std::pair<Frame, Frame> noisy_pair(std::mt19937_64& rng, double noise) {
  Frame a = random_frame(rng);
  std::normal_distribution<double> n(0.0, noise);
  Frame b = a;
  for (Index i = 0; i < b.size(); ++i) {
    b[i] = static_cast<float>(std::clamp(static_cast<double>(b[i]) + n(rng), -1.0, 1.0));
  }
  return {a, b};
}

}  // namespace

TEST_CASE("mse, psnr and ssim match naive implementations on 100 pairs") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 100; ++i) {
    // Small frames keep the direct SSIM cheap; a few full-size ones cover 64x64.
    const bool full = i % 25 == 0;
    std::normal_distribution<double> n(0.0, 0.05 + 0.01 * (i % 10));
    Frame a = full ? random_frame(rng) : random_frame(rng, 20, 24);
    Frame b = a;
    for (Index k = 0; k < b.size(); ++k) {
      b[k] = static_cast<float>(std::clamp(static_cast<double>(b[k]) + n(rng), -1.0, 1.0));
    }
    const double m = naive_mse(a, b);
    CHECK(std::abs(mse(a, b) - m) < 1e-6);
    CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / m)) < 1e-6);
    CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) < 1e-6);
  }
}

TEST_CASE("metric edge cases") {
  std::mt19937_64 rng(52);
  const Frame a = random_frame(rng);
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const Frame lo = Tensor<float>::constant({64, 64, 3}, -1.0f);
  const Frame hi = Tensor<float>::constant({64, 64, 3}, 1.0f);
  CHECK(mse(lo, hi) == 1.0);
  CHECK(psnr(lo, hi) == 0.0);
  CHECK_THROWS_AS(mse(a, random_frame(rng, 32, 32)), InvalidArgument);
  CHECK_THROWS_AS(ssim(random_frame(rng, 8, 8), random_frame(rng, 8, 8)), InvalidArgument);
}

TEST_CASE("psnr-mse identity holds on aggregated reports") {
  std::mt19937_64 rng(53);
  std::vector<FrameMetrics> samples;
  for (int i = 0; i < 20; ++i) {
    auto [a, b] = noisy_pair(rng, 0.02 * (i + 1));
    samples.push_back(frame_metrics(a, b));
  }
  for (const auto& s : samples) {
    CHECK(std::abs(s.psnr - 10.0 * std::log10(1.0 / s.mse)) < 1e-9);
  }
  const MetricRow row = aggregate_metrics(samples);
  double mean_mse = 0.0;
  for (const auto& s : samples) mean_mse += s.mse;
  CHECK(row.mse == doctest::Approx(mean_mse / 20.0).epsilon(1e-14));
  CHECK(row.samples == 20);
  EvalReport report;
  report.rows.push_back(row);
  report.top1 = 0.5;
  const auto json = report.to_json();
  CHECK(json.find("\"retrieval_top1\": 0.5") != std::string::npos);
  CHECK(report.to_table().find("| PSNR |") != std::string::npos);
}

// --- retrieval --------------------------------------------------------------------

namespace {

double closed_form_null(std::size_t n, double window) {
  const double r = std::floor(window * static_cast<double>(n) + 1e-9);
  const double nn = static_cast<double>(n);
  const double rr = std::min(r, nn - 1.0);
  return (nn + 2.0 * (rr * nn - rr * (rr + 1.0) / 2.0)) / (nn * nn);
}

}  // namespace

TEST_CASE("null hit rate equals the closed form") {
  for (std::size_t n : {5u, 11u, 41u, 100u}) {
    for (double w : {0.05, 0.2, 0.5, 1.0}) {
      CHECK(null_hit_rate(n, w) == doctest::Approx(closed_form_null(n, w)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ranking and hit rules") {
  std::mt19937_64 rng(54);
  std::vector<Frame> db;
  for (int i = 0; i < 6; ++i) db.push_back(random_frame(rng, 16, 16));
  const auto ranking = rank_frames(db[3], db);
  CHECK(ranking.front() == 3);
  std::vector<std::size_t> sorted = ranking;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  const std::vector<std::size_t> r{7, 1, 2};
  CHECK(retrieval_hit(r, 9, 10, 0.2, 1));  // |7-9| <= 2
  CHECK_FALSE(retrieval_hit(r, 4, 10, 0.2, 1));
  CHECK(retrieval_hit(r, 4, 10, 0.2, 3));  // |2-4| <= 2
}

TEST_CASE("exact-frame queries retrieve perfectly") {
  std::vector<Video> videos{synth_video(Category::kBloom, 1), synth_video(Category::kRot, 2)};
  const auto cases = make_eval_cases(Task::kPairwise, videos, 40, 5);
  std::vector<Frame> queries;
  for (const auto& c : cases) {
    for (std::size_t t : c.target_frames) queries.push_back(videos[c.video].frames[t]);
  }
  const RetrievalResult r = score_retrieval(queries, videos, cases, 0.2);
  CHECK(r.queries == 40);
  CHECK(r.top1 == 1.0);
  CHECK(r.top5 == 1.0);
}

TEST_CASE("Monte-Carlo null retrieval matches the analytic hit rate") {
  // Noise queries against noise databases rank frames at random.
  std::mt19937_64 rng(55);
  const std::size_t n = 41;
  Video v;
  v.id = "noise";
  for (std::size_t i = 0; i < n; ++i) {
    v.frames.push_back(random_frame(rng, 8, 8));
    v.degrees.push_back(static_cast<double>(i) / (n - 1));
  }
  std::vector<Video> videos{v};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<EvalCase> cases;
  std::vector<Frame> queries;
  for (int q = 0; q < 2000; ++q) {
    cases.push_back({0, {0}, -1, {pick(rng)}});
    queries.push_back(random_frame(rng, 8, 8));
  }
  const RetrievalResult r = score_retrieval(queries, videos, cases, 0.2);
  CHECK(std::abs(r.top1 - null_hit_rate(n, 0.2)) < 0.1);
  CHECK(r.top5 > r.top1);
}

// --- optical flow and clustering ------------------------------------------------------

namespace {

Frame smooth_texture(double shift_x, double shift_y) {
  Frame f({64, 64, 3});
  for (Index y = 0; y < 64; ++y) {
    for (Index x = 0; x < 64; ++x) {
      const double u = x - shift_x, v = y - shift_y;
      const double val =
          0.5 * std::sin(u * 0.35) * std::cos(v * 0.27) + 0.3 * std::sin((u + v) * 0.18);
      for (Index c = 0; c < 3; ++c) f[(y * 64 + x) * 3 + c] = static_cast<float>(val);
    }
  }
  return f;
}

}  // namespace

TEST_CASE("Horn-Schunck recovers a one-pixel translation") {
  const Frame a = smooth_texture(0.0, 0.0);
  const FlowField right = optical_flow(a, smooth_texture(1.0, 0.0));
  CHECK(right.u.mean() >= 0.7);
  CHECK(right.u.mean() <= 1.3);
  CHECK(std::abs(right.v.mean()) < 0.3);
  const FlowField down = optical_flow(a, smooth_texture(0.0, 1.0));
  CHECK(down.v.mean() >= 0.7);
  CHECK(down.v.mean() <= 1.3);
  const FlowField none = optical_flow(a, a);
  CHECK(none.u.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adjusted Rand index on known labelings") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
  CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));
  CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(1.0));
  // Contingency [[1,1,0],[0,1,1],[1,0,1]]: sum C(nij,2)=0, a_i = b_j = 2 each.
  // Index 0, expected 3*3/15 = 0.6, max 3: ARI = (0 - 0.6)/(3 - 0.6) = -0.25.
  const std::vector<int> b{0, 1, 1, 2, 0, 2};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("k-means recovers planted clusters of flow fields") {
  std::mt19937_64 rng(56);
  std::normal_distribution<double> noise(0.0, 0.05);
  const int k = 4, per = 12, dims = 64 * 64;
  Eigen::MatrixXd points(k * per, dims);
  std::vector<int> truth;
  for (int c = 0; c < k; ++c) {
    // Each planted field: constant flow in one direction.
    const double u = c == 0 ? 1.0 : c == 1 ? -1.0 : 0.0;
    const double v = c == 2 ? 1.0 : c == 3 ? -1.0 : 0.0;
    for (int i = 0; i < per; ++i) {
      for (int d = 0; d < dims; ++d) points(c * per + i, d) = (d % 2 ? u : v) + noise(rng);
      truth.push_back(c);
    }
  }
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const KMeansResult r = kmeans(points, k, seed);
    CHECK(adjusted_rand_index(r.labels, truth) == doctest::Approx(1.0));
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
    }
  }
  CHECK_THROWS_AS(kmeans(points, 0, 0), InvalidArgument);
}

TEST_CASE("signed rendering maps sign to hue") {
  Eigen::MatrixXd m(1, 3);
  m << -1.0, 0.0, 1.0;
  const Frame f = render_signed(m, 1.0);
  CHECK(f[2] > f[0]);   // negative: blue over red
  CHECK(f[6] > f[8]);   // positive: red over blue
  CHECK(f[3] == f[5]);  // zero: gray
  const auto [left, right] = half_means(m);
  CHECK(left < right);
}

// --- generator evaluation ---------------------------------------------------------------

TEST_CASE("eval cases and generated outputs line up with the task") {
  std::vector<Video> videos{synth_video(Category::kBloom, 1), synth_video(Category::kBloom, 2)};
  const auto pair_cases = make_eval_cases(Task::kPairwise, videos, 10, 3, 2);
  for (const auto& c : pair_cases) {
    CHECK(c.condition == 2);
    CHECK(c.input_frames.size() == 1);
  }
  const auto triple_cases = make_eval_cases(Task::kTwoStack, videos, 10, 3, {}, 0.1);
  for (const auto& c : triple_cases) CHECK(c.input_frames.size() == 2);
  const auto group_cases = make_eval_cases(Task::kRecurrent, videos, 6, 3);
  for (const auto& c : group_cases) CHECK(c.target_frames.size() == 4);

  RecurrentGenerator<float> g(ModelConfig::tiny(ModelKind::kRecurrent), 1);
  const auto outputs = generate_cases(g, videos, group_cases, 4);
  REQUIRE(outputs.size() == 6);
  CHECK(outputs[0].size() == 4);
  const MetricRow row = evaluate_reconstruction(g, videos, group_cases);
  CHECK(row.samples == 24);
  CHECK(std::abs(row.psnr - aggregate_metrics(row.per_sample).psnr) < 1e-12);
}
