#include "tlgen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "tlgen/seed.hpp"

namespace tlgen {

namespace {

void require_same_frames(const char* op, const Frame& a, const Frame& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
  if (a.rank() != 3 || a.dim(2) != 3) {
    throw InvalidArgument(std::string(op) + ": expected [H,W,3] frames, got " +
                          shape_string(a.shape()));
  }
}

// Channel `c` of a [-1,1] frame as an [H,W] matrix in [0,1].
Eigen::MatrixXd unit_channel(const Frame& f, Index c) {
  const Index h = f.dim(0), w = f.dim(1);
  Eigen::MatrixXd m(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) m(y, x) = 0.5 * static_cast<double>(f[(y * w + x) * 3 + c]) + 0.5;
  }
  return m;
}

Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double mid = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g(i) = std::exp(-(i - mid) * (i - mid) / (2 * sigma * sigma));
  return g / g.sum();
}

// Separable 'valid' correlation.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& m, const Eigen::VectorXd& g) {
  const Index k = g.size();
  const Index h = m.rows() - k + 1, w = m.cols() - k + 1;
  Eigen::MatrixXd rows(h, m.cols());
  for (Index y = 0; y < h; ++y) rows.row(y) = g.transpose() * m.middleRows(y, k);
  Eigen::MatrixXd out(h, w);
  for (Index x = 0; x < w; ++x) out.col(x) = rows.middleCols(x, k) * g;
  return out;
}

}  // namespace

double mse(const Frame& a, const Frame& b) {
  require_same_frames("mse", a, b);
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double d = 0.5 * (static_cast<double>(a[i]) - static_cast<double>(b[i]));
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(1.0 / m);
}

double psnr(const Frame& a, const Frame& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Frame& a, const Frame& b) {
  require_same_frames("ssim", a, b);
  constexpr int kWindow = 11;
  if (a.dim(0) < kWindow || a.dim(1) < kWindow) {
    throw InvalidArgument("ssim: frames must be at least 11x11");
  }
  const Eigen::VectorXd g = gaussian_window(kWindow, 1.5);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (Index c = 0; c < 3; ++c) {
    const Eigen::MatrixXd x = unit_channel(a, c), y = unit_channel(b, c);
    const Eigen::ArrayXXd mx = filter_valid(x, g).array(), my = filter_valid(y, g).array();
    const Eigen::ArrayXXd sxx = filter_valid(x.cwiseProduct(x), g).array() - mx * mx;
    const Eigen::ArrayXXd syy = filter_valid(y.cwiseProduct(y), g).array() - my * my;
    const Eigen::ArrayXXd sxy = filter_valid(x.cwiseProduct(y), g).array() - mx * my;
    const Eigen::ArrayXXd map =
        ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    total += map.mean();
  }
  return total / 3.0;
}

FrameMetrics frame_metrics(const Frame& a, const Frame& b) {
  FrameMetrics m;
  m.mse = mse(a, b);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim(a, b);
  return m;
}

// ---------------------------------------------------------------------------
// Generator evaluation

std::vector<EvalCase> make_eval_cases(Task task, std::span<const Video> videos, std::size_t count,
                                      std::uint64_t seed, std::optional<int> condition,
                                      std::optional<double> interval) {
  if (videos.empty() || count == 0) throw InvalidArgument("make_eval_cases: empty test set");
  std::vector<EvalCase> cases;
  switch (task) {
    case Task::kPairwise: {
      if (condition) {
        if (*condition < 0 || *condition > 3) throw InvalidArgument("condition must be in 0..3");
        // Realizable (video, frame) starts for this offset, drawn uniformly.
        std::vector<std::pair<std::size_t, std::size_t>> starts;
        std::vector<std::size_t> targets;
        for (std::size_t v = 0; v < videos.size(); ++v) {
          for (std::size_t f = 0; f < videos[v].degrees.size(); ++f) {
            if (!videos[v].degrees[f]) continue;
            auto t = *condition == 0
                         ? std::optional(f)
                         : nearest_frame(videos[v], *videos[v].degrees[f] + 0.25 * *condition);
            if (!t) continue;
            starts.emplace_back(v, f);
            targets.push_back(*t);
          }
        }
        if (starts.empty()) throw InvalidArgument("make_eval_cases: offset not realizable");
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t j = pick(rng);
          cases.push_back({starts[j].first, {starts[j].second}, *condition, {targets[j]}});
        }
      } else {
        for (const auto& p : sample_pairs(videos, count, seed)) {
          cases.push_back({p.video, {p.input}, p.condition, {p.target}});
        }
      }
      break;
    }
    case Task::kTwoStack:
      for (const auto& t : sample_triples(videos, count, seed, interval)) {
        cases.push_back({t.video, {t.first, t.second}, -1, {t.target}});
      }
      break;
    case Task::kRecurrent:
      for (const auto& g : sample_groups(videos, count, seed)) {
        cases.push_back({g.video, {g.input}, -1, {g.targets.begin(), g.targets.end()}});
      }
      break;
  }
  return cases;
}

std::vector<std::vector<Frame>> generate_cases(Generator<float>& g, std::span<const Video> videos,
                                               std::span<const EvalCase> cases,
                                               std::size_t batch_size) {
  std::vector<std::vector<Frame>> out;
  out.reserve(cases.size());
  for (std::size_t begin = 0; begin < cases.size(); begin += batch_size) {
    const std::size_t end = std::min(cases.size(), begin + batch_size);
    std::vector<const Frame*> first, second;
    std::vector<int> conditions;
    for (std::size_t i = begin; i < end; ++i) {
      const EvalCase& c = cases[i];
      const Video& v = videos[c.video];
      first.push_back(&v.frames[c.input_frames.at(0)]);
      if (c.input_frames.size() > 1) second.push_back(&v.frames[c.input_frames[1]]);
      if (c.condition >= 0) conditions.push_back(c.condition);
    }
    GeneratorInput<float> input;
    input.image = Var<float>(stack_frames(first));
    if (!second.empty()) input.second_image = Var<float>(stack_frames(second));
    if (!conditions.empty()) input.condition = Var<float>(condition_batch<float>(conditions));
    const std::vector<Var<float>> steps = g.generate(input, Mode::kEval);
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<Frame> frames;
      for (const auto& s : steps)
        frames.push_back(batch_frame(s.value(), static_cast<Index>(i - begin)));
      out.push_back(std::move(frames));
    }
  }
  return out;
}

MetricRow aggregate_metrics(std::span<const FrameMetrics> samples) {
  if (samples.empty()) throw InvalidArgument("aggregate_metrics: no samples");
  MetricRow row;
  for (const auto& m : samples) {
    row.psnr += m.psnr;
    row.ssim += m.ssim;
    row.mse += m.mse;
  }
  const auto n = static_cast<double>(samples.size());
  row.psnr /= n;
  row.ssim /= n;
  row.mse /= n;
  row.samples = samples.size();
  row.per_sample.assign(samples.begin(), samples.end());
  return row;
}

MetricRow evaluate_reconstruction(Generator<float>& g, std::span<const Video> videos,
                                  std::span<const EvalCase> cases) {
  if (cases.empty()) throw InvalidArgument("evaluate_reconstruction: empty test set");
  const auto outputs = generate_cases(g, videos, cases);
  std::vector<FrameMetrics> samples;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Video& v = videos[cases[i].video];
    if (outputs[i].size() != cases[i].target_frames.size()) {
      throw InvalidArgument("evaluate_reconstruction: step count does not match targets");
    }
    for (std::size_t s = 0; s < outputs[i].size(); ++s) {
      samples.push_back(frame_metrics(outputs[i][s], v.frames[cases[i].target_frames[s]]));
    }
  }
  return aggregate_metrics(samples);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "| task | regime | category | PSNR | SSIM | MSE | n |\n";
  os << "|---|---|---|---|---|---|---|\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << "| " << r.task << " | " << r.regime << " | " << r.category << " | " << r.psnr << " | "
       << r.ssim << " | " << r.mse << " | " << r.samples << " |\n";
  }
  if (top1) os << "retrieval top1 " << *top1 << "\n";
  if (top5) os << "retrieval top5 " << *top5 << "\n";
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row{
        {"task", r.task}, {"regime", r.regime}, {"category", r.category}, {"psnr", r.psnr},
        {"ssim", r.ssim}, {"mse", r.mse},       {"samples", r.samples}};
    auto& per = row["per_sample"] = nlohmann::ordered_json::array();
    for (const auto& m : r.per_sample)
      per.push_back({{"mse", m.mse}, {"psnr", m.psnr}, {"ssim", m.ssim}});
    j["rows"].push_back(std::move(row));
  }
  if (top1) j["retrieval_top1"] = *top1;
  if (top5) j["retrieval_top5"] = *top5;
  j["artifacts"] = artifacts;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Retrieval

std::vector<std::size_t> rank_frames(const Frame& query, std::span<const Frame> database) {
  std::vector<double> dist(database.size());
  for (std::size_t i = 0; i < database.size(); ++i) dist[i] = mse(query, database[i]);
  std::vector<std::size_t> order(database.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

bool retrieval_hit(std::span<const std::size_t> ranking, std::size_t truth, std::size_t n,
                   double window, std::size_t k) {
  const double radius = window * static_cast<double>(n) + 1e-9;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    const double gap = std::abs(static_cast<double>(ranking[i]) - static_cast<double>(truth));
    if (gap <= radius) return true;
  }
  return false;
}

double null_hit_rate(std::size_t n, double window) {
  const double radius = window * static_cast<double>(n) + 1e-9;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < n; ++t) {
      hits += std::abs(static_cast<double>(r) - static_cast<double>(t)) <= radius;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n * n);
}

RetrievalResult score_retrieval(std::span<const Frame> queries, std::span<const Video> videos,
                                std::span<const EvalCase> cases, double window) {
  RetrievalResult r;
  std::size_t q = 0;
  for (const EvalCase& c : cases) {
    const Video& v = videos[c.video];
    if (v.frames.size() < 5) {
      throw InvalidArgument("retrieval: video " + v.id + " has fewer than 5 frames");
    }
    for (std::size_t truth : c.target_frames) {
      if (q >= queries.size()) throw InvalidArgument("retrieval: fewer queries than targets");
      const auto ranking = rank_frames(queries[q++], v.frames);
      r.top1 += retrieval_hit(ranking, truth, v.frames.size(), window, 1);
      r.top5 += retrieval_hit(ranking, truth, v.frames.size(), window, 5);
      ++r.queries;
    }
  }
  if (q != queries.size()) throw InvalidArgument("retrieval: more queries than targets");
  if (r.queries == 0) throw InvalidArgument("retrieval: no queries");
  r.top1 /= static_cast<double>(r.queries);
  r.top5 /= static_cast<double>(r.queries);
  return r;
}

RetrievalResult retrieval_experiment(Generator<float>& g, std::span<const Video> videos,
                                     std::span<const EvalCase> cases, double window) {
  for (const EvalCase& c : cases) {
    if (videos[c.video].frames.size() < 5) {
      throw InvalidArgument("retrieval: video " + videos[c.video].id + " has fewer than 5 frames");
    }
  }
  std::vector<Frame> queries;
  for (auto& steps : generate_cases(g, videos, cases)) {
    for (auto& f : steps) queries.push_back(std::move(f));
  }
  return score_retrieval(queries, videos, cases, window);
}

// ---------------------------------------------------------------------------
// Optical flow

FlowField optical_flow(const Frame& a, const Frame& b, HornSchunckOptions options) {
  require_same_frames("optical_flow", a, b);
  const Eigen::MatrixXd e0 = luminance(a).cast<double>(), e1 = luminance(b).cast<double>();
  const Index h = e0.rows(), w = e0.cols();
  auto at = [&](const Eigen::MatrixXd& m, Index y, Index x) {
    return m(std::clamp<Index>(y, 0, h - 1), std::clamp<Index>(x, 0, w - 1));
  };
  // Derivatives averaged over the 2x2x2 cube.
  Eigen::MatrixXd ex(h, w), ey(h, w), et(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double gx = 0, gy = 0, gt = 0;
      for (const Eigen::MatrixXd* m : {&e0, &e1}) {
        gx += at(*m, y, x + 1) - at(*m, y, x) + at(*m, y + 1, x + 1) - at(*m, y + 1, x);
        gy += at(*m, y + 1, x) - at(*m, y, x) + at(*m, y + 1, x + 1) - at(*m, y, x + 1);
      }
      gt = at(e1, y, x) - at(e0, y, x) + at(e1, y + 1, x) - at(e0, y + 1, x) + at(e1, y, x + 1) -
           at(e0, y, x + 1) + at(e1, y + 1, x + 1) - at(e0, y + 1, x + 1);
      ex(y, x) = gx / 4;
      ey(y, x) = gy / 4;
      et(y, x) = gt / 4;
    }
  }
  const double a2 = options.alpha * options.alpha;
  const Eigen::MatrixXd denom = (ex.array().square() + ey.array().square() + a2).matrix();
  auto average = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(h, w);
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        out(y, x) = (at(m, y - 1, x) + at(m, y + 1, x) + at(m, y, x - 1) + at(m, y, x + 1)) / 6.0 +
                    (at(m, y - 1, x - 1) + at(m, y - 1, x + 1) + at(m, y + 1, x - 1) +
                     at(m, y + 1, x + 1)) /
                        12.0;
      }
    }
    return out;
  };
  FlowField f{Eigen::MatrixXd::Zero(h, w), Eigen::MatrixXd::Zero(h, w)};
  for (int it = 0; it < options.iterations; ++it) {
    const Eigen::MatrixXd ub = average(f.u), vb = average(f.v);
    const Eigen::ArrayXXd r =
        (ex.array() * ub.array() + ey.array() * vb.array() + et.array()) / denom.array();
    f.u = (ub.array() - ex.array() * r).matrix();
    f.v = (vb.array() - ey.array() * r).matrix();
  }
  return f;
}

// ---------------------------------------------------------------------------
// k-means

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iterations) {
  const Index n = points.rows();
  if (k < 1) throw InvalidArgument("kmeans: k must be >= 1");
  if (n < k) {
    throw InvalidArgument("kmeans: " + std::to_string(n) + " points cannot form " +
                          std::to_string(k) + " clusters");
  }
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids.resize(k, points.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Index> first(0, n - 1);
  r.centroids.row(0) = points.row(first(rng));
  Eigen::VectorXd d2 = (points.rowwise() - r.centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Index pick = 0;
    if (d2.sum() > 0) {
      std::discrete_distribution<Index> dist(d2.data(), d2.data() + n);
      pick = dist(rng);
    } else {
      pick = first(rng);
    }
    r.centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - r.centroids.row(c)).rowwise().squaredNorm());
  }

  r.labels.assign(static_cast<std::size_t>(n), -1);
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    bool changed = false;
    double objective = 0.0;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - r.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      objective += best_d;
      if (r.labels[static_cast<std::size_t>(i)] != best) changed = true;
      r.labels[static_cast<std::size_t>(i)] = best;
    }
    r.objective.push_back(objective);
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = r.labels[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      // An empty cluster keeps its previous centroid.
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  return r;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty())
    throw InvalidArgument("adjusted_rand_index: size mismatch");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto pairs = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [key, count] : table) index += pairs(count);
  for (const auto& [key, count] : rows) sum_rows += pairs(count);
  for (const auto& [key, count] : cols) sum_cols += pairs(count);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Flow clustering

std::vector<FlowClusterMap> flow_cluster_visualization(Generator<float>& g,
                                                       std::span<const Frame> inputs, int k,
                                                       std::uint64_t seed) {
  if (g.config().kind != ModelKind::kRecurrent) {
    throw InvalidArgument("flow_cluster_visualization: needs a recurrent generator");
  }
  if (inputs.size() < static_cast<std::size_t>(std::max(k, 1))) {
    throw InvalidArgument("flow_cluster_visualization: " + std::to_string(inputs.size()) +
                          " inputs for k = " + std::to_string(k));
  }
  // Wrap the inputs as a one-frame-per-video set so generate_cases can batch them.
  std::vector<Video> holders(inputs.size());
  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    holders[i].frames = {inputs[i]};
    cases.push_back({i, {0}, -1, {}});
  }
  const auto outputs = generate_cases(g, holders, cases);

  std::vector<FlowClusterMap> maps;
  const Index h = inputs.front().dim(0), w = inputs.front().dim(1);
  for (int step = 2; step <= 4; ++step) {
    std::vector<FlowField> flows;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      flows.push_back(optical_flow(inputs[i], outputs[i][static_cast<std::size_t>(step - 1)]));
    }
    for (char axis : {'u', 'v'}) {
      Eigen::MatrixXd points(static_cast<Index>(flows.size()), h * w);
      for (std::size_t i = 0; i < flows.size(); ++i) {
        const Eigen::MatrixXd& m = axis == 'u' ? flows[i].u : flows[i].v;
        points.row(static_cast<Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(m.data(), h * w);
      }
      const KMeansResult km = kmeans(
          points, k,
          derive_seed(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(axis)}));
      FlowClusterMap fm{step, axis, km.labels, {}};
      for (int c = 0; c < k; ++c) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(h, w);
        int count = 0;
        for (std::size_t i = 0; i < flows.size(); ++i) {
          if (km.labels[i] != c) continue;
          mean += axis == 'u' ? flows[i].u : flows[i].v;
          ++count;
        }
        if (count > 0) mean /= count;
        fm.means.push_back(std::move(mean));
      }
      maps.push_back(std::move(fm));
    }
  }
  return maps;
}

Frame render_signed(const Eigen::MatrixXd& map, double scale) {
  Frame f = make_frame(map.rows(), map.cols());
  const double s = scale > 0 ? scale : 1.0;
  for (Index y = 0; y < map.rows(); ++y) {
    for (Index x = 0; x < map.cols(); ++x) {
      const double t = std::clamp(map(y, x) / s, -1.0, 1.0);
      // Gray 0.5 at zero; red for positive, blue for negative.
      const double r = t > 0 ? 0.5 + 0.5 * t : 0.5 * (1 + t);
      const double gch = 0.5 * (1 - std::abs(t));
      const double b = t < 0 ? 0.5 - 0.5 * t : 0.5 * (1 - t);
      float* p = f.ptr() + (y * map.cols() + x) * 3;
      p[0] = from_unit(static_cast<float>(r));
      p[1] = from_unit(static_cast<float>(gch));
      p[2] = from_unit(static_cast<float>(b));
    }
  }
  return f;
}

std::vector<std::string> write_flow_clusters(std::span<const FlowClusterMap> maps,
                                             const std::string& directory) {
  std::filesystem::create_directories(directory);
  std::vector<std::string> paths;
  for (char axis : {'u', 'v'}) {
    double scale = 1e-6;
    std::map<int, const FlowClusterMap*> by_step;
    for (const auto& m : maps) {
      if (m.axis != axis) continue;
      by_step[m.step] = &m;
      for (const auto& mean : m.means) scale = std::max(scale, mean.cwiseAbs().maxCoeff());
    }
    if (by_step.empty()) continue;
    const std::size_t k = by_step.begin()->second->means.size();
    std::vector<std::vector<Frame>> rows(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (const auto& [step, m] : by_step) rows[c].push_back(render_signed(m->means[c], scale));
    }
    const std::string path =
        (std::filesystem::path(directory) / (std::string("flow_") + axis + ".ppm")).string();
    write_ppm(path, tile_frames(rows));
    paths.push_back(path);
  }
  return paths;
}

std::pair<double, double> half_means(const Eigen::MatrixXd& map) {
  const Index half = map.cols() / 2;
  return {map.leftCols(half).mean(), map.rightCols(map.cols() - half).mean()};
}

}  // namespace tlgen
