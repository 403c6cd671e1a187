#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tlgen/dataset.hpp"
#include "tlgen/models.hpp"
#include "tlgen/training.hpp"

namespace tlgen {

// --- frame metrics (on the [0,1] rescale) --------------------------------------

inline constexpr double kPsnrCap = 100.0;

double mse(const Frame& a, const Frame& b);
/// 10 log10(1 / mse), capped at kPsnrCap when mse < 1e-10.
double psnr_from_mse(double mse);
double psnr(const Frame& a, const Frame& b);
/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1) over the
/// valid region, averaged over channels.
double ssim(const Frame& a, const Frame& b);

struct FrameMetrics {
  double mse = 0, psnr = 0, ssim = 0;
};
FrameMetrics frame_metrics(const Frame& a, const Frame& b);

// --- generator evaluation ---------------------------------------------------------

/// One evaluation input with its ground truth, laid out for the task.
struct EvalCase {
  std::size_t video = 0;
  std::vector<std::size_t> input_frames;   // 1 (pairwise, recurrent) or 2 (two-stack)
  int condition = -1;                      // pairwise only
  std::vector<std::size_t> target_frames;  // 1, or 4 for recurrent
};

/// Cases drawn with the training samplers (no augmentation). `condition`,
/// when set, fixes the pairwise offset; `interval` fixes the two-stack m.
std::vector<EvalCase> make_eval_cases(Task task, std::span<const Video> videos, std::size_t count,
                                      std::uint64_t seed, std::optional<int> condition = {},
                                      std::optional<double> interval = {});

/// Runs the generator in eval mode; one output list (per step) per case.
std::vector<std::vector<Frame>> generate_cases(Generator<float>& g, std::span<const Video> videos,
                                               std::span<const EvalCase> cases,
                                               std::size_t batch_size = 16);

struct MetricRow {
  std::string task, regime, category;
  double psnr = 0, ssim = 0, mse = 0;  // means over per_sample
  std::size_t samples = 0;
  std::vector<FrameMetrics> per_sample;
};

/// Per-sample metrics of every generated step against its ground truth,
/// aggregated as means in case order.
MetricRow evaluate_reconstruction(Generator<float>& g, std::span<const Video> videos,
                                  std::span<const EvalCase> cases);
/// Aggregates precomputed per-sample metrics.
MetricRow aggregate_metrics(std::span<const FrameMetrics> samples);

struct EvalReport {
  std::vector<MetricRow> rows;
  std::optional<double> top1, top5;
  std::vector<std::string> artifacts;

  /// Pipe-delimited table with PSNR / SSIM / MSE columns.
  std::string to_table() const;
  std::string to_json() const;
};

// --- retrieval ------------------------------------------------------------------

/// Database indices sorted by decreasing similarity (negative MSE), ties by
/// index.
std::vector<std::size_t> rank_frames(const Frame& query, std::span<const Frame> database);
/// Whether any of the first `k` ranks lies within window * n of `truth`.
bool retrieval_hit(std::span<const std::size_t> ranking, std::size_t truth, std::size_t n,
                   double window, std::size_t k);
/// Probability that a uniformly random frame lies within window * n of a
/// uniformly random truth.
double null_hit_rate(std::size_t n, double window);

struct RetrievalResult {
  double top1 = 0, top5 = 0;
  std::size_t queries = 0;
};

/// Each query is a generated frame; its database is every frame of its source
/// video. Throws InvalidArgument for videos shorter than 5 frames.
RetrievalResult retrieval_experiment(Generator<float>& g, std::span<const Video> videos,
                                     std::span<const EvalCase> cases, double window = 0.2);
/// Queries that are already frames; scoring as above.
RetrievalResult score_retrieval(std::span<const Frame> queries, std::span<const Video> videos,
                                std::span<const EvalCase> cases, double window = 0.2);

// --- optical flow and clustering ---------------------------------------------------

struct FlowField {
  Eigen::MatrixXd u, v;  // pixels; u rightward, v downward
};

struct HornSchunckOptions {
  double alpha = 0.1;
  int iterations = 100;
};

/// Dense Horn-Schunck flow from a to b on ITU-601 luma in [0,1].
FlowField optical_flow(const Frame& a, const Frame& b, HornSchunckOptions options = {});

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;      // k x d
  std::vector<double> objective;  // after each assignment step
  int iterations = 0;
};

/// Rows of `points` are samples. Seeded k-means++ initialization followed by
/// Lloyd iterations until the assignment is stable or `max_iterations`.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iterations = 100);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct FlowClusterMap {
  int step = 0;  // generated step (2, 3 or 4)
  char axis = 'u';
  std::vector<int> labels;             // per input
  std::vector<Eigen::MatrixXd> means;  // per cluster, 64x64
};

/// Flow from each input to generated steps 2..4, clustered per step and axis.
std::vector<FlowClusterMap> flow_cluster_visualization(Generator<float>& g,
                                                       std::span<const Frame> inputs, int k,
                                                       std::uint64_t seed);

/// Diverging map: negative blue, zero neutral gray, positive red; |value| =
/// `scale` saturates.
Frame render_signed(const Eigen::MatrixXd& map, double scale);
/// Grid image per axis: rows are clusters, columns are steps.
std::vector<std::string> write_flow_clusters(std::span<const FlowClusterMap> maps,
                                             const std::string& directory);

/// Mean of `map` over the left and right halves of the columns.
std::pair<double, double> half_means(const Eigen::MatrixXd& map);

}  // namespace tlgen
