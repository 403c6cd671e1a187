#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tlgen/image.hpp"

namespace tlgen {

enum class Category { kBloom, kMelt, kBake, kRot };

std::string to_string(Category category);
Category parse_category(const std::string& text);
inline constexpr std::array<Category, 4> kAllCategories{Category::kBloom, Category::kMelt,
                                                        Category::kBake, Category::kRot};

/// Thrown when degree annotations cannot produce per-frame degrees.
class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-seed rendering parameters of a synthetic object.
struct ObjectParams {
  double center_x = 32.0, center_y = 32.0;     // pixels, jittered by up to +-8
  double size = 1.0;                           // multiplier in [0.8, 1.2]
  std::array<double, 3> color{};               // object base colour in [0,1]
  std::array<double, 3> background{};          // background base colour in [0,1]
  double phase = 0.0;                          // petal / patch angular offset
  std::vector<std::array<double, 2>> patches;  // rot patch centres, offsets from centre
};

struct Video {
  std::string id;
  Category category = Category::kBloom;
  std::uint64_t seed = 0;
  std::vector<Frame> frames;
  /// Degree per frame; empty where the frame lies outside the annotated span.
  std::vector<std::optional<double>> degrees;
  ObjectParams object;

  std::size_t frame_count() const { return frames.size(); }
};

inline constexpr int kDefaultFrameCount = 41;
inline constexpr int kMinFrameCount = 11;
/// Bloom disk radius at degree 0 and 1, before the size multiplier.
inline constexpr double kBloomStartRadius = 5.0;
inline constexpr double kBloomEndRadius = 15.0;

/// Renders a video whose frame k shows degree k / (n_frames - 1).
Video synth_video(Category category, std::uint64_t seed, int n_frames = kDefaultFrameCount);
/// One frame of the parametric transformation at degree `s` in [0,1].
Frame render_object(Category category, const ObjectParams& object, double s);
ObjectParams sample_object(Category category, std::uint64_t seed);
/// Bloom disk radius (petal modulation excluded) at degree `s`.
double bloom_radius(const ObjectParams& object, double s);

/// Scalar progress statistics on [-1,1] frames.
/// Pixels whose luma exceeds 0.5.
Index bright_area(const Frame& frame);
/// Pixels whose luma falls below `threshold`.
Index dark_area(const Frame& frame, double threshold);
/// Rows spanned by pixels whose luma differs from the leftmost pixel of their
/// row by more than 0.1.
Index object_height(const Frame& frame);

/// Monotone statistic per category: bright area (bloom), object height (melt),
/// object area (bake), dark-patch area (rot).
double progress_statistic(Category category, const Frame& frame);

// --- degree annotations ------------------------------------------------------

struct Anchor {
  int frame_index = 0;
  double degree = 0.0;
  bool operator==(const Anchor&) const = default;
};

inline constexpr std::array<double, 5> kReferenceDegrees{0.0, 0.25, 0.5, 0.75, 1.0};

struct DegreeAnnotationFile {
  /// Annotator name -> anchors (strictly increasing in frame and degree).
  std::vector<std::pair<std::string, std::vector<Anchor>>> annotators;

  void validate() const;
  static DegreeAnnotationFile parse(const std::string& text);
  static DegreeAnnotationFile load(const std::string& path);
  std::string to_text() const;
};

/// Per reference degree, the median of the annotators' frame indices (lower
/// median for even counts). Degrees no annotator labelled are omitted.
std::vector<Anchor> aggregate_annotations(const DegreeAnnotationFile& file);

/// Piecewise-linear degrees between anchors; frames outside the anchored span
/// carry no degree. Throws AnnotationError for fewer than two anchors.
std::vector<std::optional<double>> interpolate_degrees(std::span<const Anchor> anchors,
                                                       int n_frames);

// --- split and sampling ------------------------------------------------------

struct VideoSplit {
  std::vector<Video> train;
  std::vector<Video> test;
};

/// Shuffled split at video granularity; train receives floor(ratio * n).
VideoSplit split_videos(std::vector<Video> videos, double ratio, std::uint64_t seed);

/// Nearest-frame matching tolerance in degrees.
inline constexpr double kDegreeTolerance = 0.02;

struct PairSample {
  std::size_t video = 0;
  std::size_t input = 0, target = 0;
  int condition = 0;  // target offset = 0.25 * condition
};

struct TripleSample {
  std::size_t video = 0;
  std::size_t first = 0, second = 0, target = 0;  // t, t+m, t+2m
  double interval = 0.0;                          // m
};

struct GroupSample {
  std::size_t video = 0;
  std::size_t input = 0;
  std::array<std::size_t, 4> targets{};  // offsets 0, 0.1, 0.2, 0.3
};

inline constexpr std::array<double, 6> kTripleIntervals{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr std::array<double, 4> kGroupOffsets{0.0, 0.1, 0.2, 0.3};

/// Uniform over condition index; (video, input frame) drawn uniformly until
/// the offset is realizable. Indices refer to `videos`.
std::vector<PairSample> sample_pairs(std::span<const Video> videos, std::size_t count,
                                     std::uint64_t seed);
/// Uniform over the six intervals. `interval_filter`, when set, fixes m.
std::vector<TripleSample> sample_triples(std::span<const Video> videos, std::size_t count,
                                         std::uint64_t seed,
                                         std::optional<double> interval_filter = std::nullopt);
std::vector<GroupSample> sample_groups(std::span<const Video> videos, std::size_t count,
                                       std::uint64_t seed);

/// Index of the labelled frame whose degree is nearest `degree`, if within
/// `tolerance`.
std::optional<std::size_t> nearest_frame(const Video& video, double degree,
                                         double tolerance = kDegreeTolerance);

// --- augmentation ------------------------------------------------------------

struct AugmentParams {
  double crop_scale = 1.0;            // side of the crop window / frame side, in [0.8, 1]
  double crop_x = 0.0, crop_y = 0.0;  // top-left corner in pixels
  bool flip = false;
};

AugmentParams draw_augment(std::mt19937_64& rng, Index size = 64);
/// Crops the window and resizes it back with bilinear sampling, then flips.
Frame apply_augment(const Frame& frame, const AugmentParams& params);
/// Draws one crop/flip and applies it to every frame of a sample.
AugmentParams augment(std::span<Frame> frames, std::uint64_t seed);

/// Static procedural images for reconstruction pre-training.
std::vector<Frame> make_reconstruction_corpus(std::size_t n, std::uint64_t seed);

// --- on-disk dataset -----------------------------------------------------------

/// Writes frames, degree sidecars and `manifest.txt` under `directory`.
void write_dataset(const std::string& directory, std::span<const Video> videos);
/// Loads a dataset from a manifest path.
std::vector<Video> load_dataset(const std::string& manifest_path);

struct DatasetStats {
  std::map<Category, std::size_t> videos;
  std::map<Category, std::size_t> frames;
  std::map<Category, std::size_t> labelled_frames;
};
DatasetStats dataset_stats(std::span<const Video> videos);
std::string format_stats(const DatasetStats& stats);

}  // namespace tlgen
