#include "tlgen/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace tlgen {

namespace fs = std::filesystem;

std::string to_string(Category category) {
  switch (category) {
    case Category::kBloom:
      return "bloom";
    case Category::kMelt:
      return "melt";
    case Category::kBake:
      return "bake";
    case Category::kRot:
      return "rot";
  }
  return "unknown";
}

Category parse_category(const std::string& text) {
  for (Category c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  throw InvalidArgument("unknown category '" + text + "'");
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

using Rgb = std::array<double, 3>;

Rgb hsv(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0:
      return {v, t, p};
    case 1:
      return {q, v, p};
    case 2:
      return {p, v, t};
    case 3:
      return {p, q, v};
    case 4:
      return {t, p, v};
    default:
      return {v, p, q};
  }
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

double coverage(double signed_distance) { return std::clamp(signed_distance + 0.5, 0.0, 1.0); }

std::uint64_t category_salt(Category c) {
  return 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(c) + 1);
}

constexpr Rgb kBloomCenter{1.0, 0.85, 0.2};
constexpr Rgb kBrown{0.5, 0.28, 0.1};
constexpr Rgb kRotPatch{0.16, 0.11, 0.06};

// Per-pixel canvas in [0,1] that converts to a quantized [-1,1] frame.
struct Canvas {
  std::vector<Rgb> px = std::vector<Rgb>(64 * 64);
  Rgb& at(int x, int y) { return px[static_cast<std::size_t>(y * 64 + x)]; }
  void blend(int x, int y, const Rgb& c, double alpha) {
    if (alpha > 0.0) at(x, y) = mix(at(x, y), c, alpha);
  }
  Frame to_frame() const {
    Frame f = make_frame();
    for (std::size_t i = 0; i < px.size(); ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        f[static_cast<Index>(i * 3 + k)] = from_unit(static_cast<float>(px[i][k]));
      }
    }
    quantize_8bit(f);
    return f;
  }
};

Canvas background(const ObjectParams& o) {
  Canvas c;
  for (int y = 0; y < 64; ++y) {
    const double shade = 0.9 + 0.2 * y / 63.0;
    for (int x = 0; x < 64; ++x) {
      c.at(x, y) = {std::min(1.0, o.background[0] * shade), std::min(1.0, o.background[1] * shade),
                    std::min(1.0, o.background[2] * shade)};
    }
  }
  return c;
}

}  // namespace

ObjectParams sample_object(Category category, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ category_salt(category));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ObjectParams o;
  o.center_x = 32.0 + (u(rng) * 16.0 - 8.0);
  o.center_y = 32.0 + (u(rng) * 16.0 - 8.0);
  o.size = 0.8 + 0.4 * u(rng);
  o.phase = u(rng) * 2.0 * std::numbers::pi;
  const double hue = u(rng);
  const double bg_hue = u(rng);
  switch (category) {
    case Category::kBloom:
      o.color = hsv(hue, 0.2 + 0.25 * u(rng), 1.0);
      o.background = hsv(bg_hue, 0.3 + 0.3 * u(rng), 0.15 + 0.1 * u(rng));
      break;
    case Category::kMelt:
      o.color = hsv(hue, 0.15 + 0.35 * u(rng), 0.85 + 0.15 * u(rng));
      o.background = hsv(bg_hue, 0.3 + 0.3 * u(rng), 0.15 + 0.15 * u(rng));
      break;
    case Category::kBake:
      // Very dark surface so that the browned crust still reads as object.
      o.color = hsv(0.1 + 0.05 * u(rng), 0.25 + 0.15 * u(rng), 0.9 + 0.1 * u(rng));
      o.background = hsv(bg_hue, 0.3 + 0.3 * u(rng), 0.05 + 0.07 * u(rng));
      break;
    case Category::kRot:
      // Mid-luma fruit on a light surface so that only the patches read dark.
      o.color = hsv(hue * 0.35, 0.6 + 0.2 * u(rng), 0.8 + 0.15 * u(rng));
      o.background = hsv(bg_hue, 0.05 + 0.1 * u(rng), 0.8 + 0.15 * u(rng));
      for (int k = 0; k < 5; ++k) {
        const double a = o.phase + 2.0 * std::numbers::pi * k / 5.0;
        o.patches.push_back({std::cos(a), std::sin(a)});
      }
      break;
  }
  return o;
}

double bloom_radius(const ObjectParams& o, double s) {
  return o.size * (kBloomStartRadius + (kBloomEndRadius - kBloomStartRadius) * s);
}

Frame render_object(Category category, const ObjectParams& o, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("render_object: degree outside [0,1]");
  Canvas c = background(o);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double dx = x + 0.5 - o.center_x, dy = y + 0.5 - o.center_y;
      const double r = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      switch (category) {
        case Category::kBloom: {
          const double R = bloom_radius(o, s);
          const double boundary = R * (1.0 + 0.2 * s * std::cos(6.0 * theta + o.phase));
          c.blend(x, y, o.color, coverage(boundary - r));
          c.blend(x, y, kBloomCenter, coverage(0.3 * R - r));
          break;
        }
        case Category::kMelt: {
          const double half_w = 12.0 * o.size * (1.0 + 0.5 * s);
          const double height = 20.0 * o.size * (1.0 - 0.7 * s);
          const double base = o.center_y + 10.0 * o.size;
          const double up = base - (y + 0.5);
          const double q = std::hypot(dx / half_w, std::max(up, 0.0) / height);
          const double d = std::min((1.0 - q) * std::min(half_w, height), up);
          c.blend(x, y, o.color, coverage(d));
          break;
        }
        case Category::kBake: {
          const double k = 1.0 + 0.4 * s;
          const double a = 12.0 * o.size * k, b = 8.0 * o.size * k;
          const double q = std::hypot(dx / a, dy / b);
          c.blend(x, y, mix(o.color, kBrown, s), coverage((1.0 - q) * b));
          break;
        }
        case Category::kRot: {
          const double R = 14.0 * o.size;
          c.blend(x, y, o.color, coverage(R - r));
          // Non-overlapping patches inside the fruit; total area grows with s.
          const double pr = 0.3 * R * std::sqrt(s);
          for (const auto& p : o.patches) {
            const double pd = std::hypot(dx - 0.55 * R * p[0], dy - 0.55 * R * p[1]);
            if (pr > 0.0) c.blend(x, y, kRotPatch, coverage(pr - pd));
          }
          break;
        }
      }
    }
  }
  return c.to_frame();
}

Video synth_video(Category category, std::uint64_t seed, int n_frames) {
  if (n_frames < kMinFrameCount) {
    throw InvalidArgument("synth_video: need at least " + std::to_string(kMinFrameCount) +
                          " frames, got " + std::to_string(n_frames));
  }
  Video v;
  v.id = to_string(category) + "_" + std::to_string(seed);
  v.category = category;
  v.seed = seed;
  v.object = sample_object(category, seed);
  for (int k = 0; k < n_frames; ++k) {
    const double s = static_cast<double>(k) / (n_frames - 1);
    v.frames.push_back(render_object(category, v.object, s));
    v.degrees.emplace_back(s);
  }
  return v;
}

Index bright_area(const Frame& frame) { return (luminance(frame).array() > 0.5f).count(); }

Index dark_area(const Frame& frame, double threshold) {
  return (luminance(frame).array() < static_cast<float>(threshold)).count();
}

namespace {

// Pixels whose luma differs from the leftmost pixel of their row by > 0.1.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> object_mask(const Frame& frame) {
  const Eigen::MatrixXf lum = luminance(frame);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(lum.rows(), lum.cols());
  for (Index y = 0; y < lum.rows(); ++y) {
    for (Index x = 0; x < lum.cols(); ++x) mask(y, x) = std::abs(lum(y, x) - lum(y, 0)) > 0.1f;
  }
  return mask;
}

}  // namespace

Index object_height(const Frame& frame) {
  const auto mask = object_mask(frame);
  Index top = -1, bottom = -1;
  for (Index y = 0; y < mask.rows(); ++y) {
    if (mask.row(y).any()) {
      if (top < 0) top = y;
      bottom = y;
    }
  }
  return top < 0 ? 0 : bottom - top + 1;
}

double progress_statistic(Category category, const Frame& frame) {
  switch (category) {
    case Category::kBloom:
      return static_cast<double>(bright_area(frame));
    case Category::kMelt:
      return static_cast<double>(object_height(frame));
    case Category::kBake:
      return static_cast<double>(object_mask(frame).count());
    case Category::kRot:
      return static_cast<double>(dark_area(frame, 0.2));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Annotations

void DegreeAnnotationFile::validate() const {
  if (annotators.empty()) throw AnnotationError("annotation file has no annotators");
  for (const auto& [name, anchors] : annotators) {
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const Anchor& a = anchors[i];
      if (std::find(kReferenceDegrees.begin(), kReferenceDegrees.end(), a.degree) ==
          kReferenceDegrees.end()) {
        throw AnnotationError("annotator " + name + ": degree " + std::to_string(a.degree) +
                              " is not a reference degree");
      }
      if (a.frame_index < 0) throw AnnotationError("annotator " + name + ": negative frame");
      if (i > 0 &&
          (a.frame_index <= anchors[i - 1].frame_index || a.degree <= anchors[i - 1].degree)) {
        throw AnnotationError("annotator " + name +
                              ": anchors must increase in frame index and degree");
      }
    }
  }
}

DegreeAnnotationFile DegreeAnnotationFile::parse(const std::string& text) {
  DegreeAnnotationFile file;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "annotator") {
      std::string name;
      if (!(ls >> name)) throw AnnotationError("line " + std::to_string(lineno) + ": missing name");
      file.annotators.push_back({name, {}});
      continue;
    }
    if (file.annotators.empty()) {
      throw AnnotationError("line " + std::to_string(lineno) + ": anchor before any annotator");
    }
    Anchor a;
    try {
      std::size_t used = 0;
      a.frame_index = std::stoi(first, &used);
      if (used != first.size()) throw std::invalid_argument(first);
    } catch (const std::exception&) {
      throw AnnotationError("line " + std::to_string(lineno) + ": bad frame index '" + first + "'");
    }
    if (!(ls >> a.degree)) {
      throw AnnotationError("line " + std::to_string(lineno) + ": missing degree");
    }
    file.annotators.back().second.push_back(a);
  }
  file.validate();
  return file;
}

DegreeAnnotationFile DegreeAnnotationFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open annotation file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string DegreeAnnotationFile::to_text() const {
  std::ostringstream os;
  os << "# frame_index degree\n";
  for (const auto& [name, anchors] : annotators) {
    os << "annotator " << name << "\n";
    for (const Anchor& a : anchors) os << a.frame_index << " " << a.degree << "\n";
  }
  return os.str();
}

std::vector<Anchor> aggregate_annotations(const DegreeAnnotationFile& file) {
  file.validate();
  std::vector<Anchor> out;
  for (double degree : kReferenceDegrees) {
    std::vector<int> frames;
    for (const auto& [name, anchors] : file.annotators) {
      for (const Anchor& a : anchors) {
        if (a.degree == degree) frames.push_back(a.frame_index);
      }
    }
    if (frames.empty()) continue;
    std::sort(frames.begin(), frames.end());
    out.push_back({frames[(frames.size() - 1) / 2], degree});
  }
  return out;
}

std::vector<std::optional<double>> interpolate_degrees(std::span<const Anchor> anchors,
                                                       int n_frames) {
  if (anchors.size() < 2) {
    throw AnnotationError("need at least two anchors to interpolate, got " +
                          std::to_string(anchors.size()));
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].frame_index < 0 || anchors[i].frame_index >= n_frames) {
      throw AnnotationError("anchor frame " + std::to_string(anchors[i].frame_index) +
                            " outside video of " + std::to_string(n_frames) + " frames");
    }
    if (i > 0 && (anchors[i].frame_index <= anchors[i - 1].frame_index ||
                  anchors[i].degree <= anchors[i - 1].degree)) {
      throw AnnotationError("anchors must be strictly increasing");
    }
  }
  std::vector<std::optional<double>> out(static_cast<std::size_t>(n_frames));
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    const Anchor& a = anchors[i];
    const Anchor& b = anchors[i + 1];
    for (int f = a.frame_index; f <= b.frame_index; ++f) {
      const double t = static_cast<double>(f - a.frame_index) / (b.frame_index - a.frame_index);
      out[static_cast<std::size_t>(f)] = a.degree + t * (b.degree - a.degree);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split and sampling

VideoSplit split_videos(std::vector<Video> videos, double ratio, std::uint64_t seed) {
  if (videos.size() < 2) throw InvalidArgument("split_videos: need at least two videos");
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split_videos: ratio must be in (0,1)");
  std::vector<std::size_t> order(videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(videos.size()))), 1,
      videos.size() - 1);
  VideoSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? split.train : split.test;
    dst.push_back(std::move(videos[order[i]]));
  }
  return split;
}

std::optional<std::size_t> nearest_frame(const Video& video, double degree, double tolerance) {
  std::optional<std::size_t> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < video.degrees.size(); ++i) {
    if (!video.degrees[i]) continue;
    const double gap = std::abs(*video.degrees[i] - degree);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  if (best && best_gap <= tolerance + 1e-12) return best;
  return std::nullopt;
}

namespace {

constexpr int kMaxAttempts = 100000;

struct LabelledIndex {
  std::vector<std::vector<std::size_t>> frames;  // labelled frames per video

  explicit LabelledIndex(std::span<const Video> videos) {
    for (const Video& v : videos) {
      std::vector<std::size_t> f;
      for (std::size_t i = 0; i < v.degrees.size(); ++i) {
        if (v.degrees[i]) f.push_back(i);
      }
      frames.push_back(std::move(f));
    }
  }
};

// Draws (video, labelled frame) uniformly and calls `accept` until it returns
// true; throws after kMaxAttempts.
template <typename Accept>
void draw_until(std::span<const Video> videos, const LabelledIndex& index, std::mt19937_64& rng,
                const char* what, Accept&& accept) {
  if (videos.empty()) throw InvalidArgument(std::string(what) + ": no videos");
  std::uniform_int_distribution<std::size_t> pick_video(0, videos.size() - 1);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::size_t v = pick_video(rng);
    const auto& frames = index.frames[v];
    if (frames.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick_frame(0, frames.size() - 1);
    const std::size_t f = frames[pick_frame(rng)];
    if (accept(v, f)) return;
  }
  throw InvalidArgument(std::string(what) + ": videos too short to realize the requested offsets");
}

}  // namespace

std::vector<PairSample> sample_pairs(std::span<const Video> videos, std::size_t count,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelledIndex index(videos);
  std::uniform_int_distribution<int> pick_condition(0, 3);
  std::vector<PairSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const int k = pick_condition(rng);
    draw_until(videos, index, rng, "sample_pairs", [&](std::size_t v, std::size_t f) {
      const double d = *videos[v].degrees[f];
      std::optional<std::size_t> target =
          k == 0 ? std::optional(f) : nearest_frame(videos[v], d + 0.25 * k);
      if (!target) return false;
      out.push_back({v, f, *target, k});
      return true;
    });
  }
  return out;
}

std::vector<TripleSample> sample_triples(std::span<const Video> videos, std::size_t count,
                                         std::uint64_t seed,
                                         std::optional<double> interval_filter) {
  std::mt19937_64 rng(seed);
  LabelledIndex index(videos);
  std::uniform_int_distribution<std::size_t> pick_interval(0, kTripleIntervals.size() - 1);
  std::vector<TripleSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double m = interval_filter ? *interval_filter : kTripleIntervals[pick_interval(rng)];
    draw_until(videos, index, rng, "sample_triples", [&](std::size_t v, std::size_t f) {
      if (m == 0.0) {
        out.push_back({v, f, f, f, 0.0});
        return true;
      }
      const double d = *videos[v].degrees[f];
      auto second = nearest_frame(videos[v], d + m);
      auto target = nearest_frame(videos[v], d + 2.0 * m);
      if (!second || !target) return false;
      out.push_back({v, f, *second, *target, m});
      return true;
    });
  }
  return out;
}

std::vector<GroupSample> sample_groups(std::span<const Video> videos, std::size_t count,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelledIndex index(videos);
  std::vector<GroupSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    draw_until(videos, index, rng, "sample_groups", [&](std::size_t v, std::size_t f) {
      const double d = *videos[v].degrees[f];
      GroupSample g{v, f, {}};
      for (std::size_t k = 0; k < kGroupOffsets.size(); ++k) {
        auto t = k == 0 ? std::optional(f) : nearest_frame(videos[v], d + kGroupOffsets[k]);
        if (!t) return false;
        g.targets[k] = *t;
      }
      out.push_back(g);
      return true;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentParams draw_augment(std::mt19937_64& rng, Index size) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AugmentParams p;
  p.crop_scale = 0.8 + 0.2 * u(rng);
  const double slack = static_cast<double>(size) * (1.0 - p.crop_scale);
  p.crop_x = slack * u(rng);
  p.crop_y = slack * u(rng);
  p.flip = u(rng) < 0.5;
  return p;
}

Frame apply_augment(const Frame& frame, const AugmentParams& p) {
  const Index h = frame.dim(0), w = frame.dim(1), ch = frame.dim(2);
  Frame out(frame.shape());
  const double sx = p.crop_scale, sy = p.crop_scale;
  for (Index y = 0; y < h; ++y) {
    const double fy = std::clamp(p.crop_y + (y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const Index y0 = static_cast<Index>(fy);
    const Index y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (Index x = 0; x < w; ++x) {
      const double fx =
          std::clamp(p.crop_x + (x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const Index x0 = static_cast<Index>(fx);
      const Index x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (Index c = 0; c < ch; ++c) {
        auto at = [&](Index yy, Index xx) {
          return static_cast<double>(frame[(yy * w + xx) * ch + c]);
        };
        const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) +
                         ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
        out[(y * w + x) * ch + c] = static_cast<float>(v);
      }
    }
  }
  return p.flip ? flip_horizontal(out) : out;
}

AugmentParams augment(std::span<Frame> frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const AugmentParams p = draw_augment(rng, frames.empty() ? 64 : frames.front().dim(1));
  for (Frame& f : frames) f = apply_augment(f, p);
  return p;
}

// ---------------------------------------------------------------------------
// Reconstruction corpus

std::vector<Frame> make_reconstruction_corpus(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("make_reconstruction_corpus: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto color = [&] { return Rgb{u(rng), u(rng), u(rng)}; };
  std::vector<Frame> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Alternate static object renders (any category, any degree) with
    // random-shape scenes.
    if (i % 2 == 0) {
      const Category category = kAllCategories[static_cast<std::size_t>(u(rng) * 4.0) % 4];
      const ObjectParams object = sample_object(category, rng());
      corpus.push_back(render_object(category, object, u(rng)));
      continue;
    }
    Canvas c;
    const Rgb a = color(), b = color();
    const double angle = u(rng) * 2.0 * std::numbers::pi;
    const double gx = std::cos(angle), gy = std::sin(angle);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const double t = std::clamp(0.5 + ((x - 31.5) * gx + (y - 31.5) * gy) / 90.0, 0.0, 1.0);
        c.at(x, y) = mix(a, b, t);
      }
    }
    std::uniform_int_distribution<int> shape_count(1, 3);
    const int shapes = shape_count(rng);
    for (int s = 0; s < shapes; ++s) {
      const int kind = static_cast<int>(u(rng) * 3.0);
      const double cx = 12 + 40 * u(rng), cy = 12 + 40 * u(rng);
      const double rx = 5 + 12 * u(rng), ry = 5 + 12 * u(rng);
      const double rot = u(rng) * std::numbers::pi;
      const Rgb fill = color();
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          const double lx = dx * std::cos(rot) + dy * std::sin(rot);
          const double ly = -dx * std::sin(rot) + dy * std::cos(rot);
          double d = 0.0;
          if (kind == 0) {
            d = rx - std::hypot(dx, dy);
          } else if (kind == 1) {
            d = (1.0 - std::hypot(lx / rx, ly / ry)) * std::min(rx, ry);
          } else {
            d = std::min(rx - std::abs(lx), ry - std::abs(ly));
          }
          c.blend(x, y, fill, coverage(d));
        }
      }
    }
    corpus.push_back(c.to_frame());
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// On-disk format

namespace {

std::string frame_file(int index) {
  std::ostringstream os;
  os << "frame_" << std::setw(4) << std::setfill('0') << index << ".ppm";
  return os.str();
}

}  // namespace

void write_dataset(const std::string& directory, std::span<const Video> videos) {
  fs::create_directories(fs::path(directory) / "videos");
  std::ofstream manifest(fs::path(directory) / "manifest.txt");
  if (!manifest) throw FileError("cannot write manifest in " + directory);
  manifest << "tlgen-manifest 1\n";
  for (const Video& v : videos) {
    const fs::path rel = fs::path("videos") / v.id;
    fs::create_directories(fs::path(directory) / rel);
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      write_ppm((fs::path(directory) / rel / frame_file(static_cast<int>(i))).string(),
                v.frames[i]);
    }
    std::ofstream deg(fs::path(directory) / rel / "degrees.txt");
    deg << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < v.degrees.size(); ++i) {
      deg << i << " ";
      if (v.degrees[i]) {
        deg << *v.degrees[i];
      } else {
        deg << "-";
      }
      deg << "\n";
    }
    manifest << "video " << v.id << " " << to_string(v.category) << " " << v.seed << " "
             << v.frames.size() << " " << rel.generic_string() << "\n";
  }
}

std::vector<Video> load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FileError("cannot open manifest " + manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  std::string header;
  std::getline(in, header);
  while (!header.empty() && std::isspace(static_cast<unsigned char>(header.back())))
    header.pop_back();
  if (header != "tlgen-manifest 1") {
    throw InvalidArgument("manifest: unsupported header '" + header + "'");
  }
  std::vector<Video> videos;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag != "video") throw InvalidArgument("manifest: unexpected entry '" + tag + "'");
    Video v;
    std::string category, rel;
    std::size_t n = 0;
    if (!(ls >> v.id >> category >> v.seed >> n >> rel)) {
      throw InvalidArgument("manifest: malformed video line '" + line + "'");
    }
    v.category = parse_category(category);
    v.object = sample_object(v.category, v.seed);
    for (std::size_t i = 0; i < n; ++i) {
      v.frames.push_back(read_ppm((root / rel / frame_file(static_cast<int>(i))).string()));
    }
    v.degrees.resize(n);
    std::ifstream deg(root / rel / "degrees.txt");
    if (!deg) throw FileError("missing degrees for video " + v.id);
    std::size_t idx = 0;
    std::string value;
    while (deg >> idx >> value) {
      if (idx >= n) throw InvalidArgument("degrees: frame index out of range in " + v.id);
      if (value != "-") v.degrees[idx] = std::stod(value);
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

DatasetStats dataset_stats(std::span<const Video> videos) {
  DatasetStats s;
  for (const Video& v : videos) {
    s.videos[v.category] += 1;
    s.frames[v.category] += v.frames.size();
    s.labelled_frames[v.category] += static_cast<std::size_t>(std::count_if(
        v.degrees.begin(), v.degrees.end(), [](const auto& d) { return d.has_value(); }));
  }
  return s;
}

std::string format_stats(const DatasetStats& stats) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "category" << std::right << std::setw(8) << "videos"
     << std::setw(10) << "frames" << std::setw(10) << "labelled" << "\n";
  std::size_t tv = 0, tf = 0, tl = 0;
  for (Category c : kAllCategories) {
    auto get = [&](const std::map<Category, std::size_t>& m) {
      auto it = m.find(c);
      return it == m.end() ? std::size_t{0} : it->second;
    };
    const std::size_t v = get(stats.videos), f = get(stats.frames), l = get(stats.labelled_frames);
    tv += v;
    tf += f;
    tl += l;
    os << std::left << std::setw(10) << to_string(c) << std::right << std::setw(8) << v
       << std::setw(10) << f << std::setw(10) << l << "\n";
  }
  os << std::left << std::setw(10) << "total" << std::right << std::setw(8) << tv << std::setw(10)
     << tf << std::setw(10) << tl << "\n";
  return os.str();
}

}  // namespace tlgen
