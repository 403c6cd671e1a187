#include <doctest.h>

#include <filesystem>
#include <set>

#include "test_util.hpp"
#include "tlgen/dataset.hpp"
#include "tlgen/pipeline.hpp"
#include "tlgen/training.hpp"

using namespace tlgen;
namespace fs = std::filesystem;

TEST_CASE("synthetic videos are deterministic per seed") {
  for (Category c : kAllCategories) {
    const Video a = synth_video(c, 17, 15);
    const Video b = synth_video(c, 17, 15);
    const Video other = synth_video(c, 18, 15);
    REQUIRE(a.frames.size() == 15);
    CHECK(a.id == to_string(c) + "_17");
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      same = same && a.frames[i] == b.frames[i];
      differs = differs || !(a.frames[i] == other.frames[i]);
    }
    CHECK(same);
    CHECK(differs);
    for (const Frame& f : a.frames) {
      CHECK(f.shape() == Shape{64, 64, 3});
      CHECK(f.data().minCoeff() >= -1.0f);
      CHECK(f.data().maxCoeff() <= 1.0f);
    }
  }
  CHECK_THROWS_AS(synth_video(Category::kBloom, 1, kMinFrameCount - 1), InvalidArgument);
}

TEST_CASE("frame k of a synthetic video carries degree k/(n-1)") {
  const Video v = synth_video(Category::kMelt, 3, 21);
  for (std::size_t k = 0; k < v.frames.size(); ++k) {
    REQUIRE(v.degrees[k].has_value());
    CHECK(*v.degrees[k] == doctest::Approx(static_cast<double>(k) / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("progress statistic is monotone in degree for every category") {
  for (Category c : kAllCategories) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
      const ObjectParams obj = sample_object(c, seed);
      double prev = progress_statistic(c, render_object(c, obj, 0.0));
      const double first = prev;
      for (int k = 1; k <= 10; ++k) {
        const double cur = progress_statistic(c, render_object(c, obj, k / 10.0));
        INFO(to_string(c) << " seed " << seed << " degree " << k / 10.0);
        // Melt shrinks in height; every other statistic grows.
        if (c == Category::kMelt) {
          CHECK(cur <= prev);
        } else {
          CHECK(cur >= prev);
        }
        prev = cur;
      }
      CHECK(prev != first);
    }
  }
}

TEST_CASE("bloom radius interpolates between its end points") {
  ObjectParams obj;
  obj.size = 1.0;
  CHECK(bloom_radius(obj, 0.0) == doctest::Approx(kBloomStartRadius));
  CHECK(bloom_radius(obj, 1.0) == doctest::Approx(kBloomEndRadius));
}

// --- annotations ------------------------------------------------------------------

TEST_CASE("annotation files parse, aggregate by median and interpolate") {
  const std::string text =
      "# three annotators\n"
      "annotator ann\n0 0\n10 0.5\n20 1\n"
      "annotator bob\n2 0\n12 0.5\n"
      "annotator cy\n4 0   # trailing comment\n8 0.5\n30 1\n";
  const auto file = DegreeAnnotationFile::parse(text);
  REQUIRE(file.annotators.size() == 3);
  CHECK(DegreeAnnotationFile::parse(file.to_text()).annotators == file.annotators);
  const auto anchors = aggregate_annotations(file);
  // Degree 0: frames {0,2,4} -> 2. Degree 0.5: {8,10,12} -> 10. Degree 1: {20,30} -> lower 20.
  REQUIRE(anchors.size() == 3);
  CHECK(anchors[0] == Anchor{2, 0.0});
  CHECK(anchors[1] == Anchor{10, 0.5});
  CHECK(anchors[2] == Anchor{20, 1.0});
  const auto degrees = interpolate_degrees(anchors, 25);
  CHECK_FALSE(degrees[0].has_value());
  CHECK_FALSE(degrees[1].has_value());
  CHECK(*degrees[2] == 0.0);
  CHECK(*degrees[6] == doctest::Approx(0.25));
  CHECK(*degrees[15] == doctest::Approx(0.75));
  CHECK(*degrees[20] == 1.0);
  CHECK_FALSE(degrees[21].has_value());
}

TEST_CASE("interpolated degrees are monotone between anchors") {
  const std::vector<Anchor> anchors{{3, 0.0}, {7, 0.25}, {30, 0.75}, {33, 1.0}};
  const auto d = interpolate_degrees(anchors, 40);
  std::optional<double> prev;
  for (const auto& v : d) {
    if (!v) continue;
    if (prev) CHECK(*v > *prev);
    prev = v;
  }
}

TEST_CASE("malformed annotations raise AnnotationError") {
  CHECK_THROWS_AS(DegreeAnnotationFile::parse("0 0\n"), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::parse("annotator a\n0 0.3\n"), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::parse("annotator a\n5 0\n3 0.5\n"), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::parse("annotator a\nx 0\n"), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::parse("annotator a\n1\n"), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::parse(""), AnnotationError);
  const std::vector<Anchor> one{{0, 0.0}};
  CHECK_THROWS_AS(interpolate_degrees(one, 10), AnnotationError);
  const std::vector<Anchor> outside{{0, 0.0}, {12, 1.0}};
  CHECK_THROWS_AS(interpolate_degrees(outside, 10), AnnotationError);
  CHECK_THROWS_AS(DegreeAnnotationFile::load("/nonexistent/annotations.txt"), FileError);
}

// --- split and sampling ------------------------------------------------------------

namespace {

std::vector<Video> bloom_videos(int count, int frames = 21) {
  std::vector<Video> v;
  for (int i = 0; i < count; ++i) v.push_back(synth_video(Category::kBloom, 100 + i, frames));
  return v;
}

}  // namespace

TEST_CASE("video split is disjoint, complete and seeded") {
  const auto videos = bloom_videos(10);
  const VideoSplit s = split_videos(videos, 0.8, 5);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  std::set<std::string> ids;
  for (const auto& v : s.train) ids.insert(v.id);
  for (const auto& v : s.test) CHECK(ids.insert(v.id).second);
  CHECK(ids.size() == 10);
  const VideoSplit again = split_videos(videos, 0.8, 5);
  for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(s.test[i].id == again.test[i].id);
  CHECK_THROWS_AS(split_videos(videos, 1.5, 5), InvalidArgument);

  const auto text = split_to_text(s);
  const VideoSplit parsed = split_from_text(text, videos);
  CHECK(parsed.train.size() == 8);
  CHECK(parsed.test.front().id == s.test.front().id);
  CHECK_THROWS_AS(split_from_text("test nobody\n", videos), InvalidArgument);
  CHECK_THROWS_AS(split_from_text("valid " + videos[0].id + "\n", videos), InvalidArgument);
}

TEST_CASE("split_for_training keeps one category") {
  auto videos = bloom_videos(4);
  videos.push_back(synth_video(Category::kRot, 1, 21));
  const auto s = split_for_training(videos, Category::kBloom, 0.5, 9);
  CHECK(s.train.size() + s.test.size() == 4);
  CHECK_THROWS_AS(split_for_training(videos, Category::kRot, 0.5, 9), InvalidArgument);
}

TEST_CASE("pair samples realize their offsets within tolerance") {
  const auto videos = bloom_videos(3, 41);
  const auto pairs = sample_pairs(videos, 500, 6);
  for (const auto& p : pairs) {
    const double din = *videos[p.video].degrees[p.input];
    const double dt = *videos[p.video].degrees[p.target];
    CHECK(std::abs(dt - din - 0.25 * p.condition) <= kDegreeTolerance + 1e-12);
  }
  const auto triples = sample_triples(videos, 300, 7);
  for (const auto& t : triples) {
    const auto& d = videos[t.video].degrees;
    CHECK(std::abs(*d[t.second] - *d[t.first] - t.interval) <= kDegreeTolerance + 1e-12);
    CHECK(std::abs(*d[t.target] - *d[t.first] - 2 * t.interval) <= kDegreeTolerance + 1e-12);
  }
  for (const auto& t : sample_triples(videos, 50, 8, 0.3)) CHECK(t.interval == 0.3);
  const auto groups = sample_groups(videos, 300, 9);
  for (const auto& g : groups) {
    const auto& d = videos[g.video].degrees;
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(std::abs(*d[g.targets[s]] - *d[g.input] - kGroupOffsets[s]) <=
            kDegreeTolerance + 1e-12);
    }
  }
}

TEST_CASE("pair conditions are uniform (chi-square)") {
  const auto videos = bloom_videos(3, 41);
  const std::size_t n = 4000;
  const auto pairs = sample_pairs(videos, n, 10);
  std::array<double, 4> counts{};
  for (const auto& p : pairs) counts[static_cast<std::size_t>(p.condition)] += 1.0;
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / 4.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 3 degrees of freedom, p = 0.001.
  CHECK(chi2 < 16.27);
}

TEST_CASE("frames outside the annotated span are never sampled") {
  auto videos = bloom_videos(2, 41);
  for (auto& v : videos) {
    for (std::size_t i = 0; i < 5; ++i) v.degrees[i].reset();
  }
  for (const auto& p : sample_pairs(videos, 300, 11)) {
    CHECK(p.input >= 5);
    CHECK(p.target >= 5);
  }
}

TEST_CASE("training batches never draw held-out videos") {
  const auto videos = bloom_videos(5);
  const VideoSplit split = split_for_training(videos, Category::kBloom, 0.6, 3);
  TrainConfig config = TrainConfig::desk(Task::kPairwise, Regime::kPixelMse);
  config.batch_size = 8;
  const TrainingData data = make_training_data(config, split, 10);
  std::set<std::string> test_ids;
  for (const auto& v : split.test) test_ids.insert(v.id);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Batch b = make_batch(config, data, "scratch", s);
    for (const auto& id : b.video_ids) CHECK(test_ids.count(id) == 0);
  }
  TrainingData leaky = data;
  leaky.videos.push_back(split.test.front());
  leaky.videos.erase(leaky.videos.begin(), leaky.videos.end() - 1);
  CHECK_THROWS_AS(make_batch(config, leaky, "scratch", 0), std::logic_error);
}

// --- augmentation and corpus ---------------------------------------------------------

TEST_CASE("augmentation keeps range and shape, flip is an involution") {
  const Video v = synth_video(Category::kBake, 4, 15);
  const Frame& f = v.frames[7];
  CHECK(flip_horizontal(flip_horizontal(f)) == f);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const AugmentParams p = draw_augment(rng);
    CHECK(p.crop_scale >= 0.8);
    CHECK(p.crop_scale <= 1.0);
    const Frame a = apply_augment(f, p);
    CHECK(a.shape() == Shape{64, 64, 3});
    CHECK(a.data().minCoeff() >= -1.0f);
    CHECK(a.data().maxCoeff() <= 1.0f);
  }
  AugmentParams identity;
  CHECK((apply_augment(f, identity).data() - f.data()).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("one crop is shared by every frame of a sample") {
  const Video v = synth_video(Category::kBloom, 4, 15);
  std::vector<Frame> frames{v.frames[2], v.frames[2], v.frames[9]};
  const AugmentParams p = augment(frames, 77);
  CHECK(frames[0] == frames[1]);
  CHECK(frames[0] == apply_augment(v.frames[2], p));
  CHECK(frames[2] == apply_augment(v.frames[9], p));
}

TEST_CASE("reconstruction corpus is deterministic and not degenerate") {
  const auto a = make_reconstruction_corpus(500, 3);
  const auto b = make_reconstruction_corpus(500, 3);
  REQUIRE(a.size() == 500);
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].data().minCoeff() >= -1.0f);
    CHECK(a[i].data().maxCoeff() <= 1.0f);
    mean += a[i].data().cast<double>().mean();
  }
  mean /= 500.0;
  CHECK(std::abs(mean) <= 0.2);
  CHECK_THROWS_AS(make_reconstruction_corpus(0, 1), InvalidArgument);
}

// --- on-disk format ------------------------------------------------------------------

TEST_CASE("dataset write and load round trip") {
  const fs::path dir = fs::temp_directory_path() / "tlgen_unit_dataset";
  fs::remove_all(dir);
  std::vector<Video> videos{synth_video(Category::kRot, 1, 12),
                            synth_video(Category::kMelt, 2, 12)};
  videos[0].degrees[0].reset();
  write_dataset(dir.string(), videos);
  const auto loaded = load_dataset((dir / "manifest.txt").string());
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].id == videos[i].id);
    CHECK(loaded[i].category == videos[i].category);
    REQUIRE(loaded[i].frames.size() == videos[i].frames.size());
    for (std::size_t f = 0; f < videos[i].frames.size(); ++f) {
      // Frames are stored at 8 bits.
      Frame q = videos[i].frames[f];
      quantize_8bit(q);
      CHECK((loaded[i].frames[f].data() - q.data()).cwiseAbs().maxCoeff() < 1e-6f);
      CHECK(loaded[i].degrees[f] == videos[i].degrees[f]);
    }
  }
  const auto stats = dataset_stats(loaded);
  CHECK(stats.videos.at(Category::kRot) == 1);
  CHECK(stats.labelled_frames.at(Category::kRot) == 11);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_dataset((dir / "manifest.txt").string()), FileError);
}

TEST_CASE("ppm round trip") {
  const fs::path path = fs::temp_directory_path() / "tlgen_unit.ppm";
  Frame f = synth_video(Category::kBloom, 9, 11).frames[5];
  quantize_8bit(f);
  write_ppm(path.string(), f);
  const Frame g = read_ppm(path.string());
  fs::remove(path);
  CHECK((g.data() - f.data()).cwiseAbs().maxCoeff() < 1e-6f);
}
