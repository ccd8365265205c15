#include <cmath>
#include <random>

#include "doctest.h"
#include "granalign/vad.h"
#include "test_helpers.h"

using namespace granalign::vad;
using granalign::ErrorKind;

namespace {

FrameProbSeries Series(std::vector<double> probs) {
  FrameProbSeries s;
  s.probs = std::move(probs);
  return s;
}

void CheckWellFormed(const std::vector<SpeechSegment> &segs) {
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(segs[i].end_s > segs[i].start_s);
    if (i > 0) CHECK(segs[i].start_s >= segs[i - 1].end_s);
  }
}

}  // namespace

TEST_CASE("threshold_segments examples") {
  SegmenterConfig cfg;
  CHECK(ThresholdSegments(Series(std::vector<double>(100, 0.0)), cfg).empty());

  const auto all = ThresholdSegments(Series(std::vector<double>(100, 1.0)), cfg);
  REQUIRE(all.size() == 1);
  CHECK(all[0].start_s == 0.0);
  CHECK(all[0].end_s == doctest::Approx(3.2).epsilon(1e-12));

  // 10 x 0.9, 2 x 0.1, 10 x 0.9: the 0.064 s dip is shorter than min_gap_s.
  std::vector<double> p(10, 0.9);
  p.insert(p.end(), 2, 0.1);
  p.insert(p.end(), 10, 0.9);
  const auto fused = ThresholdSegments(Series(p), cfg);
  REQUIRE(fused.size() == 1);
  CHECK(fused[0].start_s == 0.0);
  CHECK(fused[0].end_s == doctest::Approx(22 * 0.032));

  cfg.min_gap_s = 0.0;
  CHECK(ThresholdSegments(Series(p), cfg).size() == 2);
}

TEST_CASE("threshold_segments frame geometry and errors") {
  SegmenterConfig cfg;
  cfg.min_gap_s = 0.0;
  // Frame i spans [i*hop, (i+1)*hop) / rate.
  const auto segs = ThresholdSegments(Series({0.0, 0.0, 0.7, 0.5, 0.2}), cfg);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_s == doctest::Approx(2 * 0.032));
  CHECK(segs[0].end_s == doctest::Approx(4 * 0.032));

  CHECK_THROWS_KIND(ThresholdSegments(Series({}), cfg), ErrorKind::kEmptyInput);
  CHECK_THROWS_KIND(ThresholdSegments(Series({1.5}), cfg), ErrorKind::kPrecondition);
  cfg.threshold = 1.0;
  CHECK_THROWS_KIND(ThresholdSegments(Series({0.5}), cfg), ErrorKind::kPrecondition);
}

TEST_CASE("sub-threshold frames never start a segment") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SegmenterConfig cfg;
  cfg.min_gap_s = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    FrameProbSeries s;
    for (int i = 0; i < 200; ++i) s.probs.push_back(u(rng));
    for (const auto &seg : ThresholdSegments(s, cfg)) {
      const auto first = static_cast<std::size_t>(std::llround(seg.start_s / s.frame_seconds()));
      const auto last = static_cast<std::size_t>(std::llround(seg.end_s / s.frame_seconds()));
      for (std::size_t f = first; f < last; ++f) CHECK(s.probs[f] >= cfg.threshold);
    }
  }
}

TEST_CASE("split_long examples") {
  const std::vector<SpeechSegment> seventy{{0, 70}};
  const auto parts = SplitLong(seventy, 30);
  REQUIRE(parts.size() == 3);
  for (const auto &p : parts) CHECK(p.duration() == doctest::Approx(70.0 / 3));
  CHECK(parts.back().end_s == 70.0);

  const std::vector<SpeechSegment> thirty{{0, 30}};
  CHECK(SplitLong(thirty, 30) == thirty);

  const std::vector<SpeechSegment> odd{{5, 36}};
  const auto two = SplitLong(odd, 30);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == SpeechSegment{5, 20.5});
  CHECK(two[1] == SpeechSegment{20.5, 36});
}

TEST_CASE("split_long conserves duration and bounds every part") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> gap(0.0, 5.0), len(0.1, 200.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SpeechSegment> segs;
    double t = 0.0;
    for (int i = 0; i < 8; ++i) {
      t += gap(rng);
      const double d = len(rng);
      segs.push_back({t, t + d});
      t += d;
    }
    const auto out = SplitLong(segs, 30.0);
    CheckWellFormed(out);
    double in_total = 0.0, out_total = 0.0;
    for (const auto &s : segs) in_total += s.duration();
    for (const auto &s : out) {
      out_total += s.duration();
      CHECK(s.duration() <= 30.0 + 1e-9);
    }
    CHECK(std::abs(in_total - out_total) <= 1e-9);
  }
}

TEST_CASE("merge_short examples") {
  const std::vector<SpeechSegment> a{{0, 10}, {10, 15}};
  CHECK(MergeShort(a, 30) == std::vector<SpeechSegment>{{0, 15}});

  const std::vector<SpeechSegment> b{{0, 20}, {20, 35}};
  CHECK(MergeShort(b, 30) == b);

  const std::vector<SpeechSegment> c{{0, 12}, {12, 24}, {24, 36}};
  CHECK(MergeShort(c, 30) == std::vector<SpeechSegment>{{0, 24}, {24, 36}});

  const std::vector<SpeechSegment> too_long{{0, 31}};
  CHECK_THROWS_KIND(MergeShort(too_long, 30), ErrorKind::kPrecondition);
  const std::vector<SpeechSegment> overlapping{{0, 5}, {4, 6}};
  CHECK_THROWS_KIND(MergeShort(overlapping, 30), ErrorKind::kPrecondition);
}

TEST_CASE("merge_short is idempotent and keeps spans bounded") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> gap(0.0, 3.0), len(0.1, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SpeechSegment> segs;
    double t = 0.0;
    for (int i = 0; i < 10; ++i) {
      t += gap(rng);
      const double d = len(rng);
      segs.push_back({t, t + d});
      t += d;
    }
    const auto once = MergeShort(segs, 30.0);
    CheckWellFormed(once);
    for (const auto &s : once) CHECK(s.duration() <= 30.0);
    CHECK(MergeShort(once, 30.0) == once);
  }
}

TEST_CASE("rms_prob examples") {
  const std::vector<double> silence(2048, 0.0);
  for (double p : RmsProb(silence, 512).probs) CHECK(p == 0.0);

  std::vector<double> square(2048);
  for (std::size_t i = 0; i < square.size(); ++i) square[i] = (i % 2) ? 1.0 : -1.0;
  for (double p : RmsProb(square, 512).probs) CHECK(p == 1.0);

  const std::vector<double> quiet(1024, 0.025);
  const auto s = RmsProb(quiet, 512);
  REQUIRE(s.probs.size() == 2);
  for (double p : s.probs) CHECK(p == doctest::Approx(0.5));

  CHECK_THROWS_KIND(RmsProb(std::vector<double>{}, 512), ErrorKind::kEmptyInput);
  CHECK_THROWS_KIND(RmsProb(quiet, 0), ErrorKind::kPrecondition);
}

TEST_CASE("segment pipeline applies threshold, split and merge") {
  // 40 s of speech, 1 s pause, 5 s of speech at 512/16000 frames.
  FrameProbSeries s;
  const auto frames = [&](double sec) { return static_cast<std::size_t>(sec / s.frame_seconds()); };
  s.probs.assign(frames(40), 0.9);
  s.probs.insert(s.probs.end(), frames(1), 0.1);
  s.probs.insert(s.probs.end(), frames(5), 0.9);
  const auto segs = Segment(s, SegmenterConfig{});
  CheckWellFormed(segs);
  for (const auto &seg : segs) CHECK(seg.duration() <= 30.0);
  REQUIRE(segs.size() == 2);
  // The 40 s run splits into two 20 s halves; the second half absorbs the 5 s tail.
  CHECK(segs[0].duration() == doctest::Approx(20.0).epsilon(0.01));
}
