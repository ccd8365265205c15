// granalign/src/vad.cc

#include "granalign/vad.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "granalign/error.h"

namespace granalign::vad {
namespace {

constexpr double kRmsFullScale = 0.05;

void CheckSorted(std::span<const SpeechSegment> segments) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].end_s > segments[i].start_s) || segments[i].start_s < 0.0)
      throw Error(ErrorKind::kPrecondition,
                  "segment " + std::to_string(i) + " has non-positive duration");
    if (i > 0 && segments[i].start_s < segments[i - 1].end_s)
      throw Error(ErrorKind::kPrecondition, "segments must be sorted and non-overlapping");
  }
}

}  // namespace

void Validate(const FrameProbSeries &series) {
  if (series.frame_hop <= 0 || series.sample_rate <= 0)
    throw Error(ErrorKind::kPrecondition, "frame_hop and sample_rate must be positive");
  for (std::size_t i = 0; i < series.probs.size(); ++i) {
    const double p = series.probs[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(ErrorKind::kPrecondition,
                  "frame " + std::to_string(i) + " probability outside [0,1]");
  }
}

void Validate(const SegmenterConfig &cfg) {
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
    throw Error(ErrorKind::kPrecondition, "threshold must lie in (0,1)");
  if (!(cfg.max_segment_s > 0.0))
    throw Error(ErrorKind::kPrecondition, "max_segment_s must be positive");
  if (!(cfg.min_gap_s >= 0.0))
    throw Error(ErrorKind::kPrecondition, "min_gap_s must be non-negative");
}

std::vector<SpeechSegment> ThresholdSegments(const FrameProbSeries &series,
                                             const SegmenterConfig &cfg) {
  if (series.probs.empty()) throw Error(ErrorKind::kEmptyInput, "empty probability series");
  Validate(series);
  Validate(cfg);

  // Runs in frame indices, [first, last).
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  const std::size_t n = series.probs.size();
  std::size_t i = 0;
  while (i < n) {
    if (series.probs[i] < cfg.threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && series.probs[j] >= cfg.threshold) ++j;
    runs.emplace_back(i, j);
    i = j;
  }

  const auto to_seconds = [&](std::size_t frame) {
    return static_cast<double>(frame * series.frame_hop) / series.sample_rate;
  };
  std::vector<SpeechSegment> out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [first, last] = runs[r];
    if (r > 0) {
      const std::size_t gap_frames = first - runs[r - 1].second;
      if (to_seconds(gap_frames) < cfg.min_gap_s) {
        out.back().end_s = to_seconds(last);
        continue;
      }
    }
    out.push_back({to_seconds(first), to_seconds(last)});
  }
  return out;
}

std::vector<SpeechSegment> SplitLong(std::span<const SpeechSegment> segments,
                                     double max_segment_s) {
  if (!(max_segment_s > 0.0))
    throw Error(ErrorKind::kPrecondition, "max_segment_s must be positive");
  CheckSorted(segments);
  std::vector<SpeechSegment> out;
  for (const auto &s : segments) {
    const double d = s.duration();
    if (d <= max_segment_s) {
      out.push_back(s);
      continue;
    }
    const auto parts = static_cast<std::size_t>(std::ceil(d / max_segment_s));
    const double step = d / static_cast<double>(parts);
    for (std::size_t k = 0; k < parts; ++k) {
      const double a = s.start_s + step * k;
      const double b = (k + 1 == parts) ? s.end_s : s.start_s + step * (k + 1);
      out.push_back({a, b});
    }
  }
  return out;
}

std::vector<SpeechSegment> MergeShort(std::span<const SpeechSegment> segments,
                                      double max_segment_s) {
  if (!(max_segment_s > 0.0))
    throw Error(ErrorKind::kPrecondition, "max_segment_s must be positive");
  CheckSorted(segments);
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].duration() > max_segment_s)
      throw Error(ErrorKind::kPrecondition,
                  "segment " + std::to_string(i) + " exceeds max_segment_s; split it first");

  std::vector<SpeechSegment> out;
  for (const auto &s : segments) {
    if (!out.empty() && s.end_s - out.back().start_s <= max_segment_s) {
      out.back().end_s = s.end_s;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<SpeechSegment> Segment(const FrameProbSeries &series, const SegmenterConfig &cfg) {
  const auto raw = ThresholdSegments(series, cfg);
  const auto split = SplitLong(raw, cfg.max_segment_s);
  return MergeShort(split, cfg.max_segment_s);
}

FrameProbSeries RmsProb(std::span<const double> waveform, int window, int sample_rate) {
  if (window <= 0) throw Error(ErrorKind::kPrecondition, "window must be positive");
  if (sample_rate <= 0) throw Error(ErrorKind::kPrecondition, "sample_rate must be positive");
  if (waveform.empty()) throw Error(ErrorKind::kEmptyInput, "empty waveform");

  FrameProbSeries series;
  series.frame_hop = window;
  series.sample_rate = sample_rate;
  const std::size_t w = static_cast<std::size_t>(window);
  for (std::size_t start = 0; start < waveform.size(); start += w) {
    const std::size_t end = std::min(waveform.size(), start + w);
    double sum_sq = 0.0;
    for (std::size_t k = start; k < end; ++k) sum_sq += waveform[k] * waveform[k];
    const double rms = std::sqrt(sum_sq / static_cast<double>(end - start));
    series.probs.push_back(std::min(1.0, rms / kRmsFullScale));
  }
  return series;
}

Json SegmentToJson(const SpeechSegment &s) {
  Json j;
  j["start_s"] = s.start_s;
  j["end_s"] = s.end_s;
  return j;
}

SpeechSegment SegmentFromJson(const nlohmann::json &j) {
  try {
    return {j.at("start_s").get<double>(), j.at("end_s").get<double>()};
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, std::string("malformed segment: ") + e.what());
  }
}

}  // namespace granalign::vad
