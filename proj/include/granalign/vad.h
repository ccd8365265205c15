// granalign/vad.h
//
// Turns a per-frame speech probability series into speech segments and
// applies the <= 30 s split/merge batching policy.

#ifndef GRANALIGN_VAD_H_
#define GRANALIGN_VAD_H_

#include <span>
#include <vector>

#include "granalign/units.h"

namespace granalign::vad {

struct FrameProbSeries {
  std::vector<double> probs;  // P(speech) per frame, each in [0,1]
  int frame_hop = 512;        // samples per frame
  int sample_rate = 16000;    // Hz

  double frame_seconds() const { return static_cast<double>(frame_hop) / sample_rate; }
};

struct SpeechSegment {
  double start_s = 0.0;
  double end_s = 0.0;

  double duration() const { return end_s - start_s; }
  bool operator==(const SpeechSegment &) const = default;
};

struct SegmenterConfig {
  double threshold = 0.5;
  double max_segment_s = 30.0;
  double min_gap_s = 0.1;
};

// Throws kPrecondition if the series or config violates its invariants.
void Validate(const FrameProbSeries &series);
void Validate(const SegmenterConfig &cfg);

// Maximal runs of frames with prob >= threshold. Frame i covers
// [i*hop, (i+1)*hop) / rate. Runs separated by a sub-threshold gap shorter
// than min_gap_s are fused.
std::vector<SpeechSegment> ThresholdSegments(const FrameProbSeries &series,
                                             const SegmenterConfig &cfg);

// Divides each segment longer than max_segment_s into ceil(d / max) equal parts.
std::vector<SpeechSegment> SplitLong(std::span<const SpeechSegment> segments,
                                     double max_segment_s);

// Greedy left-to-right fusion of adjacent segments while the span from the
// group's first start to its last end stays <= max_segment_s.
std::vector<SpeechSegment> MergeShort(std::span<const SpeechSegment> segments,
                                      double max_segment_s);

// Threshold, split, then merge.
std::vector<SpeechSegment> Segment(const FrameProbSeries &series, const SegmenterConfig &cfg);

// Energy-based stand-in for a pretrained VAD: per-window RMS mapped through
// min(1, rms / 0.05). A trailing partial window is kept.
FrameProbSeries RmsProb(std::span<const double> waveform, int window, int sample_rate = 16000);

Json SegmentToJson(const SpeechSegment &s);
SpeechSegment SegmentFromJson(const nlohmann::json &j);

}  // namespace granalign::vad

#endif  // GRANALIGN_VAD_H_
