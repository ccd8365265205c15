// granalign/pipeline.h
//
// The stages behind the command-line subcommands, callable in-process. Each
// stage reads and writes the on-disk formats (FMAT, NDJSON) and returns the
// list of files it produced so the caller can record them in a run manifest.

#ifndef GRANALIGN_PIPELINE_H_
#define GRANALIGN_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "granalign/classifier.h"
#include "granalign/ctc_aligner.h"
#include "granalign/dataset.h"
#include "granalign/evaluator.h"
#include "granalign/syllabifier.h"
#include "granalign/trainer.h"
#include "granalign/vad.h"

namespace granalign::pipeline {

namespace fs = std::filesystem;

// Reads a T x V emission FMAT. Frame duration and blank index come from the
// sidecar `<stem>.meta.ndjson` when present; explicit values override it.
ctc::EmissionMatrix LoadEmissions(const fs::path &fmat, std::vector<std::string> symbols,
                                  std::optional<double> frame_dur_s,
                                  std::optional<std::size_t> blank_index);

// Reads a speech-probability FMAT of any shape (flattened row-major).
vad::FrameProbSeries LoadFrameProbs(const fs::path &fmat, int frame_hop, int sample_rate);

std::vector<vad::SpeechSegment> ReadSegments(const fs::path &path);
void WriteSegments(const fs::path &path, std::span<const vad::SpeechSegment> segments);

struct UtteranceAlignment {
  std::vector<AlignedUnit> phonemes;
  std::vector<AlignedUnit> syllables;
  std::vector<AlignedUnit> words;
  std::size_t first_frame = 0;  // emission window actually aligned
  std::size_t end_frame = 0;    // exclusive
  bool unknown_symbols = false;  // the syllabifier used its fallback class
};

// Restricts alignment to the frames covered by `segments` (first start to
// last end); an empty segment list aligns over the whole matrix. Timestamps
// in the result are absolute.
UtteranceAlignment AlignUtterance(const ctc::EmissionMatrix &em, const ctc::TargetSequence &target,
                                  std::span<const vad::SpeechSegment> segments,
                                  const syllable::PhonemeInventory &inventory);

// Syllabifies each word of `target` separately and composes syllable spans
// from the aligned phonemes.
std::vector<AlignedUnit> SyllabifyWords(const std::vector<AlignedUnit> &phonemes,
                                        const ctc::TargetSequence &target,
                                        const syllable::PhonemeInventory &inventory,
                                        bool *unknown_symbols = nullptr);

// ---------------------------------------------------------------------------
// Dataset building.

struct UtteranceInput {
  dataset::UtteranceRecord meta;  // units ignored
  std::vector<AlignedUnit> units;  // any mix of granularities
  std::map<Granularity, fs::path> features;  // one row per unit of that granularity
};

// Reads utterance metadata rows {utterance_id, speaker_id, language, label,
// duration_s}; extra keys are ignored, so a corpus index works as well.
std::map<std::string, dataset::UtteranceRecord> ReadUtteranceMeta(const fs::path &path);

struct BuildOptions {
  std::vector<Granularity> granularities{Granularity::kPhoneme};
  double conf_threshold = 0.6;
  dataset::SplitOptions split;
};

struct BuildResult {
  std::vector<fs::path> outputs;
  std::map<dataset::Split, std::size_t> records;
  std::size_t dropped = 0;
};

// Writes train/val/test manifests with per-split feature files, the speaker
// assignment, the list of dropped records and dataset.json.
BuildResult BuildDataset(std::span<const UtteranceInput> inputs, const BuildOptions &options,
                         const fs::path &out_dir, std::ostream &log);

struct LoadedDataset {
  fs::path dir;
  std::vector<Granularity> granularities;
  std::size_t feature_dim = 0;
  std::map<dataset::Split, std::vector<dataset::UtteranceRecord>> splits;
  dataset::FeatureStore store;

  std::vector<dataset::LabeledSequence> Sequences(dataset::Split split, Granularity g) const;
};

LoadedDataset LoadDataset(const fs::path &dir);

// ---------------------------------------------------------------------------
// Training and evaluation.

struct RunInfo {
  fs::path dir;
  fs::path dataset;
  Granularity granularity = Granularity::kPhoneme;
  std::uint64_t seed = 0;
};

fs::path RunDirectory(const fs::path &runs_dir, Granularity g, std::uint64_t seed);

struct TrainResult {
  RunInfo run;
  train::FitResult fit;
  std::vector<fs::path> outputs;
};

// Trains one seed and writes <runs>/<granularity>/seed_<s>/ with the best
// checkpoint, history.ndjson and run.json. model.input_dim is taken from the
// dataset.
TrainResult TrainRun(const LoadedDataset &data, Granularity g, model::ClassifierConfig model,
                     const train::TrainConfig &config, std::uint64_t seed, const fs::path &runs_dir,
                     std::ostream &log);

// Every run.json below `runs_dir`, sorted by granularity then seed.
std::vector<RunInfo> FindRuns(const fs::path &runs_dir);

struct EvalResult {
  std::vector<fs::path> outputs;
  std::map<std::string, eval::SeedSummary> summaries;  // by granularity name
  std::string tables;
};

// Scores every run on its dataset's test split. Writes predictions.ndjson,
// metrics.ndjson, summary.ndjson and tables.txt into out_dir.
EvalResult EvaluateRuns(std::span<const RunInfo> runs, const fs::path &out_dir, std::ostream &log);

struct AttentionResult {
  std::vector<fs::path> outputs;
  std::vector<eval::AttentionReport> reports;  // one per granularity
};

// Accumulates test-split attention over all runs of each granularity. Writes
// NDJSON to `out` and a CSV beside it.
AttentionResult AttentionReports(std::span<const RunInfo> runs, std::size_t top, const fs::path &out);

}  // namespace granalign::pipeline

#endif  // GRANALIGN_PIPELINE_H_
