// granalign/synthetic.h
//
// Deterministic synthetic corpus with planted alignments. Each utterance gets
// a log-softmax emission matrix whose peaks follow a known frame labelling, a
// speech-probability series for the VAD, and pre-pooled unit feature rows for
// every granularity. The planted spans are written alongside so end-to-end
// runs can be scored against them.
//
// Directory layout written by WriteCorpus:
//   corpus.ndjson                one line per utterance (paths are relative)
//   symbols.txt                  blank first, then the phoneme symbols
//   truth.ndjson                 planted phoneme frame spans per utterance
//   emissions/<utt>.fmat         T x V log-probabilities
//   emissions/<utt>.meta.ndjson  {"frame_dur_s", "blank_index"}
//   vad/<utt>.fmat               1 x N speech probabilities, 512-sample hop at 16 kHz
//   targets/<utt>.ndjson         {"word", "phonemes"} per word
//   features/<utt>.<granularity>.fmat  one row per unit, in unit order

#ifndef GRANALIGN_SYNTHETIC_H_
#define GRANALIGN_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "granalign/ctc_aligner.h"
#include "granalign/dataset.h"
#include "granalign/fmat.h"

namespace granalign::synthetic {

struct CorpusOptions {
  int speakers_per_group = 15;  // group = label x language
  int utterances_per_speaker = 1;
  int words_min = 3;
  int words_max = 5;
  int feature_dim = 16;
  double frame_dur_s = 0.02;
  double class_shift = 0.35;  // PD/HC offset along a fixed feature direction
  std::uint64_t seed = 2024;
};

struct PlantedPhoneme {
  std::string label;
  std::size_t first_frame = 0;  // inclusive
  std::size_t last_frame = 0;   // inclusive
};

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string language;
  dataset::Label label = dataset::Label::kHC;
  ctc::TargetSequence target;
  std::vector<PlantedPhoneme> planted;
  std::size_t num_frames = 0;
  std::vector<double> emissions;  // num_frames x symbols, log-probabilities
  std::vector<double> vad_probs;
  FloatMatrix phoneme_features;
  FloatMatrix syllable_features;
  FloatMatrix word_features;

  double duration_s(double frame_dur_s) const { return frame_dur_s * num_frames; }
};

struct Corpus {
  CorpusOptions options;
  std::vector<std::string> symbols;  // blank at index 0
  std::vector<Utterance> utterances;
};

Corpus GenerateCorpus(const CorpusOptions &options);

void WriteCorpus(const Corpus &corpus, const std::filesystem::path &dir);

// One corpus.ndjson line, with paths resolved against the corpus directory.
struct CorpusEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string language;
  dataset::Label label = dataset::Label::kHC;
  double duration_s = 0.0;
  std::filesystem::path emissions;
  std::filesystem::path vad;
  std::filesystem::path target;
  std::filesystem::path phoneme_features;
  std::filesystem::path syllable_features;
  std::filesystem::path word_features;

  const std::filesystem::path &features(Granularity g) const;
};

std::vector<CorpusEntry> ReadCorpusIndex(const std::filesystem::path &dir);

// utterance id -> planted phoneme spans, from truth.ndjson.
std::vector<std::pair<std::string, std::vector<PlantedPhoneme>>> ReadTruth(
    const std::filesystem::path &path);

}  // namespace granalign::synthetic

#endif  // GRANALIGN_SYNTHETIC_H_
