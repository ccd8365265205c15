// granalign/ctc_aligner.h
//
// Viterbi forced alignment of a phoneme target against frame-level CTC
// emissions, plus composition of word units from aligned phonemes.

#ifndef GRANALIGN_CTC_ALIGNER_H_
#define GRANALIGN_CTC_ALIGNER_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "granalign/fmat.h"
#include "granalign/units.h"

namespace granalign::ctc {

// T x V frame log-probabilities over `symbols` (blank included).
class EmissionMatrix {
 public:
  // Validates the invariants: T >= 1, unique symbols, blank in range and every
  // row log-sum-exps to 0 within `lse_tolerance`. Throws kData otherwise.
  EmissionMatrix(std::vector<double> logprobs, std::size_t num_frames,
                 std::vector<std::string> symbols, std::size_t blank_index,
                 double frame_dur_s, double lse_tolerance = 1e-3);

  static EmissionMatrix FromFmat(const FloatMatrix &m, std::vector<std::string> symbols,
                                 std::size_t blank_index, double frame_dur_s);

  std::size_t num_frames() const { return num_frames_; }
  std::size_t num_symbols() const { return symbols_.size(); }
  double frame_dur_s() const { return frame_dur_s_; }
  std::size_t blank_index() const { return blank_index_; }
  const std::vector<std::string> &symbols() const { return symbols_; }

  double logprob(std::size_t t, std::size_t v) const { return logprobs_[t * symbols_.size() + v]; }

  // Index of `symbol`; throws kVocabulary if absent.
  std::size_t symbol_index(const std::string &symbol) const;

 private:
  std::vector<double> logprobs_;
  std::size_t num_frames_;
  std::vector<std::string> symbols_;
  std::size_t blank_index_;
  double frame_dur_s_;
};

struct TargetSequence {
  std::vector<std::string> phonemes;
  // Half-open [start, end) phoneme index ranges, one per word.
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
  std::vector<std::string> word_texts;

  // Builds the sequence from (word, phonemes) pairs.
  static TargetSequence FromWords(
      const std::vector<std::pair<std::string, std::vector<std::string>>> &words);

  // Throws kConsistency unless spans are contiguous and cover every phoneme.
  void Validate() const;
};

inline constexpr const char *kBlankState = "<blank>";

// Canonical CTC state chain: blank, s1, blank, s2, ..., blank (2L + 1 states).
std::vector<std::string> ExpandWithBlanks(const TargetSequence &target);

// Minimum number of frames for a feasible alignment: L plus one separating
// blank per adjacent repeated symbol.
std::size_t MinimumFrames(const std::vector<std::string> &phonemes);

struct Alignment {
  std::vector<AlignedUnit> phonemes;
  double path_logprob = 0.0;
  // CTC state index occupied at every frame.
  std::vector<std::size_t> state_path;
  // Per phoneme: [first frame, last frame] inclusive.
  std::vector<std::pair<std::size_t, std::size_t>> frame_spans;
};

// Best monotone CTC path. Ties prefer advance-two over advance-one over stay,
// and the lower final state.
Alignment ViterbiAlign(const EmissionMatrix &em, const TargetSequence &target);

// Mean posterior of `symbol_index` over frames [first, last].
double UnitConfidence(const EmissionMatrix &em, std::pair<std::size_t, std::size_t> frame_span,
                      std::size_t symbol_index);

std::vector<AlignedUnit> GroupWords(const std::vector<AlignedUnit> &phoneme_units,
                                    const TargetSequence &target);

// One symbol per line; the line number is the emission column.
std::vector<std::string> ReadSymbols(const std::filesystem::path &path);

// Target NDJSON: one word per line, {"word": str, "phonemes": [str, ...]}.
TargetSequence ReadTarget(const std::filesystem::path &path);
void WriteTarget(const std::filesystem::path &path, const TargetSequence &target);

}  // namespace granalign::ctc

#endif  // GRANALIGN_CTC_ALIGNER_H_
