// granalign/src/ctc_aligner.cc

#include "granalign/ctc_aligner.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>

#include "granalign/error.h"

namespace granalign::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

EmissionMatrix::EmissionMatrix(std::vector<double> logprobs, std::size_t num_frames,
                               std::vector<std::string> symbols, std::size_t blank_index,
                               double frame_dur_s, double lse_tolerance)
    : logprobs_(std::move(logprobs)),
      num_frames_(num_frames),
      symbols_(std::move(symbols)),
      blank_index_(blank_index),
      frame_dur_s_(frame_dur_s) {
  const std::size_t v = symbols_.size();
  if (num_frames_ == 0) throw Error(ErrorKind::kData, "emission matrix has no frames");
  if (v == 0) throw Error(ErrorKind::kData, "empty symbol table");
  if (logprobs_.size() != num_frames_ * v)
    throw Error(ErrorKind::kData, "emission payload does not match " +
                                      std::to_string(num_frames_) + " x " + std::to_string(v));
  if (blank_index_ >= v) throw Error(ErrorKind::kData, "blank index out of range");
  if (!(frame_dur_s_ > 0.0)) throw Error(ErrorKind::kData, "frame duration must be positive");
  if (std::set<std::string>(symbols_.begin(), symbols_.end()).size() != v)
    throw Error(ErrorKind::kData, "symbol table contains duplicates");

  for (std::size_t t = 0; t < num_frames_; ++t) {
    double mx = kNegInf;
    for (std::size_t k = 0; k < v; ++k) {
      const double x = logprob(t, k);
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
        throw Error(ErrorKind::kData, "non-finite log-probability at frame " + std::to_string(t));
      mx = std::max(mx, x);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < v; ++k) sum += std::exp(logprob(t, k) - mx);
    const double lse = mx + std::log(sum);
    if (!(std::abs(lse) <= lse_tolerance))
      throw Error(ErrorKind::kData, "frame " + std::to_string(t) +
                                        " is not log-normalized (logsumexp = " +
                                        std::to_string(lse) + ")");
  }
}

EmissionMatrix EmissionMatrix::FromFmat(const FloatMatrix &m, std::vector<std::string> symbols,
                                        std::size_t blank_index, double frame_dur_s) {
  std::vector<double> lp(m.data.begin(), m.data.end());
  if (m.cols != symbols.size())
    throw Error(ErrorKind::kData, "emission matrix has " + std::to_string(m.cols) +
                                      " columns but the symbol table has " +
                                      std::to_string(symbols.size()) + " entries");
  return EmissionMatrix(std::move(lp), m.rows, std::move(symbols), blank_index, frame_dur_s);
}

std::size_t EmissionMatrix::symbol_index(const std::string &symbol) const {
  const auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end())
    throw Error(ErrorKind::kVocabulary, "phoneme '" + symbol + "' is not in the symbol table");
  return static_cast<std::size_t>(it - symbols_.begin());
}

TargetSequence TargetSequence::FromWords(
    const std::vector<std::pair<std::string, std::vector<std::string>>> &words) {
  TargetSequence t;
  for (const auto &[text, phones] : words) {
    const std::size_t begin = t.phonemes.size();
    t.phonemes.insert(t.phonemes.end(), phones.begin(), phones.end());
    t.word_spans.emplace_back(begin, t.phonemes.size());
    t.word_texts.push_back(text);
  }
  return t;
}

void TargetSequence::Validate() const {
  if (word_spans.size() != word_texts.size())
    throw Error(ErrorKind::kConsistency, "word_spans and word_texts differ in length");
  std::size_t expect = 0;
  for (const auto &[b, e] : word_spans) {
    if (b != expect || e <= b)
      throw Error(ErrorKind::kConsistency, "word spans must be contiguous and non-empty");
    expect = e;
  }
  if (expect != phonemes.size())
    throw Error(ErrorKind::kConsistency, "word spans do not cover every phoneme");
}

std::vector<std::string> ExpandWithBlanks(const TargetSequence &target) {
  std::vector<std::string> states;
  states.reserve(2 * target.phonemes.size() + 1);
  states.emplace_back(kBlankState);
  for (const auto &p : target.phonemes) {
    states.push_back(p);
    states.emplace_back(kBlankState);
  }
  return states;
}

std::size_t MinimumFrames(const std::vector<std::string> &phonemes) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < phonemes.size(); ++i)
    if (phonemes[i] == phonemes[i - 1]) ++repeats;
  return phonemes.size() + repeats;
}

Alignment ViterbiAlign(const EmissionMatrix &em, const TargetSequence &target) {
  const std::size_t num_frames = em.num_frames();
  const std::size_t num_phones = target.phonemes.size();
  const std::size_t num_states = 2 * num_phones + 1;

  std::vector<std::size_t> state_symbol(num_states, em.blank_index());
  for (std::size_t k = 0; k < num_phones; ++k) {
    state_symbol[2 * k + 1] = em.symbol_index(target.phonemes[k]);
    if (state_symbol[2 * k + 1] == em.blank_index())
      throw Error(ErrorKind::kVocabulary, "target phoneme '" + target.phonemes[k] + "' is the blank");
  }

  const std::size_t min_frames = MinimumFrames(target.phonemes);
  if (num_frames < min_frames)
    throw Error(ErrorKind::kInfeasible, "alignment needs at least " + std::to_string(min_frames) +
                                            " frames, emission matrix has " +
                                            std::to_string(num_frames));

  // Backpointer holds how many states the path advanced into (t, s).
  std::vector<double> prev(num_states, kNegInf), cur(num_states, kNegInf);
  std::vector<std::uint8_t> back(num_frames * num_states, 0);

  prev[0] = em.logprob(0, state_symbol[0]);
  if (num_states > 1) prev[1] = em.logprob(0, state_symbol[1]);

  for (std::size_t t = 1; t < num_frames; ++t) {
    for (std::size_t s = 0; s < num_states; ++s) {
      double best = kNegInf;
      std::uint8_t step = 0;
      bool have = false;
      const bool skip_ok = s >= 2 && s % 2 == 1 && state_symbol[s] != state_symbol[s - 2];
      if (skip_ok) {
        best = prev[s - 2];
        step = 2;
        have = true;
      }
      if (s >= 1 && (!have || prev[s - 1] > best)) {
        best = prev[s - 1];
        step = 1;
        have = true;
      }
      if (!have || prev[s] > best) {
        best = prev[s];
        step = 0;
      }
      back[t * num_states + s] = step;
      cur[s] = best + em.logprob(t, state_symbol[s]);
    }
    std::swap(prev, cur);
  }

  std::size_t state = num_states - 1;
  if (num_states > 1 && !(prev[num_states - 1] > prev[num_states - 2])) state = num_states - 2;
  const double score = prev[state];
  if (!(score > kNegInf))
    throw Error(ErrorKind::kInfeasible, "every alignment path has zero probability");

  Alignment out;
  out.path_logprob = score;
  out.state_path.assign(num_frames, 0);
  for (std::size_t t = num_frames; t-- > 0;) {
    out.state_path[t] = state;
    if (t > 0) state -= back[t * num_states + state];
  }

  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  out.frame_spans.assign(num_phones, {kUnset, 0});
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::size_t s = out.state_path[t];
    if (s % 2 == 0) continue;
    auto &span = out.frame_spans[s / 2];
    if (span.first == kUnset) span.first = t;
    span.second = t;
  }

  const double dur = em.frame_dur_s();
  out.phonemes.reserve(num_phones);
  for (std::size_t k = 0; k < num_phones; ++k) {
    const auto span = out.frame_spans[k];
    AlignedUnit u;
    u.label = target.phonemes[k];
    u.granularity = Granularity::kPhoneme;
    u.start_s = static_cast<double>(span.first) * dur;
    u.end_s = static_cast<double>(span.second + 1) * dur;
    u.confidence = UnitConfidence(em, span, state_symbol[2 * k + 1]);
    out.phonemes.push_back(std::move(u));
  }
  return out;
}

double UnitConfidence(const EmissionMatrix &em, std::pair<std::size_t, std::size_t> frame_span,
                      std::size_t symbol_index) {
  const auto [first, last] = frame_span;
  if (last < first) throw Error(ErrorKind::kPrecondition, "empty frame span");
  if (last >= em.num_frames()) throw Error(ErrorKind::kPrecondition, "frame span outside [0,T)");
  if (symbol_index >= em.num_symbols())
    throw Error(ErrorKind::kPrecondition, "symbol index out of range");
  double sum = 0.0;
  for (std::size_t t = first; t <= last; ++t) sum += std::exp(em.logprob(t, symbol_index));
  // Rows are normalized only to 1e-3, so a peaked posterior can exceed 1.
  return std::clamp(sum / static_cast<double>(last - first + 1), 0.0, 1.0);
}

std::vector<AlignedUnit> GroupWords(const std::vector<AlignedUnit> &phoneme_units,
                                    const TargetSequence &target) {
  target.Validate();
  if (phoneme_units.size() != target.phonemes.size())
    throw Error(ErrorKind::kConsistency,
                "got " + std::to_string(phoneme_units.size()) + " phoneme units for a target of " +
                    std::to_string(target.phonemes.size()) + " phonemes");
  std::vector<AlignedUnit> words;
  words.reserve(target.word_spans.size());
  for (std::size_t w = 0; w < target.word_spans.size(); ++w) {
    const auto [b, e] = target.word_spans[w];
    AlignedUnit u;
    u.label = target.word_texts[w];
    u.granularity = Granularity::kWord;
    u.start_s = phoneme_units[b].start_s;
    u.end_s = phoneme_units[e - 1].end_s;
    double conf = 0.0;
    for (std::size_t i = b; i < e; ++i) conf += phoneme_units[i].confidence;
    u.confidence = conf / static_cast<double>(e - b);
    words.push_back(std::move(u));
  }
  return words;
}

std::vector<std::string> ReadSymbols(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    symbols.push_back(line);
  }
  return symbols;
}

TargetSequence ReadTarget(const std::filesystem::path &path) {
  std::vector<std::pair<std::string, std::vector<std::string>>> words;
  for (const auto &row : ReadNdjson(path)) {
    try {
      words.emplace_back(row.at("word").get<std::string>(),
                         row.at("phonemes").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorKind::kData, path.string() + ": malformed target word: " + e.what());
    }
    if (words.back().second.empty())
      throw Error(ErrorKind::kData, path.string() + ": word '" + words.back().first +
                                        "' has no phonemes");
  }
  return TargetSequence::FromWords(words);
}

void WriteTarget(const std::filesystem::path &path, const TargetSequence &target) {
  target.Validate();
  std::vector<Json> rows;
  for (std::size_t w = 0; w < target.word_spans.size(); ++w) {
    const auto [b, e] = target.word_spans[w];
    Json j;
    j["word"] = target.word_texts[w];
    j["phonemes"] = std::vector<std::string>(target.phonemes.begin() + b,
                                             target.phonemes.begin() + e);
    rows.push_back(std::move(j));
  }
  WriteNdjson(path, rows);
}

}  // namespace granalign::ctc
