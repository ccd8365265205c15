// granalign/syllabifier.h
//
// Sonority-sequencing syllabification of IPA phoneme strings and composition
// of syllable time spans from aligned phonemes.

#ifndef GRANALIGN_SYLLABIFIER_H_
#define GRANALIGN_SYLLABIFIER_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "granalign/units.h"

namespace granalign::syllable {

enum class SonorityClass { kPlosive, kAffricate, kFricative, kNasal, kLiquid, kGlide, kVowel };

inline constexpr std::size_t kNumSonorityClasses = 7;

std::string_view SonorityClassName(SonorityClass c);
// Throws kData for unknown names.
SonorityClass ParseSonorityClass(std::string_view name);

// Rank per class. Vowels must hold the unique maximum.
struct SonorityScale {
  std::array<int, kNumSonorityClasses> class_ranks{0, 0, 1, 2, 3, 4, 5};

  int rank(SonorityClass c) const { return class_ranks[static_cast<std::size_t>(c)]; }
  void Validate() const;
};

class PhonemeInventory {
 public:
  // Built-in IPA inventory covering the eSpeak symbol set used for Italian,
  // Spanish and English.
  static PhonemeInventory Default();

  // Two columns per line: "symbol<TAB>class". '#' starts a comment.
  static PhonemeInventory Load(const std::filesystem::path &path);

  PhonemeInventory() = default;
  PhonemeInventory(std::map<std::string, SonorityClass> entries,
                   SonorityClass fallback = SonorityClass::kPlosive, SonorityScale scale = {});

  const std::map<std::string, SonorityClass> &entries() const { return entries_; }
  SonorityClass fallback_class() const { return fallback_; }
  const SonorityScale &scale() const { return scale_; }

  void Set(const std::string &symbol, SonorityClass c) { entries_[symbol] = c; }

 private:
  std::map<std::string, SonorityClass> entries_;
  SonorityClass fallback_ = SonorityClass::kPlosive;
  SonorityScale scale_;
};

struct Classification {
  SonorityClass sonority_class;
  int rank;
  bool unknown;  // true when the fallback class was used
};

// Exact lookup first, then lookup with length/stress marks stripped.
Classification Classify(std::string_view symbol, const PhonemeInventory &inv);

struct Syllable {
  std::size_t begin = 0;  // phoneme_range [begin, end)
  std::size_t end = 0;
  std::size_t nucleus = 0;

  bool operator==(const Syllable &) const = default;
};

// Vowels are nuclei; word-edge consonants join the first onset / last coda;
// each intervocalic cluster gives the following syllable the longest onset
// whose sonority never falls toward the nucleus. Vowelless words form a
// single syllable centred on their most sonorous phoneme.
std::vector<Syllable> SspSyllabify(const std::vector<std::string> &phonemes,
                                   const PhonemeInventory &inv);

// `phoneme_units` are the aligned units of the same word, one per phoneme.
std::vector<AlignedUnit> AlignSyllables(const std::vector<Syllable> &syllables,
                                        const std::vector<AlignedUnit> &phoneme_units);

// Joined syllable labels separated by '.', e.g. "pa.ta.ka".
std::string Render(const std::vector<Syllable> &syllables,
                   const std::vector<std::string> &phonemes);

}  // namespace granalign::syllable

#endif  // GRANALIGN_SYLLABIFIER_H_
