// granalign/src/syllabifier.cc

#include "granalign/syllabifier.h"

#include <fstream>
#include <sstream>

#include "granalign/error.h"

namespace granalign::syllable {

std::string_view SonorityClassName(SonorityClass c) {
  switch (c) {
    case SonorityClass::kPlosive: return "plosive";
    case SonorityClass::kAffricate: return "affricate";
    case SonorityClass::kFricative: return "fricative";
    case SonorityClass::kNasal: return "nasal";
    case SonorityClass::kLiquid: return "liquid";
    case SonorityClass::kGlide: return "glide";
    case SonorityClass::kVowel: return "vowel";
  }
  return "plosive";
}

SonorityClass ParseSonorityClass(std::string_view name) {
  for (std::size_t i = 0; i < kNumSonorityClasses; ++i) {
    const auto c = static_cast<SonorityClass>(i);
    if (SonorityClassName(c) == name) return c;
  }
  throw Error(ErrorKind::kData, "unknown sonority class '" + std::string(name) + "'");
}

void SonorityScale::Validate() const {
  const int vowel = rank(SonorityClass::kVowel);
  for (std::size_t i = 0; i < kNumSonorityClasses; ++i) {
    if (static_cast<SonorityClass>(i) == SonorityClass::kVowel) continue;
    if (class_ranks[i] >= vowel)
      throw Error(ErrorKind::kPrecondition, "vowels must hold the unique maximal sonority rank");
  }
}

PhonemeInventory::PhonemeInventory(std::map<std::string, SonorityClass> entries,
                                   SonorityClass fallback, SonorityScale scale)
    : entries_(std::move(entries)), fallback_(fallback), scale_(scale) {
  scale_.Validate();
}

PhonemeInventory PhonemeInventory::Default() {
  std::map<std::string, SonorityClass> e;
  const auto add = [&e](std::initializer_list<const char *> symbols, SonorityClass c) {
    for (const char *s : symbols) e[s] = c;
  };
  add({"a", "e", "i", "o", "u", "y", "ɛ", "ɔ", "ə", "ɪ", "ʊ", "æ", "ɑ", "ɒ", "ʌ", "ø", "œ", "ɐ",
       "ɜ", "ɚ", "ɝ", "ɨ", "ʉ", "ɯ", "ɤ", "ɵ", "ɘ", "ɞ", "ʏ", "ɶ", "aɪ", "aʊ", "eɪ", "oʊ", "ɔɪ",
       "əʊ", "ɪə", "eə", "ʊə"},
      SonorityClass::kVowel);
  add({"p", "b", "t", "d", "k", "g", "ɡ", "q", "ɢ", "ʔ", "c", "ɟ", "ʈ", "ɖ"},
      SonorityClass::kPlosive);
  add({"tʃ", "dʒ", "ts", "dz", "t͡ʃ", "d͡ʒ", "t͡s", "d͡z", "tɕ", "dʑ", "pf"},
      SonorityClass::kAffricate);
  add({"f", "v", "s", "z", "ʃ", "ʒ", "θ", "ð", "x", "ɣ", "h", "ɦ", "χ", "ʁ", "ç", "ʝ", "β", "ɸ",
       "ɕ", "ʑ", "ʂ", "ʐ", "ħ", "ʕ"},
      SonorityClass::kFricative);
  add({"m", "n", "ɲ", "ŋ", "ɱ", "ɳ", "ɴ"}, SonorityClass::kNasal);
  add({"l", "r", "ɾ", "ɹ", "ʎ", "ʀ", "ɫ", "ɭ", "ɽ", "ɻ", "ʟ"}, SonorityClass::kLiquid);
  add({"j", "w", "ɥ", "ɰ", "ʋ"}, SonorityClass::kGlide);
  return PhonemeInventory(std::move(e));
}

PhonemeInventory PhonemeInventory::Load(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  std::map<std::string, SonorityClass> e;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::kData,
                  path.string() + ":" + std::to_string(lineno) + ": expected symbol<TAB>class");
    e[line.substr(0, tab)] = ParseSonorityClass(line.substr(tab + 1));
  }
  return PhonemeInventory(std::move(e));
}

namespace {

std::string StripMarks(std::string_view symbol) {
  static constexpr std::string_view kMarks[] = {"ː", "ˑ", "ˈ", "ˌ"};
  std::string out(symbol);
  for (auto mark : kMarks) {
    for (auto pos = out.find(mark); pos != std::string::npos; pos = out.find(mark))
      out.erase(pos, mark.size());
  }
  return out;
}

}  // namespace

Classification Classify(std::string_view symbol, const PhonemeInventory &inv) {
  const auto &entries = inv.entries();
  auto it = entries.find(std::string(symbol));
  if (it == entries.end()) it = entries.find(StripMarks(symbol));
  if (it == entries.end())
    return {inv.fallback_class(), inv.scale().rank(inv.fallback_class()), true};
  return {it->second, inv.scale().rank(it->second), false};
}

std::vector<Syllable> SspSyllabify(const std::vector<std::string> &phonemes,
                                   const PhonemeInventory &inv) {
  if (phonemes.empty()) throw Error(ErrorKind::kEmptyInput, "cannot syllabify an empty word");
  const std::size_t n = phonemes.size();
  std::vector<int> rank(n);
  std::vector<std::size_t> nuclei;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = Classify(phonemes[i], inv);
    rank[i] = c.rank;
    if (c.sonority_class == SonorityClass::kVowel) nuclei.push_back(i);
  }

  if (nuclei.empty()) {
    std::size_t peak = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (rank[i] > rank[peak]) peak = i;
    return {{0, n, peak}};
  }

  std::vector<Syllable> out;
  out.reserve(nuclei.size());
  std::size_t begin = 0;
  for (std::size_t k = 0; k + 1 < nuclei.size(); ++k) {
    // Grow the next onset leftward from the consonant before the next nucleus
    // while sonority keeps falling (or levels) away from it.
    const std::size_t next = nuclei[k + 1];
    std::size_t onset = next;
    while (onset > nuclei[k] + 1 && (onset == next || rank[onset - 1] <= rank[onset])) --onset;
    out.push_back({begin, onset, nuclei[k]});
    begin = onset;
  }
  out.push_back({begin, n, nuclei.back()});
  return out;
}

std::vector<AlignedUnit> AlignSyllables(const std::vector<Syllable> &syllables,
                                        const std::vector<AlignedUnit> &phoneme_units) {
  const std::size_t expected = syllables.empty() ? 0 : syllables.back().end;
  if (phoneme_units.size() != expected)
    throw Error(ErrorKind::kConsistency,
                "got " + std::to_string(phoneme_units.size()) + " phoneme units for a word of " +
                    std::to_string(expected) + " phonemes");
  std::vector<AlignedUnit> out;
  out.reserve(syllables.size());
  for (const auto &s : syllables) {
    if (s.end <= s.begin || s.end > phoneme_units.size())
      throw Error(ErrorKind::kConsistency, "syllable range outside the word");
    AlignedUnit u;
    u.granularity = Granularity::kSyllable;
    double conf = 0.0;
    for (std::size_t i = s.begin; i < s.end; ++i) {
      u.label += phoneme_units[i].label;
      conf += phoneme_units[i].confidence;
    }
    u.start_s = phoneme_units[s.begin].start_s;
    u.end_s = phoneme_units[s.end - 1].end_s;
    u.confidence = conf / static_cast<double>(s.end - s.begin);
    out.push_back(std::move(u));
  }
  return out;
}

std::string Render(const std::vector<Syllable> &syllables,
                   const std::vector<std::string> &phonemes) {
  std::ostringstream os;
  for (std::size_t k = 0; k < syllables.size(); ++k) {
    if (k > 0) os << '.';
    for (std::size_t i = syllables[k].begin; i < syllables[k].end; ++i) os << phonemes[i];
  }
  return os.str();
}

}  // namespace granalign::syllable
