// granalign/units.h
//
// AlignedUnit, the time-stamped phoneme/syllable/word record passed between
// stages, and NDJSON helpers.

#ifndef GRANALIGN_UNITS_H_
#define GRANALIGN_UNITS_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace granalign {

using Json = nlohmann::ordered_json;

enum class Granularity { kPhoneme, kSyllable, kWord };

std::string_view GranularityName(Granularity g);
// Throws kPrecondition on anything other than phoneme/syllable/word.
Granularity ParseGranularity(std::string_view name);

struct AlignedUnit {
  std::string label;
  Granularity granularity = Granularity::kPhoneme;
  double start_s = 0.0;
  double end_s = 0.0;
  double confidence = 0.0;

  bool operator==(const AlignedUnit &) const = default;
};

// {"label","granularity","start_s","end_s","confidence"} in that order.
Json UnitToJson(const AlignedUnit &u);
AlignedUnit UnitFromJson(const nlohmann::ordered_json &j);
AlignedUnit UnitFromJson(const nlohmann::json &j);

// Shifts every unit by `offset_s` (alignment runs per VAD segment).
void OffsetUnits(std::vector<AlignedUnit> *units, double offset_s);

// NDJSON: one compact JSON object per line. Blank lines are skipped.
std::vector<nlohmann::json> ReadNdjson(const std::filesystem::path &path);
void WriteNdjson(const std::filesystem::path &path, const std::vector<Json> &rows);

std::vector<AlignedUnit> ReadUnits(const std::filesystem::path &path);
void WriteUnits(const std::filesystem::path &path, const std::vector<AlignedUnit> &units);

}  // namespace granalign

#endif  // GRANALIGN_UNITS_H_
