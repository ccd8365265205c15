// granalign/src/units.cc

#include "granalign/units.h"

#include <fstream>

#include "granalign/error.h"

namespace granalign {

std::string_view GranularityName(Granularity g) {
  switch (g) {
    case Granularity::kPhoneme: return "phoneme";
    case Granularity::kSyllable: return "syllable";
    case Granularity::kWord: return "word";
  }
  return "phoneme";
}

Granularity ParseGranularity(std::string_view name) {
  if (name == "phoneme") return Granularity::kPhoneme;
  if (name == "syllable") return Granularity::kSyllable;
  if (name == "word") return Granularity::kWord;
  throw Error(ErrorKind::kPrecondition,
              "granularity must be phoneme, syllable or word, got '" + std::string(name) + "'");
}

Json UnitToJson(const AlignedUnit &u) {
  Json j;
  j["label"] = u.label;
  j["granularity"] = GranularityName(u.granularity);
  j["start_s"] = u.start_s;
  j["end_s"] = u.end_s;
  j["confidence"] = u.confidence;
  return j;
}

namespace {

template <typename J>
AlignedUnit UnitFromJsonImpl(const J &j) {
  try {
    AlignedUnit u;
    u.label = j.at("label").template get<std::string>();
    u.granularity = ParseGranularity(j.at("granularity").template get<std::string>());
    u.start_s = j.at("start_s").template get<double>();
    u.end_s = j.at("end_s").template get<double>();
    u.confidence = j.at("confidence").template get<double>();
    if (!(u.end_s > u.start_s))
      throw Error(ErrorKind::kData, "unit '" + u.label + "' has end_s <= start_s");
    if (!(u.confidence >= 0.0 && u.confidence <= 1.0))
      throw Error(ErrorKind::kData, "unit '" + u.label + "' confidence outside [0,1]");
    return u;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, std::string("malformed unit: ") + e.what());
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::kData) throw;
    throw Error(ErrorKind::kData, e.what());
  }
}

}  // namespace

AlignedUnit UnitFromJson(const nlohmann::ordered_json &j) { return UnitFromJsonImpl(j); }
AlignedUnit UnitFromJson(const nlohmann::json &j) { return UnitFromJsonImpl(j); }

void OffsetUnits(std::vector<AlignedUnit> *units, double offset_s) {
  for (auto &u : *units) {
    u.start_s += offset_s;
    u.end_s += offset_s;
  }
}

std::vector<nlohmann::json> ReadNdjson(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorKind::kData,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void WriteNdjson(const std::filesystem::path &path, const std::vector<Json> &rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kData, "cannot write " + path.string());
  for (const auto &r : rows) os << r.dump() << '\n';
}

std::vector<AlignedUnit> ReadUnits(const std::filesystem::path &path) {
  std::vector<AlignedUnit> units;
  for (const auto &row : ReadNdjson(path)) units.push_back(UnitFromJson(row));
  return units;
}

void WriteUnits(const std::filesystem::path &path, const std::vector<AlignedUnit> &units) {
  std::vector<Json> rows;
  rows.reserve(units.size());
  for (const auto &u : units) rows.push_back(UnitToJson(u));
  WriteNdjson(path, rows);
}

}  // namespace granalign
