// granalign/src/dataset.cc

#include "granalign/dataset.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "granalign/error.h"

namespace granalign::dataset {

std::string_view LabelName(Label l) { return l == Label::kPD ? "PD" : "HC"; }

Label ParseLabel(std::string_view name) {
  if (name == "PD") return Label::kPD;
  if (name == "HC") return Label::kHC;
  throw Error(ErrorKind::kData, "label must be PD or HC, got '" + std::string(name) + "'");
}

std::string_view SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error(ErrorKind::kData, "unknown split '" + std::string(name) + "'");
}

Json RecordToJson(const UtteranceRecord &r) {
  Json j;
  j["utterance_id"] = r.utterance_id;
  j["speaker_id"] = r.speaker_id;
  j["language"] = r.language;
  j["label"] = LabelName(r.label);
  j["duration_s"] = r.duration_s;
  Json units = Json::array();
  for (const auto &e : r.units) {
    Json u = UnitToJson(e.unit);
    u["feature_ref"] = {{"file", e.feature.file}, {"row", e.feature.row}};
    units.push_back(std::move(u));
  }
  j["units"] = std::move(units);
  return j;
}

UtteranceRecord RecordFromJson(const nlohmann::json &j) {
  UtteranceRecord r;
  try {
    r.utterance_id = j.at("utterance_id").get<std::string>();
    r.speaker_id = j.at("speaker_id").get<std::string>();
    r.language = j.at("language").get<std::string>();
    r.label = ParseLabel(j.at("label").get<std::string>());
    r.duration_s = j.at("duration_s").get<double>();
    for (const auto &u : j.at("units")) {
      const auto &ref = u.at("feature_ref");
      r.units.push_back({UnitFromJson(u), {ref.at("file").get<std::string>(),
                                           ref.at("row").get<std::size_t>()}});
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, std::string("malformed utterance record: ") + e.what());
  }
  if (r.language != "it" && r.language != "es" && r.language != "en")
    throw Error(ErrorKind::kData, r.utterance_id + ": language must be it, es or en");
  if (!(r.duration_s > 0.0))
    throw Error(ErrorKind::kData, r.utterance_id + ": duration_s must be positive");
  for (std::size_t i = 1; i < r.units.size(); ++i)
    if (r.units[i].unit.start_s < r.units[i - 1].unit.start_s)
      throw Error(ErrorKind::kData, r.utterance_id + ": units must be sorted by start_s");
  return r;
}

std::vector<UtteranceRecord> ReadManifest(const std::filesystem::path &path) {
  std::vector<UtteranceRecord> records;
  for (const auto &row : ReadNdjson(path)) records.push_back(RecordFromJson(row));
  return records;
}

void WriteManifest(const std::filesystem::path &path, std::span<const UtteranceRecord> records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto &r : records) rows.push_back(RecordToJson(r));
  WriteNdjson(path, rows);
}

void FeatureStore::Add(const std::string &name, FloatMatrix matrix) {
  if (matrix.rows > 0) {
    if (dim_ == 0) dim_ = matrix.cols;
    if (matrix.cols != dim_)
      throw Error(ErrorKind::kData, name + " has dimension " + std::to_string(matrix.cols) +
                                        ", expected " + std::to_string(dim_));
  }
  for (float f : matrix.data)
    if (!std::isfinite(f)) throw Error(ErrorKind::kData, name + " contains non-finite values");
  files_[name] = std::move(matrix);
}

void FeatureStore::LoadFiles(std::span<const std::filesystem::path> paths) {
  for (const auto &p : paths) Add(p.filename().string(), ReadFmat(p));
}

std::span<const float> FeatureStore::Row(const FeatureRef &ref) const {
  const auto it = files_.find(ref.file);
  if (it == files_.end()) throw Error(ErrorKind::kData, "unknown feature file '" + ref.file + "'");
  if (ref.row >= it->second.rows)
    throw Error(ErrorKind::kData, "feature row " + std::to_string(ref.row) + " out of range in " +
                                      ref.file);
  return it->second.row(ref.row);
}

FilterResult FilterUnits(std::span<const UtteranceRecord> records, double conf_threshold) {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0))
    throw Error(ErrorKind::kPrecondition, "confidence threshold must lie in [0,1]");
  FilterResult out;
  for (const auto &r : records) {
    UtteranceRecord kept = r;
    std::erase_if(kept.units,
                  [&](const UnitEntry &e) { return e.unit.confidence < conf_threshold; });
    if (kept.units.empty()) {
      out.dropped_ids.push_back(r.utterance_id);
    } else {
      out.records.push_back(std::move(kept));
    }
  }
  return out;
}

SelectResult SelectGranularity(std::span<const UtteranceRecord> records, Granularity g) {
  SelectResult out;
  for (const auto &r : records) {
    UtteranceRecord kept = r;
    std::erase_if(kept.units, [&](const UnitEntry &e) { return e.unit.granularity != g; });
    if (kept.units.empty()) out.empty_ids.push_back(r.utterance_id);
    out.records.push_back(std::move(kept));
  }
  return out;
}

std::vector<UtteranceRecord> SplitAssignment::Select(std::span<const UtteranceRecord> records,
                                                     Split s) const {
  std::vector<UtteranceRecord> out;
  for (const auto &r : records) {
    const auto it = speaker_split.find(r.speaker_id);
    if (it == speaker_split.end())
      throw Error(ErrorKind::kData, "speaker '" + r.speaker_id + "' has no split assignment");
    if (it->second == s) out.push_back(r);
  }
  return out;
}

namespace {

struct SpeakerInfo {
  Label label;
  std::string language;
  double total_duration = 0.0;
  std::size_t records = 0;
  int bin = 0;
};

std::map<std::string, SpeakerInfo> CollectSpeakers(std::span<const UtteranceRecord> records,
                                                   int n_bins) {
  if (n_bins < 1) throw Error(ErrorKind::kPrecondition, "need at least one duration bin");
  std::map<std::string, SpeakerInfo> speakers;
  for (const auto &r : records) {
    auto [it, inserted] = speakers.try_emplace(r.speaker_id, SpeakerInfo{r.label, r.language});
    if (!inserted && (it->second.label != r.label || it->second.language != r.language))
      throw Error(ErrorKind::kPrecondition,
                  "speaker '" + r.speaker_id + "' has more than one label or language");
    it->second.total_duration += r.duration_s;
    ++it->second.records;
  }
  // Quantile bins over the per-speaker totals, by rank. Speakers with equal
  // totals share the rank of the first of them, so ties never straddle bins.
  std::vector<std::string> order;
  for (const auto &[id, _] : speakers) order.push_back(id);
  std::stable_sort(order.begin(), order.end(), [&](const auto &a, const auto &b) {
    return speakers[a].total_duration < speakers[b].total_duration;
  });
  const std::size_t n = order.size();
  std::size_t tie_rank = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    if (rank > 0 && speakers[order[rank]].total_duration != speakers[order[rank - 1]].total_duration)
      tie_rank = rank;
    speakers[order[rank]].bin = static_cast<int>(tie_rank * static_cast<std::size_t>(n_bins) / n);
  }
  return speakers;
}

std::string StratumKey(const SpeakerInfo &s) {
  return std::string(LabelName(s.label)) + "/" + s.language + "/" + std::to_string(s.bin);
}

}  // namespace

std::map<std::string, std::string> SpeakerStrata(std::span<const UtteranceRecord> records,
                                                 int n_duration_bins) {
  std::map<std::string, std::string> out;
  for (const auto &[id, info] : CollectSpeakers(records, n_duration_bins))
    out[id] = StratumKey(info);
  return out;
}

SplitAssignment StratifiedSpeakerSplit(std::span<const UtteranceRecord> records,
                                       const SplitOptions &options) {
  const auto &ratios = options.ratios;
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 ||
      std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0.0; }))
    throw Error(ErrorKind::kPrecondition, "split ratios must be non-negative and sum to 1");

  const auto speakers = CollectSpeakers(records, options.n_duration_bins);
  if (speakers.size() < 3)
    throw Error(ErrorKind::kInfeasible, "need at least 3 speakers to split, got " +
                                            std::to_string(speakers.size()));

  std::map<std::string, std::vector<std::string>> strata;
  for (const auto &[id, info] : speakers) strata[StratumKey(info)].push_back(id);

  SplitAssignment out;
  out.seed = options.seed;
  std::mt19937_64 rng(options.seed);
  for (auto &[key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    std::stable_sort(members.begin(), members.end(), [&](const auto &a, const auto &b) {
      return speakers.at(a).records > speakers.at(b).records;
    });
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (std::size_t n = 0; n < members.size(); ++n) {
      std::size_t pick = 0;
      double best_deficit = -1e300;
      for (std::size_t k = 0; k < 3; ++k) {
        const double deficit = ratios[k] * static_cast<double>(n + 1) - static_cast<double>(counts[k]);
        if (deficit > best_deficit + 1e-12) {
          best_deficit = deficit;
          pick = k;
        }
      }
      ++counts[pick];
      out.speaker_split[members[n]] = static_cast<Split>(pick);
    }
  }
  return out;
}

std::vector<LabeledSequence> Materialize(std::span<const UtteranceRecord> records,
                                         const FeatureStore &store) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const auto &r : records) {
    if (r.units.empty())
      throw Error(ErrorKind::kPrecondition,
                  "record '" + r.utterance_id + "' has no units; filter it first");
    LabeledSequence s;
    s.utterance_id = r.utterance_id;
    s.speaker_id = r.speaker_id;
    s.label = r.label == Label::kPD ? 1 : 0;
    s.features.resize(static_cast<Eigen::Index>(r.units.size()),
                      static_cast<Eigen::Index>(store.dimension()));
    for (std::size_t i = 0; i < r.units.size(); ++i) {
      const auto row = store.Row(r.units[i].feature);
      for (std::size_t d = 0; d < row.size(); ++d)
        s.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = row[d];
      s.unit_labels.push_back(r.units[i].unit.label);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Batch PadBatch(std::span<const LabeledSequence> sequences, std::span<const std::size_t> order) {
  Batch b;
  Eigen::Index max_len = 0;
  Eigen::Index dim = 0;
  for (std::size_t idx : order) {
    const auto &s = sequences[idx];
    if (s.length() == 0)
      throw Error(ErrorKind::kPrecondition,
                  "record '" + s.utterance_id + "' has no units; filter it first");
    if (dim == 0) dim = s.features.cols();
    if (s.features.cols() != dim)
      throw Error(ErrorKind::kConsistency, "sequences in a batch differ in feature dimension");
    max_len = std::max(max_len, s.length());
  }
  for (std::size_t idx : order) {
    const auto &s = sequences[idx];
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(max_len, dim);
    padded.topRows(s.length()) = s.features;
    b.features.push_back(std::move(padded));
    std::vector<bool> m(static_cast<std::size_t>(max_len), false);
    std::fill(m.begin(), m.begin() + s.length(), true);
    b.mask.push_back(std::move(m));
    b.labels.push_back(s.label);
    b.lengths.push_back(s.length());
    b.source.push_back(idx);
  }
  return b;
}

std::vector<Batch> MakeBatches(std::span<const LabeledSequence> sequences, std::size_t batch_size,
                               std::uint64_t seed) {
  if (batch_size < 1) throw Error(ErrorKind::kPrecondition, "batch size must be at least 1");
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(PadBatch(sequences, std::span(order).subspan(start, end - start)));
  }
  return out;
}

}  // namespace granalign::dataset
