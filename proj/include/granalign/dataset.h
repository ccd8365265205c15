// granalign/dataset.h
//
// Utterance manifests, confidence filtering, stratified speaker-independent
// splitting and padded batch construction.

#ifndef GRANALIGN_DATASET_H_
#define GRANALIGN_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "granalign/fmat.h"
#include "granalign/units.h"

namespace granalign::dataset {

enum class Label { kHC = 0, kPD = 1 };

std::string_view LabelName(Label l);
Label ParseLabel(std::string_view name);

struct FeatureRef {
  std::string file;
  std::size_t row = 0;

  bool operator==(const FeatureRef &) const = default;
};

struct UnitEntry {
  AlignedUnit unit;
  FeatureRef feature;

  bool operator==(const UnitEntry &) const = default;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string language;  // it, es or en
  Label label = Label::kHC;
  double duration_s = 0.0;
  std::vector<UnitEntry> units;

  bool operator==(const UtteranceRecord &) const = default;
};

Json RecordToJson(const UtteranceRecord &r);
UtteranceRecord RecordFromJson(const nlohmann::json &j);
std::vector<UtteranceRecord> ReadManifest(const std::filesystem::path &path);
void WriteManifest(const std::filesystem::path &path, std::span<const UtteranceRecord> records);

// Feature matrices addressed by (file, row). File keys are the names used in
// feature refs.
class FeatureStore {
 public:
  void Add(const std::string &name, FloatMatrix matrix);
  // Registers each path under its file name.
  void LoadFiles(std::span<const std::filesystem::path> paths);

  bool contains(const std::string &name) const { return files_.count(name) != 0; }
  std::size_t dimension() const { return dim_; }

  // Throws kData when the file or row is missing.
  std::span<const float> Row(const FeatureRef &ref) const;

 private:
  std::map<std::string, FloatMatrix> files_;
  std::size_t dim_ = 0;
};

struct FilterResult {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> dropped_ids;  // records left without units
};

// Drops units with confidence < threshold, then records without units.
FilterResult FilterUnits(std::span<const UtteranceRecord> records, double conf_threshold);

struct SelectResult {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> empty_ids;  // records with no unit of the granularity
};

SelectResult SelectGranularity(std::span<const UtteranceRecord> records, Granularity g);

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

std::string_view SplitName(Split s);
Split ParseSplit(std::string_view name);

struct SplitAssignment {
  std::map<std::string, Split> speaker_split;
  std::uint64_t seed = 0;

  std::vector<UtteranceRecord> Select(std::span<const UtteranceRecord> records, Split s) const;
};

struct SplitOptions {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  int n_duration_bins = 3;
  std::uint64_t seed = 0;
};

// Speakers are binned by total-duration quantile and stratified by
// (label, language, bin). Within a stratum they are shuffled by seed, ordered
// by descending record count and each is given to the split furthest below
// its target share of the stratum.
SplitAssignment StratifiedSpeakerSplit(std::span<const UtteranceRecord> records,
                                       const SplitOptions &options);

// Stratum key of every speaker, as used by StratifiedSpeakerSplit.
std::map<std::string, std::string> SpeakerStrata(std::span<const UtteranceRecord> records,
                                                 int n_duration_bins);

// A record resolved against the feature store: one row per unit.
struct LabeledSequence {
  std::string utterance_id;
  std::string speaker_id;
  int label = 0;  // 1 = PD
  Eigen::MatrixXd features;  // length x D
  std::vector<std::string> unit_labels;

  Eigen::Index length() const { return features.rows(); }
};

std::vector<LabeledSequence> Materialize(std::span<const UtteranceRecord> records,
                                         const FeatureStore &store);

struct Batch {
  std::vector<Eigen::MatrixXd> features;  // B entries of Lmax x D, zero padded
  std::vector<std::vector<bool>> mask;    // B x Lmax, true = real step
  std::vector<int> labels;
  std::vector<Eigen::Index> lengths;
  std::vector<std::size_t> source;  // index of each item in the input sequences

  std::size_t size() const { return labels.size(); }
  Eigen::Index max_length() const { return features.empty() ? 0 : features.front().rows(); }
};

// Pads the given sequences (in order) into one batch.
Batch PadBatch(std::span<const LabeledSequence> sequences, std::span<const std::size_t> order);

// Shuffles by seed and cuts into batches of `batch_size`; the final partial
// batch is kept.
std::vector<Batch> MakeBatches(std::span<const LabeledSequence> sequences, std::size_t batch_size,
                               std::uint64_t seed);

}  // namespace granalign::dataset

#endif  // GRANALIGN_DATASET_H_
