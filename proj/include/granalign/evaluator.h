// granalign/evaluator.h
//
// Subject-level aggregation, classification metrics, multi-seed summaries and
// attention interpretability reports.

#ifndef GRANALIGN_EVALUATOR_H_
#define GRANALIGN_EVALUATOR_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "granalign/dataset.h"
#include "granalign/units.h"

namespace granalign::eval {

using dataset::Label;

struct SegmentPrediction {
  std::string speaker_id;
  double pd_prob = 0.0;
  Label true_label = Label::kHC;
};

struct SubjectPrediction {
  std::string speaker_id;
  double mean_pd_prob = 0.0;
  Label predicted = Label::kHC;
  Label true_label = Label::kHC;
};

// Mean PD probability per speaker; PD iff mean >= 0.5. Output is sorted by
// speaker id. Conflicting labels for one speaker throw kData.
std::vector<SubjectPrediction> AggregateSubjects(std::span<const SegmentPrediction> segments);

// Labels are 1 for PD (positive), 0 for HC.
double Accuracy(std::span<const int> predicted, std::span<const int> truth);
double F1Score(std::span<const int> predicted, std::span<const int> truth);
// Probability that a random positive outscores a random negative, ties 1/2.
// Throws kUndefinedMetric unless both classes are present.
double Auroc(std::span<const double> scores, std::span<const int> truth);
// Step-wise average precision: sum over thresholds of
// (recall_k - recall_{k-1}) * precision_k. Throws kUndefinedMetric without
// both classes.
double AveragePrecision(std::span<const double> scores, std::span<const int> truth);

struct MetricsReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auroc;  // empty for single-class subject sets
  std::optional<double> auprc;
  int n_subjects = 0;
};

MetricsReport ComputeMetrics(std::span<const SubjectPrediction> subjects);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
};

struct SeedSummary {
  MeanStd accuracy, f1, auroc, auprc;
  int n_seeds = 0;
};

MeanStd SampleMeanStd(std::span<const double> values);

// Needs at least two reports, each with ranking metrics defined.
SeedSummary Summarize(std::span<const MetricsReport> reports);

// "0.9378 ± 0.0234"
std::string FormatMeanStd(const MeanStd &m);

// Two plain-text tables: AUROC/AUPRC and F1/ACC, one row per granularity.
std::string FormatTables(const std::map<std::string, SeedSummary> &by_granularity);

Json MetricsToJson(const MetricsReport &r);
Json SummaryToJson(const SeedSummary &s);

struct AttentionEntry {
  std::string label;
  int top1_count = 0;      // sequences where this label holds the peak step
  double total_mass = 0.0;  // summed head-averaged weight
  double mean_weight = 0.0;  // total_mass / occurrences
  int occurrences = 0;
};

struct AttentionReport {
  Granularity granularity = Granularity::kPhoneme;
  std::vector<AttentionEntry> entries;  // by total_mass, descending, truncated
  int sequences = 0;
  double mass_before_truncation = 0.0;
};

class AttentionAccumulator {
 public:
  // `attention` is heads x L (L >= labels.size()); only the first
  // labels.size() steps are read.
  void Add(const Eigen::MatrixXd &attention, std::span<const std::string> labels);

  AttentionReport Report(Granularity g, std::size_t top = 20) const;

 private:
  std::map<std::string, AttentionEntry> by_label_;
  int sequences_ = 0;
};

AttentionReport BuildAttentionReport(std::span<const Eigen::MatrixXd> attention,
                                     std::span<const std::vector<std::string>> labels,
                                     Granularity g, std::size_t top = 20);

std::vector<Json> AttentionReportToJson(const AttentionReport &r);
// label,top1_count,total_mass,mean_weight,occurrences
std::string AttentionReportToCsv(const AttentionReport &r);

}  // namespace granalign::eval

#endif  // GRANALIGN_EVALUATOR_H_
