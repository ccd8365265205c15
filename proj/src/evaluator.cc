// granalign/src/evaluator.cc

#include "granalign/evaluator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "granalign/error.h"

namespace granalign::eval {
namespace {

void CheckSameSize(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::kPrecondition, "scores and labels differ in length");
  if (a == 0) throw Error(ErrorKind::kEmptyInput, "no predictions");
}

std::pair<std::size_t, std::size_t> CountClasses(std::span<const int> truth) {
  std::size_t pos = 0;
  for (int y : truth) pos += (y == 1);
  return {pos, truth.size() - pos};
}

std::string Fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

std::vector<SubjectPrediction> AggregateSubjects(std::span<const SegmentPrediction> segments) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    Label label;
  };
  std::map<std::string, Acc> by_speaker;
  for (const auto &s : segments) {
    auto [it, inserted] = by_speaker.try_emplace(s.speaker_id, Acc{0.0, 0, s.true_label});
    if (!inserted && it->second.label != s.true_label)
      throw Error(ErrorKind::kData, "speaker '" + s.speaker_id + "' has conflicting labels");
    it->second.sum += s.pd_prob;
    ++it->second.n;
  }
  std::vector<SubjectPrediction> out;
  for (const auto &[id, acc] : by_speaker) {
    const double mean = acc.sum / static_cast<double>(acc.n);
    out.push_back({id, mean, mean >= 0.5 ? Label::kPD : Label::kHC, acc.label});
  }
  return out;
}

double Accuracy(std::span<const int> predicted, std::span<const int> truth) {
  CheckSameSize(predicted.size(), truth.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += (predicted[i] == truth[i]);
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double F1Score(std::span<const int> predicted, std::span<const int> truth) {
  CheckSameSize(predicted.size(), truth.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tp += (predicted[i] == 1 && truth[i] == 1);
    fp += (predicted[i] == 1 && truth[i] == 0);
    fn += (predicted[i] == 0 && truth[i] == 1);
  }
  if (tp == 0) return 0.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double Auroc(std::span<const double> scores, std::span<const int> truth) {
  CheckSameSize(scores.size(), truth.size());
  const auto [pos, neg] = CountClasses(truth);
  if (pos == 0 || neg == 0)
    throw Error(ErrorKind::kUndefinedMetric, "AUROC needs both classes");
  // Mann-Whitney U with average ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double AveragePrecision(std::span<const double> scores, std::span<const int> truth) {
  CheckSameSize(scores.size(), truth.size());
  const auto [pos, neg] = CountClasses(truth);
  if (pos == 0 || neg == 0)
    throw Error(ErrorKind::kUndefinedMetric, "AUPRC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

MetricsReport ComputeMetrics(std::span<const SubjectPrediction> subjects) {
  if (subjects.empty()) throw Error(ErrorKind::kEmptyInput, "no subjects to evaluate");
  std::vector<int> predicted, truth;
  std::vector<double> scores;
  for (const auto &s : subjects) {
    predicted.push_back(s.predicted == Label::kPD);
    truth.push_back(s.true_label == Label::kPD);
    scores.push_back(s.mean_pd_prob);
  }
  MetricsReport r;
  r.n_subjects = static_cast<int>(subjects.size());
  r.accuracy = Accuracy(predicted, truth);
  r.f1 = F1Score(predicted, truth);
  const auto [pos, neg] = CountClasses(truth);
  if (pos > 0 && neg > 0) {
    r.auroc = Auroc(scores, truth);
    r.auprc = AveragePrecision(scores, truth);
  }
  return r;
}

MeanStd SampleMeanStd(std::span<const double> values) {
  if (values.size() < 2)
    throw Error(ErrorKind::kInsufficientSeeds, "need at least 2 values for a standard deviation");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

SeedSummary Summarize(std::span<const MetricsReport> reports) {
  if (reports.size() < 2)
    throw Error(ErrorKind::kInsufficientSeeds,
                "need at least 2 seed reports, got " + std::to_string(reports.size()));
  std::vector<double> acc, f1, auroc, auprc;
  for (const auto &r : reports) {
    if (!r.auroc || !r.auprc)
      throw Error(ErrorKind::kUndefinedMetric, "a seed report lacks AUROC/AUPRC (single-class test set)");
    acc.push_back(r.accuracy);
    f1.push_back(r.f1);
    auroc.push_back(*r.auroc);
    auprc.push_back(*r.auprc);
  }
  SeedSummary s;
  s.accuracy = SampleMeanStd(acc);
  s.f1 = SampleMeanStd(f1);
  s.auroc = SampleMeanStd(auroc);
  s.auprc = SampleMeanStd(auprc);
  s.n_seeds = static_cast<int>(reports.size());
  return s;
}

std::string FormatMeanStd(const MeanStd &m) { return Fixed4(m.mean) + " ± " + Fixed4(m.std); }

std::string FormatTables(const std::map<std::string, SeedSummary> &by_granularity) {
  const auto cap = [](std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  };
  const auto pad = [](std::string s, std::size_t w) {
    // "±" is two bytes but one column.
    std::size_t cols = s.size();
    for (std::size_t p = s.find("±"); p != std::string::npos; p = s.find("±", p + 1)) --cols;
    if (cols < w) s.append(w - cols, ' ');
    return s;
  };
  std::ostringstream os;
  const auto table = [&](const char *title, const char *h1, const char *h2, auto first,
                         auto second) {
    os << title << "\n";
    os << pad("Granularity", 13) << pad(h1, 19) << h2 << "\n";
    for (const auto &[name, s] : by_granularity)
      os << pad(cap(name), 13) << pad(FormatMeanStd(first(s)), 19) << FormatMeanStd(second(s))
         << "\n";
    os << "\n";
  };
  table("Model Performance - AUROC and AUPRC", "AUROC", "AUPRC",
        [](const SeedSummary &s) { return s.auroc; }, [](const SeedSummary &s) { return s.auprc; });
  table("Model Performance - F1 and ACC", "F1", "ACC",
        [](const SeedSummary &s) { return s.f1; }, [](const SeedSummary &s) { return s.accuracy; });
  return os.str();
}

Json MetricsToJson(const MetricsReport &r) {
  Json j;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  j["auroc"] = r.auroc ? Json(*r.auroc) : Json(nullptr);
  j["auprc"] = r.auprc ? Json(*r.auprc) : Json(nullptr);
  j["n_subjects"] = r.n_subjects;
  return j;
}

Json SummaryToJson(const SeedSummary &s) {
  Json j;
  const auto put = [&j](const char *name, const MeanStd &m) {
    j[name] = {{"mean", m.mean}, {"std", m.std}};
  };
  put("accuracy", s.accuracy);
  put("f1", s.f1);
  put("auroc", s.auroc);
  put("auprc", s.auprc);
  j["n_seeds"] = s.n_seeds;
  return j;
}

void AttentionAccumulator::Add(const Eigen::MatrixXd &attention,
                               std::span<const std::string> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0) return;
  if (attention.cols() != n)
    throw Error(ErrorKind::kConsistency, "attention covers " + std::to_string(attention.cols()) +
                                             " steps but " + std::to_string(n) + " labels were given");
  const Eigen::VectorXd weights = attention.colwise().mean().transpose();
  Eigen::Index peak = 0;
  for (Eigen::Index t = 1; t < n; ++t)
    if (weights(t) > weights(peak)) peak = t;
  for (Eigen::Index t = 0; t < n; ++t) {
    auto &e = by_label_[labels[static_cast<std::size_t>(t)]];
    e.label = labels[static_cast<std::size_t>(t)];
    e.total_mass += weights(t);
    ++e.occurrences;
  }
  ++by_label_[labels[static_cast<std::size_t>(peak)]].top1_count;
  ++sequences_;
}

AttentionReport AttentionAccumulator::Report(Granularity g, std::size_t top) const {
  AttentionReport r;
  r.granularity = g;
  r.sequences = sequences_;
  for (const auto &[label, e] : by_label_) {
    AttentionEntry entry = e;
    entry.mean_weight = e.occurrences > 0 ? e.total_mass / e.occurrences : 0.0;
    r.mass_before_truncation += e.total_mass;
    r.entries.push_back(std::move(entry));
  }
  std::stable_sort(r.entries.begin(), r.entries.end(), [](const auto &a, const auto &b) {
    return a.total_mass > b.total_mass;
  });
  if (r.entries.size() > top) r.entries.resize(top);
  return r;
}

AttentionReport BuildAttentionReport(std::span<const Eigen::MatrixXd> attention,
                                     std::span<const std::vector<std::string>> labels,
                                     Granularity g, std::size_t top) {
  if (attention.size() != labels.size())
    throw Error(ErrorKind::kPrecondition, "attention and label lists differ in count");
  AttentionAccumulator acc;
  for (std::size_t i = 0; i < attention.size(); ++i) acc.Add(attention[i], labels[i]);
  return acc.Report(g, top);
}

std::vector<Json> AttentionReportToJson(const AttentionReport &r) {
  std::vector<Json> rows;
  int rank = 0;
  for (const auto &e : r.entries) {
    Json j;
    j["granularity"] = GranularityName(r.granularity);
    j["rank"] = ++rank;
    j["label"] = e.label;
    j["top1_count"] = e.top1_count;
    j["total_mass"] = e.total_mass;
    j["mean_weight"] = e.mean_weight;
    j["occurrences"] = e.occurrences;
    rows.push_back(std::move(j));
  }
  return rows;
}

std::string AttentionReportToCsv(const AttentionReport &r) {
  std::ostringstream os;
  os << "granularity,rank,label,top1_count,total_mass,mean_weight,occurrences\n";
  int rank = 0;
  for (const auto &e : r.entries) {
    os << GranularityName(r.granularity) << ',' << ++rank << ',' << e.label << ','
       << e.top1_count << ',' << e.total_mass << ',' << e.mean_weight << ',' << e.occurrences
       << '\n';
  }
  return os.str();
}

}  // namespace granalign::eval
