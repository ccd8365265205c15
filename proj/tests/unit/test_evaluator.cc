#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "granalign/evaluator.h"
#include "oracles/metric_bruteforce.h"
#include "test_helpers.h"

using namespace granalign::eval;
using granalign::ErrorKind;
using granalign::Granularity;

TEST_CASE("subject aggregation") {
  const std::vector<SegmentPrediction> segs{
      {"A", 0.6, Label::kPD}, {"A", 0.8, Label::kPD}, {"A", 0.1, Label::kPD}};
  const auto a = AggregateSubjects(segs);
  REQUIRE(a.size() == 1);
  CHECK(a[0].mean_pd_prob == doctest::Approx(0.5));
  CHECK(a[0].predicted == Label::kPD);

  const std::vector<SegmentPrediction> single{{"B", 0.4, Label::kPD}};
  CHECK(AggregateSubjects(single)[0].predicted == Label::kHC);

  const std::vector<SegmentPrediction> two{{"B", 0.0, Label::kHC}, {"A", 1.0, Label::kPD}};
  const auto out = AggregateSubjects(two);
  REQUIRE(out.size() == 2);
  CHECK(out[0].speaker_id == "A");
  CHECK(out[0].predicted == Label::kPD);
  CHECK(out[1].predicted == Label::kHC);

  const std::vector<SegmentPrediction> conflict{{"A", 0.2, Label::kPD}, {"A", 0.3, Label::kHC}};
  CHECK_THROWS_KIND(AggregateSubjects(conflict), ErrorKind::kData);
}

TEST_CASE("aggregation ignores segment order") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SegmentPrediction> segs;
  for (int i = 0; i < 60; ++i)
    segs.push_back({"s" + std::to_string(i % 7), u(rng), (i % 7) % 2 ? Label::kPD : Label::kHC});
  const auto base = AggregateSubjects(segs);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(segs.begin(), segs.end(), rng);
    const auto again = AggregateSubjects(segs);
    REQUIRE(again.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(again[i].speaker_id == base[i].speaker_id);
      CHECK(again[i].mean_pd_prob == doctest::Approx(base[i].mean_pd_prob).epsilon(1e-12));
      CHECK(again[i].predicted == base[i].predicted);
    }
  }
}

TEST_CASE("metric worked examples") {
  const std::vector<double> sep{0.9, 0.8, 0.3, 0.2};
  const std::vector<int> sep_labels{1, 1, 0, 0};
  CHECK(Auroc(sep, sep_labels) == 1.0);
  CHECK(AveragePrecision(sep, sep_labels) == 1.0);

  const std::vector<double> mixed{0.8, 0.6, 0.4, 0.2};
  const std::vector<int> mixed_labels{1, 0, 1, 0};
  CHECK(Auroc(mixed, mixed_labels) == 0.75);

  const std::vector<int> all_hc{0, 0, 0}, truth{1, 0, 0};
  CHECK(F1Score(all_hc, truth) == 0.0);
  CHECK(Accuracy(all_hc, truth) == doctest::Approx(2.0 / 3));

  const std::vector<double> s1{0.3, 0.7};
  const std::vector<int> one_class{1, 1};
  CHECK_THROWS_KIND(Auroc(s1, one_class), ErrorKind::kUndefinedMetric);
  CHECK_THROWS_KIND(AveragePrecision(s1, one_class), ErrorKind::kUndefinedMetric);
}

TEST_CASE("single-class subject sets keep accuracy and F1") {
  const std::vector<SubjectPrediction> subjects{{"A", 0.7, Label::kPD, Label::kPD},
                                                {"B", 0.2, Label::kHC, Label::kPD}};
  const auto r = ComputeMetrics(subjects);
  CHECK(r.accuracy == 0.5);
  CHECK(r.f1 == doctest::Approx(2.0 / 3));
  CHECK_FALSE(r.auroc.has_value());
  CHECK_FALSE(r.auprc.has_value());
  CHECK(r.n_subjects == 2);
}

TEST_CASE("metrics equal the brute-force definitions") {
  std::mt19937_64 rng(2);
  int checked = 0;
  for (int draw = 0; draw < 500; ++draw) {
    const int n = 2 + static_cast<int>(rng() % 11);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // Coarse scores so that ties occur often.
    for (int i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % 6) / 5.0;
      labels[i] = static_cast<int>(rng() % 2);
    }
    const int pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == n) continue;
    CHECK(Auroc(scores, labels) == oracle::PairwiseAuroc(scores, labels));
    CHECK(std::abs(AveragePrecision(scores, labels) - oracle::ThresholdAveragePrecision(scores, labels)) <=
          1e-12);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("label swap mirrors AUROC on tie-free instances") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 200; ++draw) {
    std::vector<double> scores(8);
    std::vector<int> labels(8), swapped(8);
    for (int i = 0; i < 8; ++i) {
      scores[i] = u(rng);
      labels[i] = i % 2;
      swapped[i] = 1 - labels[i];
    }
    CHECK(Auroc(scores, swapped) == doctest::Approx(1.0 - Auroc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("seed summaries") {
  const std::vector<double> aurocs{0.90, 0.92, 0.94, 0.91, 0.93};
  const auto ms = SampleMeanStd(aurocs);
  CHECK(ms.mean == doctest::Approx(0.92).epsilon(1e-12));
  CHECK(ms.std == doctest::Approx(std::sqrt(0.001 / 4)).epsilon(1e-12));
  CHECK(std::abs(ms.std - 0.0158) < 5e-5);

  const std::vector<double> one{0.9};
  CHECK_THROWS_KIND(SampleMeanStd(one), ErrorKind::kInsufficientSeeds);

  MetricsReport r;
  r.accuracy = 0.8;
  r.f1 = 0.75;
  r.auroc = 0.9;
  r.auprc = 0.85;
  r.n_subjects = 10;
  const std::vector<MetricsReport> same(5, r);
  const auto s = Summarize(same);
  CHECK(s.n_seeds == 5);
  CHECK(s.auroc.mean == doctest::Approx(0.9));
  CHECK(s.auroc.std == 0.0);
  CHECK(s.accuracy.std == 0.0);
  CHECK_THROWS_KIND(Summarize(std::vector<MetricsReport>{r}), ErrorKind::kInsufficientSeeds);
}

TEST_CASE("report formatting") {
  CHECK(FormatMeanStd({0.9378, 0.0234}) == "0.9378 ± 0.0234");
  CHECK(FormatMeanStd({0.92, 0.0158114}) == "0.9200 ± 0.0158");

  SeedSummary s;
  s.accuracy = {0.9217, 0.0243};
  s.f1 = {0.91, 0.02};
  s.auroc = {0.9378, 0.0234};
  s.auprc = {0.93, 0.03};
  s.n_seeds = 5;
  const auto tables = FormatTables({{"phoneme", s}});
  CHECK(tables.find("AUROC") != std::string::npos);
  CHECK(tables.find("AUPRC") != std::string::npos);
  CHECK(tables.find("0.9378 ± 0.0234") != std::string::npos);
  CHECK(tables.find("0.9217 ± 0.0243") != std::string::npos);
  CHECK(tables.find("Phoneme") != std::string::npos);
}

TEST_CASE("attention report worked examples") {
  Eigen::MatrixXd one(2, 1);
  one << 1.0, 1.0;
  const std::vector<std::string> a{"a"};
  AttentionAccumulator acc;
  acc.Add(one, a);
  auto r = acc.Report(Granularity::kPhoneme);
  REQUIRE(r.entries.size() == 1);
  CHECK(r.entries[0].label == "a");
  CHECK(r.entries[0].total_mass == 1.0);
  CHECK(r.entries[0].top1_count == 1);
  CHECK(r.entries[0].occurrences == 1);

  // Two heads whose average is [0.5, 0.3, 0.2].
  Eigen::MatrixXd three(2, 3);
  three << 0.6, 0.2, 0.2,  //
      0.4, 0.4, 0.2;
  const std::vector<std::string> labels{"x", "y", "z"};
  AttentionAccumulator acc3;
  acc3.Add(three, labels);
  r = acc3.Report(Granularity::kSyllable);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].label == "x");
  CHECK(r.entries[1].label == "y");
  CHECK(r.entries[2].label == "z");
  CHECK(r.entries[0].total_mass == doctest::Approx(0.5));
  CHECK(r.entries[1].total_mass == doctest::Approx(0.3));
  CHECK(r.entries[0].top1_count == 1);
  CHECK(r.entries[1].top1_count == 0);
  CHECK(r.granularity == Granularity::kSyllable);

  const std::vector<std::string> short_labels{"x", "y"};
  CHECK_THROWS_KIND(acc3.Add(three, short_labels), ErrorKind::kConsistency);
}

TEST_CASE("attention masses sum to the sequence count and truncate to the top entries") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<Eigen::MatrixXd> att;
  std::vector<std::vector<std::string>> labels;
  for (int s = 0; s < 40; ++s) {
    const int len = 1 + static_cast<int>(rng() % 9);
    Eigen::MatrixXd m(3, len);
    std::vector<std::string> lab;
    for (int h = 0; h < 3; ++h) {
      for (int t = 0; t < len; ++t) m(h, t) = u(rng);
      m.row(h) /= m.row(h).sum();
    }
    for (int t = 0; t < len; ++t) lab.push_back("l" + std::to_string(rng() % 30));
    att.push_back(m);
    labels.push_back(lab);
  }
  const auto r = BuildAttentionReport(att, labels, Granularity::kWord);
  CHECK(r.sequences == 40);
  CHECK(std::abs(r.mass_before_truncation - 40.0) <= 1e-6);
  CHECK(r.entries.size() == 20);
  int top1 = 0;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(r.entries[i].total_mass >= 0.0);
    CHECK(r.entries[i].mean_weight == doctest::Approx(r.entries[i].total_mass / r.entries[i].occurrences));
    if (i > 0) CHECK(r.entries[i].total_mass <= r.entries[i - 1].total_mass);
    top1 += r.entries[i].top1_count;
  }
  CHECK(top1 <= 40);

  const auto rows = AttentionReportToJson(r);
  CHECK(rows.size() == 20);
  CHECK(rows[0].contains("total_mass"));
  const auto csv = AttentionReportToCsv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}
