// src/pipeline.cc

#include "granalign/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "granalign/checkpoint.h"
#include "granalign/error.h"
#include "granalign/fmat.h"

namespace granalign::pipeline {

namespace {

Json ReadJsonFile(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const fs::path &path, const Json &j) {
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  if (!os) throw Error(ErrorKind::kData, "cannot write " + path.string());
}

constexpr dataset::Split kSplits[] = {dataset::Split::kTrain, dataset::Split::kVal,
                                      dataset::Split::kTest};

}  // namespace

ctc::EmissionMatrix LoadEmissions(const fs::path &fmat, std::vector<std::string> symbols,
                                  std::optional<double> frame_dur_s,
                                  std::optional<std::size_t> blank_index) {
  const FloatMatrix m = ReadFmat(fmat);
  auto sidecar = fmat;
  sidecar.replace_extension(".meta.ndjson");
  if (fs::exists(sidecar)) {
    const auto rows = ReadNdjson(sidecar);
    if (!rows.empty()) {
      try {
        if (!frame_dur_s && rows[0].contains("frame_dur_s"))
          frame_dur_s = rows[0].at("frame_dur_s").get<double>();
        if (!blank_index && rows[0].contains("blank_index"))
          blank_index = rows[0].at("blank_index").get<std::size_t>();
      } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::kData, sidecar.string() + ": " + e.what());
      }
    }
  }
  if (!blank_index) {
    const auto it = std::find(symbols.begin(), symbols.end(), ctc::kBlankState);
    blank_index = it == symbols.end() ? 0 : static_cast<std::size_t>(it - symbols.begin());
  }
  if (m.cols != symbols.size())
    throw Error(ErrorKind::kData, fmat.string() + " has " + std::to_string(m.cols) +
                                      " columns but the symbol table lists " +
                                      std::to_string(symbols.size()));
  return ctc::EmissionMatrix::FromFmat(m, std::move(symbols), *blank_index,
                                       frame_dur_s.value_or(0.02));
}

vad::FrameProbSeries LoadFrameProbs(const fs::path &fmat, int frame_hop, int sample_rate) {
  const FloatMatrix m = ReadFmat(fmat);
  vad::FrameProbSeries s;
  s.probs.assign(m.data.begin(), m.data.end());
  s.frame_hop = frame_hop;
  s.sample_rate = sample_rate;
  return s;
}

std::vector<vad::SpeechSegment> ReadSegments(const fs::path &path) {
  std::vector<vad::SpeechSegment> out;
  for (const auto &j : ReadNdjson(path)) out.push_back(vad::SegmentFromJson(j));
  return out;
}

void WriteSegments(const fs::path &path, std::span<const vad::SpeechSegment> segments) {
  std::vector<Json> rows;
  for (const auto &s : segments) rows.push_back(vad::SegmentToJson(s));
  WriteNdjson(path, rows);
}

std::vector<AlignedUnit> SyllabifyWords(const std::vector<AlignedUnit> &phonemes,
                                        const ctc::TargetSequence &target,
                                        const syllable::PhonemeInventory &inventory,
                                        bool *unknown_symbols) {
  target.Validate();
  if (phonemes.size() != target.phonemes.size())
    throw Error(ErrorKind::kConsistency,
                "got " + std::to_string(phonemes.size()) + " phoneme units for a target of " +
                    std::to_string(target.phonemes.size()) + " phonemes");
  std::vector<AlignedUnit> out;
  bool unknown = false;
  for (const auto &[b, e] : target.word_spans) {
    const std::vector<std::string> word(target.phonemes.begin() + b, target.phonemes.begin() + e);
    for (const auto &p : word) unknown |= syllable::Classify(p, inventory).unknown;
    const std::vector<AlignedUnit> units(phonemes.begin() + b, phonemes.begin() + e);
    const auto syl = syllable::AlignSyllables(syllable::SspSyllabify(word, inventory), units);
    out.insert(out.end(), syl.begin(), syl.end());
  }
  if (unknown_symbols) *unknown_symbols = unknown;
  return out;
}

UtteranceAlignment AlignUtterance(const ctc::EmissionMatrix &em, const ctc::TargetSequence &target,
                                  std::span<const vad::SpeechSegment> segments,
                                  const syllable::PhonemeInventory &inventory) {
  UtteranceAlignment out;
  const std::size_t T = em.num_frames();
  out.first_frame = 0;
  out.end_frame = T;
  if (!segments.empty()) {
    const double fd = em.frame_dur_s();
    const double start = segments.front().start_s;
    const double end = segments.back().end_s;
    out.first_frame = std::min(T, static_cast<std::size_t>(std::floor(start / fd + 1e-9)));
    out.end_frame = std::min(T, static_cast<std::size_t>(std::ceil(end / fd - 1e-9)));
    if (out.end_frame <= out.first_frame)
      throw Error(ErrorKind::kInfeasible, "speech segments cover no emission frames");
  }

  const std::size_t V = em.num_symbols();
  const std::size_t n = out.end_frame - out.first_frame;
  std::vector<double> window(n * V);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t v = 0; v < V; ++v) window[t * V + v] = em.logprob(out.first_frame + t, v);
  const ctc::EmissionMatrix sub(std::move(window), n, em.symbols(), em.blank_index(),
                                em.frame_dur_s(), 1e-3);

  auto alignment = ctc::ViterbiAlign(sub, target);
  out.phonemes = std::move(alignment.phonemes);
  OffsetUnits(&out.phonemes, static_cast<double>(out.first_frame) * em.frame_dur_s());
  out.words = ctc::GroupWords(out.phonemes, target);
  out.syllables = SyllabifyWords(out.phonemes, target, inventory, &out.unknown_symbols);
  return out;
}

std::map<std::string, dataset::UtteranceRecord> ReadUtteranceMeta(const fs::path &path) {
  std::map<std::string, dataset::UtteranceRecord> out;
  for (auto j : ReadNdjson(path)) {
    j["units"] = nlohmann::json::array();
    auto r = dataset::RecordFromJson(j);
    const std::string id = r.utterance_id;
    if (!out.emplace(id, std::move(r)).second)
      throw Error(ErrorKind::kData, path.string() + ": duplicate utterance " + id);
  }
  return out;
}

BuildResult BuildDataset(std::span<const UtteranceInput> inputs, const BuildOptions &options,
                         const fs::path &out_dir, std::ostream &log) {
  if (options.granularities.empty())
    throw Error(ErrorKind::kPrecondition, "no granularity selected");
  fs::create_directories(out_dir);

  // Attach every unit of the selected granularities to its row in the
  // source feature file.
  std::map<std::string, FloatMatrix> sources;
  std::vector<dataset::UtteranceRecord> records;
  for (const auto &in : inputs) {
    dataset::UtteranceRecord r = in.meta;
    r.units.clear();
    for (const Granularity g : options.granularities) {
      std::size_t row = 0;
      const auto it = in.features.find(g);
      for (const auto &u : in.units) {
        if (u.granularity != g) continue;
        if (it == in.features.end())
          throw Error(ErrorKind::kData, in.meta.utterance_id + ": no " +
                                            std::string(GranularityName(g)) + " feature file");
        r.units.push_back({u, {it->second.string(), row++}});
      }
      if (it == in.features.end()) continue;
      const std::string key = it->second.string();
      if (!sources.count(key)) sources.emplace(key, ReadFmat(it->second));
      if (sources.at(key).rows != row)
        throw Error(ErrorKind::kData, key + " has " + std::to_string(sources.at(key).rows) +
                                          " rows for " + std::to_string(row) + " " +
                                          std::string(GranularityName(g)) + " units");
    }
    std::stable_sort(r.units.begin(), r.units.end(), [](const auto &a, const auto &b) {
      return a.unit.start_s < b.unit.start_s;
    });
    records.push_back(std::move(r));
  }

  std::size_t dim = 0;
  for (const auto &[name, m] : sources) {
    if (m.rows == 0) continue;
    if (dim == 0) dim = m.cols;
    if (m.cols != dim)
      throw Error(ErrorKind::kData, name + " has dimension " + std::to_string(m.cols) +
                                        ", expected " + std::to_string(dim));
  }

  const auto filtered = dataset::FilterUnits(records, options.conf_threshold);
  const auto assignment = dataset::StratifiedSpeakerSplit(filtered.records, options.split);
  const auto strata = dataset::SpeakerStrata(filtered.records, options.split.n_duration_bins);

  BuildResult result;
  Json counts = Json::object();
  for (const auto split : kSplits) {
    const std::string name(dataset::SplitName(split));
    auto part = assignment.Select(filtered.records, split);
    std::size_t total_rows = 0;
    for (const auto &r : part) total_rows += r.units.size();
    FloatMatrix feats(total_rows, dim);
    std::size_t row = 0;
    std::set<std::string> speakers;
    for (auto &r : part) {
      speakers.insert(r.speaker_id);
      for (auto &u : r.units) {
        const auto src = sources.at(u.feature.file).row(u.feature.row);
        std::copy(src.begin(), src.end(), feats.data.begin() + row * dim);
        u.feature = {name + ".fmat", row++};
      }
    }
    WriteFmat(out_dir / (name + ".fmat"), feats);
    dataset::WriteManifest(out_dir / (name + ".ndjson"), part);
    result.outputs.push_back(out_dir / (name + ".ndjson"));
    result.outputs.push_back(out_dir / (name + ".fmat"));
    result.records[split] = part.size();
    counts[name] = {{"records", part.size()}, {"speakers", speakers.size()}, {"units", total_rows}};
    log << "build: " << name << " " << part.size() << " records, " << speakers.size()
        << " speakers, " << total_rows << " units\n";
    if (part.empty())
      log << "build: warning: the " << name << " split is empty; strata may be too small for the"
          << " requested ratios (try fewer duration bins)\n";
  }

  std::vector<Json> split_rows;
  for (const auto &[spk, split] : assignment.speaker_split)
    split_rows.push_back({{"speaker_id", spk},
                          {"split", dataset::SplitName(split)},
                          {"stratum", strata.at(spk)}});
  WriteNdjson(out_dir / "split.ndjson", split_rows);
  result.outputs.push_back(out_dir / "split.ndjson");

  std::vector<Json> dropped_rows;
  for (const auto &id : filtered.dropped_ids)
    dropped_rows.push_back({{"utterance_id", id}, {"reason", "no unit reached the confidence threshold"}});
  WriteNdjson(out_dir / "dropped.ndjson", dropped_rows);
  result.outputs.push_back(out_dir / "dropped.ndjson");
  result.dropped = filtered.dropped_ids.size();

  Json info;
  Json grans = Json::array();
  for (const Granularity g : options.granularities) grans.push_back(GranularityName(g));
  info["granularities"] = std::move(grans);
  info["feature_dim"] = dim;
  info["conf_threshold"] = options.conf_threshold;
  info["split_ratios"] = options.split.ratios;
  info["duration_bins"] = options.split.n_duration_bins;
  info["split_seed"] = options.split.seed;
  info["dropped"] = result.dropped;
  info["counts"] = std::move(counts);
  WriteJsonFile(out_dir / "dataset.json", info);
  result.outputs.push_back(out_dir / "dataset.json");
  return result;
}

std::vector<dataset::LabeledSequence> LoadedDataset::Sequences(dataset::Split split,
                                                               Granularity g) const {
  const auto selected = dataset::SelectGranularity(splits.at(split), g);
  std::vector<dataset::UtteranceRecord> nonempty;
  for (const auto &r : selected.records)
    if (!r.units.empty()) nonempty.push_back(r);
  return dataset::Materialize(nonempty, store);
}

LoadedDataset LoadDataset(const fs::path &dir) {
  LoadedDataset d;
  d.dir = fs::absolute(dir).lexically_normal();
  const Json info = ReadJsonFile(dir / "dataset.json");
  try {
    for (const auto &g : info.at("granularities")) d.granularities.push_back(ParseGranularity(g.get<std::string>()));
    d.feature_dim = info.at("feature_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, (dir / "dataset.json").string() + ": " + e.what());
  }
  std::vector<fs::path> files;
  for (const auto split : kSplits) {
    const std::string name(dataset::SplitName(split));
    d.splits[split] = dataset::ReadManifest(dir / (name + ".ndjson"));
    files.push_back(dir / (name + ".fmat"));
  }
  d.store.LoadFiles(files);
  if (d.store.dimension() != 0 && d.store.dimension() != d.feature_dim)
    throw Error(ErrorKind::kData, "feature files disagree with dataset.json feature_dim");
  return d;
}

fs::path RunDirectory(const fs::path &runs_dir, Granularity g, std::uint64_t seed) {
  return runs_dir / std::string(GranularityName(g)) / ("seed_" + std::to_string(seed));
}

TrainResult TrainRun(const LoadedDataset &data, Granularity g, model::ClassifierConfig model,
                     const train::TrainConfig &config, std::uint64_t seed, const fs::path &runs_dir,
                     std::ostream &log) {
  if (std::find(data.granularities.begin(), data.granularities.end(), g) == data.granularities.end())
    throw Error(ErrorKind::kPrecondition, "dataset " + data.dir.string() + " has no " +
                                              std::string(GranularityName(g)) + " units");
  model.input_dim = static_cast<int>(data.feature_dim);
  const auto train_seqs = data.Sequences(dataset::Split::kTrain, g);
  const auto val_seqs = data.Sequences(dataset::Split::kVal, g);

  TrainResult result;
  result.fit = train::Fit(train_seqs, val_seqs, model, config, seed);
  const auto &fit = result.fit;
  for (const auto &e : fit.history)
    log << "train " << GranularityName(g) << " seed " << seed << " epoch " << e.epoch
        << ": loss " << e.mean_batch_loss << ", val loss " << e.val_loss << ", val F1 "
        << e.val_f1 << (e.best ? " *" : "") << "\n";

  const fs::path dir = RunDirectory(runs_dir, g, seed);
  fs::create_directories(dir / "checkpoint");
  for (const auto &f : checkpoint::Save(dir / "checkpoint", fit.best_params, model, fit.steps))
    result.outputs.push_back(dir / "checkpoint" / f);

  std::vector<Json> history;
  for (const auto &e : fit.history) history.push_back(checkpoint::EpochToJson(e));
  WriteNdjson(dir / "history.ndjson", history);
  result.outputs.push_back(dir / "history.ndjson");

  Json run;
  run["dataset"] = data.dir.string();
  run["granularity"] = GranularityName(g);
  run["seed"] = seed;
  run["model"] = checkpoint::ConfigToJson(model);
  run["train"] = checkpoint::TrainConfigToJson(config);
  run["train_sequences"] = train_seqs.size();
  run["val_sequences"] = val_seqs.size();
  run["best_epoch"] = fit.best_epoch;
  run["initial_val_loss"] = fit.initial_val_loss;
  run["steps"] = fit.steps;
  run["diverged"] = fit.diverged;
  run["stopped_early"] = fit.stopped_early;
  WriteJsonFile(dir / "run.json", run);
  result.outputs.push_back(dir / "run.json");

  result.run = {dir, data.dir, g, seed};
  return result;
}

std::vector<RunInfo> FindRuns(const fs::path &runs_dir) {
  if (!fs::is_directory(runs_dir))
    throw Error(ErrorKind::kData, runs_dir.string() + " is not a directory");
  std::vector<RunInfo> runs;
  for (const auto &entry : fs::recursive_directory_iterator(runs_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "run.json") continue;
    const Json j = ReadJsonFile(entry.path());
    try {
      runs.push_back({entry.path().parent_path(), j.at("dataset").get<std::string>(),
                      ParseGranularity(j.at("granularity").get<std::string>()),
                      j.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorKind::kData, entry.path().string() + ": " + e.what());
    }
  }
  std::sort(runs.begin(), runs.end(), [](const RunInfo &a, const RunInfo &b) {
    if (a.granularity != b.granularity) return a.granularity < b.granularity;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.dir < b.dir;
  });
  if (runs.empty()) throw Error(ErrorKind::kData, "no run.json found under " + runs_dir.string());
  return runs;
}

namespace {

// Datasets are shared by all seeds of a granularity; load each once.
class DatasetCache {
 public:
  const LoadedDataset &Get(const fs::path &dir) {
    auto it = cache_.find(dir);
    if (it == cache_.end()) it = cache_.emplace(dir, LoadDataset(dir)).first;
    return it->second;
  }

 private:
  std::map<fs::path, LoadedDataset> cache_;
};

}  // namespace

EvalResult EvaluateRuns(std::span<const RunInfo> runs, const fs::path &out_dir, std::ostream &log) {
  fs::create_directories(out_dir);
  DatasetCache datasets;
  std::vector<Json> prediction_rows, metric_rows;
  std::map<std::string, std::vector<eval::MetricsReport>> reports;

  for (const auto &run : runs) {
    const auto &data = datasets.Get(run.dataset);
    const auto loaded = checkpoint::Load(run.dir / "checkpoint");
    const auto test = data.Sequences(dataset::Split::kTest, run.granularity);
    if (test.empty())
      throw Error(ErrorKind::kData, "test split of " + run.dataset.string() + " has no sequences");
    const auto inference = train::Predict(test, loaded.params, loaded.config);

    const std::string g(GranularityName(run.granularity));
    std::vector<eval::SegmentPrediction> segments;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto label = test[i].label ? dataset::Label::kPD : dataset::Label::kHC;
      segments.push_back({test[i].speaker_id, inference.pd_prob[i], label});
      prediction_rows.push_back({{"granularity", g},
                                 {"seed", run.seed},
                                 {"level", "segment"},
                                 {"utterance_id", test[i].utterance_id},
                                 {"speaker_id", test[i].speaker_id},
                                 {"pd_prob", inference.pd_prob[i]},
                                 {"true_label", dataset::LabelName(label)}});
    }
    const auto subjects = eval::AggregateSubjects(segments);
    for (const auto &s : subjects)
      prediction_rows.push_back({{"granularity", g},
                                 {"seed", run.seed},
                                 {"level", "subject"},
                                 {"speaker_id", s.speaker_id},
                                 {"pd_prob", s.mean_pd_prob},
                                 {"predicted", dataset::LabelName(s.predicted)},
                                 {"true_label", dataset::LabelName(s.true_label)}});
    const auto report = eval::ComputeMetrics(subjects);
    Json m;
    m["granularity"] = g;
    m["seed"] = run.seed;
    const Json metrics = eval::MetricsToJson(report);
    for (const auto &[k, v] : metrics.items()) m[k] = v;
    metric_rows.push_back(m);
    reports[g].push_back(report);
    log << "eval " << g << " seed " << run.seed << ": " << m.dump() << "\n";
  }

  EvalResult result;
  std::vector<Json> summary_rows;
  for (const auto &[g, list] : reports) {
    const auto s = eval::Summarize(list);
    result.summaries[g] = s;
    Json row;
    row["granularity"] = g;
    const Json summary = eval::SummaryToJson(s);
    for (const auto &[k, v] : summary.items()) row[k] = v;
    summary_rows.push_back(std::move(row));
  }
  result.tables = eval::FormatTables(result.summaries);

  WriteNdjson(out_dir / "predictions.ndjson", prediction_rows);
  WriteNdjson(out_dir / "metrics.ndjson", metric_rows);
  WriteNdjson(out_dir / "summary.ndjson", summary_rows);
  {
    std::ofstream os(out_dir / "tables.txt");
    os << result.tables;
    if (!os) throw Error(ErrorKind::kData, "cannot write " + (out_dir / "tables.txt").string());
  }
  for (const char *f : {"predictions.ndjson", "metrics.ndjson", "summary.ndjson", "tables.txt"})
    result.outputs.push_back(out_dir / f);
  return result;
}

AttentionResult AttentionReports(std::span<const RunInfo> runs, std::size_t top, const fs::path &out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  DatasetCache datasets;
  std::map<Granularity, eval::AttentionAccumulator> acc;
  for (const auto &run : runs) {
    const auto &data = datasets.Get(run.dataset);
    const auto loaded = checkpoint::Load(run.dir / "checkpoint");
    const auto test = data.Sequences(dataset::Split::kTest, run.granularity);
    const auto inference = train::Predict(test, loaded.params, loaded.config);
    auto &a = acc[run.granularity];
    for (std::size_t i = 0; i < test.size(); ++i) a.Add(inference.attention[i], test[i].unit_labels);
  }

  AttentionResult result;
  std::vector<Json> rows;
  for (const auto &[g, a] : acc) {
    auto report = a.Report(g, top);
    for (auto &row : eval::AttentionReportToJson(report)) rows.push_back(std::move(row));
    auto csv = out;
    csv.replace_extension(acc.size() == 1 ? ".csv" : "." + std::string(GranularityName(g)) + ".csv");
    std::ofstream os(csv);
    os << eval::AttentionReportToCsv(report);
    if (!os) throw Error(ErrorKind::kData, "cannot write " + csv.string());
    result.outputs.push_back(csv);
    result.reports.push_back(std::move(report));
  }
  WriteNdjson(out, rows);
  result.outputs.insert(result.outputs.begin(), out);
  return result;
}

}  // namespace granalign::pipeline
