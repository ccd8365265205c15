// src/cli/cli.cc

#include "granalign/cli.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "granalign/error.h"
#include "granalign/pipeline.h"
#include "granalign/run_manifest.h"
#include "granalign/synthetic.h"

namespace granalign::cli {

namespace {

namespace fs = std::filesystem;
namespace pl = granalign::pipeline;

// ---------------------------------------------------------------------------
// Flag helpers.

std::vector<std::uint64_t> ParseSeeds(const std::string &text) {
  const auto number = [&](const std::string &s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw CLI::ValidationError("--seed", "expected an integer, a range a..b or a list, got '" + text + "'");
    return std::stoull(s);
  };
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots)), hi = number(text.substr(dots + 2));
    if (hi < lo) throw CLI::ValidationError("--seed", "empty range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) seeds.push_back(number(item));
  if (seeds.empty()) throw CLI::ValidationError("--seed", "no seed given");
  return seeds;
}

// Explicit flag, then GRANALIGN_SEED, then the fallback.
std::vector<std::uint64_t> ResolveSeeds(const std::string &flag, std::vector<std::uint64_t> fallback) {
  if (!flag.empty()) return ParseSeeds(flag);
  if (const char *env = std::getenv("GRANALIGN_SEED"); env && *env) return ParseSeeds(env);
  return fallback;
}

std::vector<Granularity> ParseGranularities(const std::string &text) {
  if (text == "all") return {Granularity::kPhoneme, Granularity::kSyllable, Granularity::kWord};
  return {ParseGranularity(text)};
}

std::array<double, 3> ParseRatios(const std::string &text) {
  std::array<double, 3> r{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 3) throw CLI::ValidationError("--split", "expected three ratios, got '" + text + "'");
    try {
      r[n++] = std::stod(item);
    } catch (const std::exception &) {
      throw CLI::ValidationError("--split", "not a number: '" + item + "'");
    }
  }
  if (n != 3) throw CLI::ValidationError("--split", "expected three ratios, got '" + text + "'");
  return r;
}

void RequireDirectory(const fs::path &p) {
  if (!fs::is_directory(p)) throw Error(ErrorKind::kData, p.string() + " is not a directory");
}

fs::path SidecarManifest(const fs::path &out) {
  auto p = out;
  return p.replace_extension(".manifest.json");
}

// Every option of the subcommand with its effective value.
void RecordFlags(const CLI::App &sub, RunManifest &manifest) {
  for (const CLI::Option *opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() == 0) {
      manifest.SetFlag(name, opt->get_default_str());
      continue;
    }
    const auto &res = opt->results();
    if (res.size() == 1) manifest.SetFlag(name, res[0]);
    else manifest.SetFlag(name, res);
  }
}

struct ModelFlags {
  model::ClassifierConfig model;
  train::TrainConfig train;

  void Register(CLI::App *sub) {
    sub->add_option("--layers", model.num_layers, "BiLSTM layers")->capture_default_str();
    sub->add_option("--hidden", model.hidden, "hidden units per direction")->capture_default_str();
    sub->add_option("--heads", model.heads, "attention heads")->capture_default_str();
    sub->add_option("--dropout", model.dropout, "dropout between layers")->capture_default_str();
    sub->add_option("--lr", train.lr, "initial learning rate")->capture_default_str();
    sub->add_option("--weight-decay", train.weight_decay, "decoupled weight decay")->capture_default_str();
    sub->add_option("--clip", train.clip_norm, "global gradient norm bound (<= 0 disables)")
        ->capture_default_str();
    sub->add_option("--batch-size", train.batch_size, "sequences per batch")->capture_default_str();
    sub->add_option("--epochs", train.max_epochs, "maximum epochs")->capture_default_str();
    sub->add_option("--plateau-factor", train.plateau_factor, "learning-rate reduction factor")
        ->capture_default_str();
    sub->add_option("--plateau-patience", train.plateau_patience, "epochs before reducing the rate")
        ->capture_default_str();
    sub->add_option("--early-stop", train.early_stop_patience,
                    "epochs without a validation F1 gain before stopping")
        ->capture_default_str();
  }
};

std::string JoinSeeds(const std::vector<std::uint64_t> &seeds) {
  std::string s;
  for (const auto x : seeds) s += (s.empty() ? "" : "_") + std::to_string(x);
  return s;
}

// ---------------------------------------------------------------------------
// vad

struct VadArgs {
  std::string probs, out;
  int hop = 512, rate = 16000;
  vad::SegmenterConfig cfg;
};

int RunVad(const CLI::App &sub, const VadArgs &a, std::ostream &out) {
  RunManifest manifest("vad");
  RecordFlags(sub, manifest);
  manifest.AddInput(a.probs);
  const auto series = pl::LoadFrameProbs(a.probs, a.hop, a.rate);
  const auto segments = vad::Segment(series, a.cfg);
  pl::WriteSegments(a.out, segments);
  manifest.AddOutput(a.out);
  manifest.Write(SidecarManifest(a.out));
  out << segments.size() << " segments -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// align

struct AlignArgs {
  std::string emissions, symbols, target, out, segments, word_out;
  std::optional<double> frame_dur;
  std::optional<std::size_t> blank;
};

int RunAlign(const CLI::App &sub, const AlignArgs &a, std::ostream &out) {
  RunManifest manifest("align");
  RecordFlags(sub, manifest);
  manifest.AddInput(a.emissions);
  manifest.AddInput(a.symbols);
  manifest.AddInput(a.target);
  auto sidecar = fs::path(a.emissions).replace_extension(".meta.ndjson");
  if (fs::exists(sidecar)) manifest.AddInput(sidecar);

  const auto em = pl::LoadEmissions(a.emissions, ctc::ReadSymbols(a.symbols), a.frame_dur, a.blank);
  const auto target = ctc::ReadTarget(a.target);
  std::vector<vad::SpeechSegment> segments;
  if (!a.segments.empty()) {
    manifest.AddInput(a.segments);
    segments = pl::ReadSegments(a.segments);
  }
  const auto result = pl::AlignUtterance(em, target, segments, syllable::PhonemeInventory::Default());
  WriteUnits(a.out, result.phonemes);
  manifest.AddOutput(a.out);
  if (!a.word_out.empty()) {
    WriteUnits(a.word_out, result.words);
    manifest.AddOutput(a.word_out);
  }
  manifest.Write(SidecarManifest(a.out));
  out << result.phonemes.size() << " phonemes aligned over frames [" << result.first_frame << ", "
      << result.end_frame << ") -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// syllabify

struct SyllabifyArgs {
  std::string phones, words, inventory, out;
};

int RunSyllabify(const CLI::App &sub, const SyllabifyArgs &a, std::ostream &out, std::ostream &err) {
  RunManifest manifest("syllabify");
  RecordFlags(sub, manifest);
  manifest.AddInput(a.phones);
  manifest.AddInput(a.words);
  syllable::PhonemeInventory inv = syllable::PhonemeInventory::Default();
  if (!a.inventory.empty()) {
    manifest.AddInput(a.inventory);
    inv = syllable::PhonemeInventory::Load(a.inventory);
  }
  std::vector<AlignedUnit> phones;
  for (auto &u : ReadUnits(a.phones))
    if (u.granularity == Granularity::kPhoneme) phones.push_back(std::move(u));
  bool unknown = false;
  const auto syllables = pl::SyllabifyWords(phones, ctc::ReadTarget(a.words), inv, &unknown);
  if (unknown) err << "warning: symbols outside the inventory were classed as "
                   << syllable::SonorityClassName(inv.fallback_class()) << "\n";
  WriteUnits(a.out, syllables);
  manifest.AddOutput(a.out);
  manifest.Write(SidecarManifest(a.out));
  out << syllables.size() << " syllables -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  std::vector<std::string> units, features;
  std::string meta, granularity = "phoneme", split = "0.6,0.2,0.2", seed, out;
  double conf = 0.6;
  int bins = 3;
};

// "<utt>.<anything>" -> "<utt>"
std::string UtteranceIdOf(const fs::path &p) {
  const std::string name = p.filename().string();
  return name.substr(0, name.find('.'));
}

int RunBuild(const CLI::App &sub, const BuildArgs &a, std::ostream &out, std::ostream &err) {
  const auto seeds = ResolveSeeds(a.seed, {0});
  if (seeds.size() != 1) throw CLI::ValidationError("--seed", "build takes a single seed");
  RunManifest manifest("build");
  RecordFlags(sub, manifest);
  manifest.AddSeed(seeds[0]);

  pl::BuildOptions opt;
  opt.granularities = ParseGranularities(a.granularity);
  opt.conf_threshold = a.conf;
  opt.split.ratios = ParseRatios(a.split);
  opt.split.n_duration_bins = a.bins;
  opt.split.seed = seeds[0];

  manifest.AddInput(a.meta);
  const auto meta = pl::ReadUtteranceMeta(a.meta);
  std::map<std::string, pl::UtteranceInput> inputs;
  for (const auto &f : a.units) {
    manifest.AddInput(f);
    const std::string id = UtteranceIdOf(f);
    const auto it = meta.find(id);
    if (it == meta.end()) throw Error(ErrorKind::kData, f + ": utterance " + id + " is not in " + a.meta);
    auto &in = inputs[id];
    in.meta = it->second;
    const auto units = ReadUnits(f);
    in.units.insert(in.units.end(), units.begin(), units.end());
  }
  for (const auto &f : a.features) {
    manifest.AddInput(f);
    const std::string name = fs::path(f).filename().string();
    const auto first = name.find('.');
    const auto second = name.find('.', first + 1);
    if (first == std::string::npos || second == std::string::npos)
      throw Error(ErrorKind::kData, f + ": feature files are named <utterance>.<granularity>.fmat");
    const std::string id = name.substr(0, first);
    const auto g = ParseGranularity(name.substr(first + 1, second - first - 1));
    const auto it = inputs.find(id);
    if (it == inputs.end()) {
      err << "warning: " << f << " has no units file, ignored\n";
      continue;
    }
    it->second.features[g] = f;
  }
  std::vector<pl::UtteranceInput> list;
  for (auto &[id, in] : inputs) list.push_back(std::move(in));

  const auto result = pl::BuildDataset(list, opt, a.out, err);
  manifest.AddOutputs(result.outputs);
  manifest.Write(fs::path(a.out) / "manifest.json");
  out << "dataset: " << result.records.at(dataset::Split::kTrain) << " train, "
      << result.records.at(dataset::Split::kVal) << " val, " << result.records.at(dataset::Split::kTest)
      << " test, " << result.dropped << " dropped -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data, granularity = "phoneme", seed, out;
  ModelFlags flags;
};

int RunTrain(const CLI::App &sub, const TrainArgs &a, std::ostream &out, std::ostream &err) {
  std::vector<std::uint64_t> fallback;
  for (int s = 0; s < a.flags.train.seeds; ++s) fallback.push_back(static_cast<std::uint64_t>(s));
  const auto seeds = ResolveSeeds(a.seed, fallback);
  RequireDirectory(a.data);
  a.flags.train.Validate();

  RunManifest manifest("train");
  RecordFlags(sub, manifest);
  for (const auto s : seeds) manifest.AddSeed(s);
  manifest.AddInput(a.data);

  const auto data = pl::LoadDataset(a.data);
  const auto grans = a.granularity == "all" ? data.granularities : ParseGranularities(a.granularity);
  for (const auto g : grans)
    for (const auto s : seeds) {
      const auto r = pl::TrainRun(data, g, a.flags.model, a.flags.train, s, a.out, err);
      manifest.AddOutputs(r.outputs);
      out << GranularityName(g) << " seed " << s << ": best epoch " << r.fit.best_epoch << " -> "
          << r.run.dir.string() << "\n";
    }
  manifest.Write(fs::path(a.out) / ("manifest.train." + a.granularity + ".seed_" + JoinSeeds(seeds) + ".json"));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / attention

struct EvalArgs {
  std::string runs, out;
};

int RunEval(const CLI::App &sub, const EvalArgs &a, std::ostream &out, std::ostream &err) {
  RequireDirectory(a.runs);
  RunManifest manifest("eval");
  RecordFlags(sub, manifest);
  const auto runs = pl::FindRuns(a.runs);
  std::set<fs::path> datasets;
  for (const auto &r : runs) {
    manifest.AddSeed(r.seed);
    manifest.AddInput(r.dir);
    datasets.insert(r.dataset);
  }
  for (const auto &d : datasets) manifest.AddInput(d);
  const auto result = pl::EvaluateRuns(runs, a.out, err);
  manifest.AddOutputs(result.outputs);
  manifest.Write(fs::path(a.out) / "manifest.json");
  out << result.tables;
  return kExitOk;
}

struct AttentionArgs {
  std::string runs, out;
  std::size_t top = 20;
};

int RunAttention(const CLI::App &sub, const AttentionArgs &a, std::ostream &out) {
  RequireDirectory(a.runs);
  RunManifest manifest("attention");
  RecordFlags(sub, manifest);
  const auto runs = pl::FindRuns(a.runs);
  std::set<fs::path> datasets;
  for (const auto &r : runs) {
    manifest.AddSeed(r.seed);
    manifest.AddInput(r.dir);
    datasets.insert(r.dataset);
  }
  for (const auto &d : datasets) manifest.AddInput(d);
  const auto result = pl::AttentionReports(runs, a.top, a.out);
  manifest.AddOutputs(result.outputs);
  manifest.Write(SidecarManifest(a.out));
  for (const auto &r : result.reports) {
    out << GranularityName(r.granularity) << ":";
    for (const auto &e : r.entries) out << " " << e.label;
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string in, granularity = "phoneme", seed, out = "granalign_out", split = "0.6,0.2,0.2";
  int num_seeds = 5;
  int hop = 512, rate = 16000;
  vad::SegmenterConfig vad;
  double conf = 0.6;
  int bins = 3;
  std::size_t top = 20;
  unsigned jobs = 0;
  ModelFlags flags;
};

struct AlignOutcome {
  bool ok = false;
  std::string error;
  std::vector<AlignedUnit> units;
};

int RunPipeline(const CLI::App &sub, const PipelineArgs &a, std::ostream &out, std::ostream &err) {
  const auto base = ResolveSeeds(a.seed, {0});
  if (base.size() != 1) throw CLI::ValidationError("--seed", "pipeline takes a single base seed");
  if (a.num_seeds < 1) throw CLI::ValidationError("--num-seeds", "must be positive");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < a.num_seeds; ++i) seeds.push_back(base[0] + static_cast<std::uint64_t>(i));
  RequireDirectory(a.in);
  a.flags.train.Validate();
  vad::Validate(a.vad);
  const auto grans = ParseGranularities(a.granularity);

  RunManifest manifest("pipeline");
  RecordFlags(sub, manifest);
  for (const auto s : seeds) manifest.AddSeed(s);
  manifest.AddInput(a.in);

  const fs::path in(a.in), root(a.out);
  const auto entries = synthetic::ReadCorpusIndex(in);
  const auto symbols = ctc::ReadSymbols(in / "symbols.txt");
  const auto inventory = fs::exists(in / "inventory.tsv")
                             ? syllable::PhonemeInventory::Load(in / "inventory.tsv")
                             : syllable::PhonemeInventory::Default();
  fs::create_directories(root / "segments");
  fs::create_directories(root / "units");

  // Stage 1: VAD and alignment, one independent job per utterance.
  std::vector<AlignOutcome> outcomes(entries.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const auto &e = entries[i];
      try {
        const auto series = pl::LoadFrameProbs(e.vad, a.hop, a.rate);
        const auto segments = vad::Segment(series, a.vad);
        pl::WriteSegments(root / "segments" / (e.utterance_id + ".ndjson"), segments);
        if (segments.empty()) throw Error(ErrorKind::kEmptyInput, "no speech detected");
        const auto em = pl::LoadEmissions(e.emissions, symbols, std::nullopt, std::nullopt);
        const auto al = pl::AlignUtterance(em, ctc::ReadTarget(e.target), segments, inventory);
        auto &units = outcomes[i].units;
        units = al.phonemes;
        units.insert(units.end(), al.syllables.begin(), al.syllables.end());
        units.insert(units.end(), al.words.begin(), al.words.end());
        WriteUnits(root / "units" / (e.utterance_id + ".ndjson"), units);
        outcomes[i].ok = true;
      } catch (const Error &ex) {
        outcomes[i].error = ex.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs ? a.jobs : std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(entries.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();

  std::vector<Json> skipped;
  std::vector<pl::UtteranceInput> inputs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto &e = entries[i];
    manifest.AddOutput(root / "segments" / (e.utterance_id + ".ndjson"));
    if (!outcomes[i].ok) {
      skipped.push_back({{"utterance_id", e.utterance_id}, {"error", outcomes[i].error}});
      err << "skipped " << e.utterance_id << ": " << outcomes[i].error << "\n";
      continue;
    }
    manifest.AddOutput(root / "units" / (e.utterance_id + ".ndjson"));
    pl::UtteranceInput input;
    input.meta = {e.utterance_id, e.speaker_id, e.language, e.label, e.duration_s, {}};
    input.units = std::move(outcomes[i].units);
    for (const auto g : grans) input.features[g] = e.features(g);
    inputs.push_back(std::move(input));
  }
  WriteNdjson(root / "skipped.ndjson", skipped);
  manifest.AddOutput(root / "skipped.ndjson");
  out << "aligned " << inputs.size() << " of " << entries.size() << " utterances\n";

  // Stage 2: dataset.
  pl::BuildOptions bopt;
  bopt.granularities = grans;
  bopt.conf_threshold = a.conf;
  bopt.split.ratios = ParseRatios(a.split);
  bopt.split.n_duration_bins = a.bins;
  bopt.split.seed = base[0];
  const auto built = pl::BuildDataset(inputs, bopt, root / "dataset", err);
  manifest.AddOutputs(built.outputs);

  // Stage 3: training.
  const auto data = pl::LoadDataset(root / "dataset");
  std::vector<pl::RunInfo> runs;
  for (const auto g : grans)
    for (const auto s : seeds) {
      const auto r = pl::TrainRun(data, g, a.flags.model, a.flags.train, s, root / "runs", err);
      manifest.AddOutputs(r.outputs);
      runs.push_back(r.run);
    }

  // Stage 4: evaluation and attention.
  const auto evaluated = pl::EvaluateRuns(runs, root / "report", err);
  manifest.AddOutputs(evaluated.outputs);
  const auto attention = pl::AttentionReports(runs, a.top, root / "report" / "attention.ndjson");
  manifest.AddOutputs(attention.outputs);

  manifest.Write(root / "manifest.json");
  out << evaluated.tables;
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"granalign: forced alignment, speech-unit datasets and BiLSTM-attention classification"};
  app.name("granalign");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  VadArgs vad_args;
  auto *vad_cmd = app.add_subcommand("vad", "segment a speech-probability series");
  vad_cmd->add_option("--probs", vad_args.probs, "FMAT of per-frame speech probabilities")->required();
  vad_cmd->add_option("--hop", vad_args.hop, "samples per frame")->capture_default_str();
  vad_cmd->add_option("--rate", vad_args.rate, "sample rate in Hz")->capture_default_str();
  vad_cmd->add_option("--threshold", vad_args.cfg.threshold, "speech probability threshold")
      ->capture_default_str();
  vad_cmd->add_option("--max-seg", vad_args.cfg.max_segment_s, "maximum segment length in seconds")
      ->capture_default_str();
  vad_cmd->add_option("--min-gap", vad_args.cfg.min_gap_s, "shorter pauses are fused, in seconds")
      ->capture_default_str();
  vad_cmd->add_option("--out", vad_args.out, "segments NDJSON")->required();

  AlignArgs align_args;
  auto *align_cmd = app.add_subcommand("align", "CTC forced alignment of a phoneme target");
  align_cmd->add_option("--emissions", align_args.emissions, "T x V log-probability FMAT")->required();
  align_cmd->add_option("--symbols", align_args.symbols, "symbol table, one per line")->required();
  align_cmd->add_option("--target", align_args.target, "target NDJSON, one word per line")->required();
  align_cmd->add_option("--out", align_args.out, "phoneme units NDJSON")->required();
  align_cmd->add_option("--segments", align_args.segments, "restrict to the span of these VAD segments");
  align_cmd->add_option("--frame-dur", align_args.frame_dur, "seconds per emission frame");
  align_cmd->add_option("--blank", align_args.blank, "blank column index");
  align_cmd->add_option("--word-out", align_args.word_out, "also write word units here");

  SyllabifyArgs syl_args;
  auto *syl_cmd = app.add_subcommand("syllabify", "sonority-based syllables from aligned phonemes");
  syl_cmd->add_option("--phones", syl_args.phones, "phoneme units NDJSON")->required();
  syl_cmd->add_option("--words", syl_args.words, "target NDJSON with the word boundaries")->required();
  syl_cmd->add_option("--inventory", syl_args.inventory, "symbol<TAB>class table");
  syl_cmd->add_option("--out", syl_args.out, "syllable units NDJSON")->required();

  BuildArgs build_args;
  auto *build_cmd = app.add_subcommand("build", "filter, split and package a dataset");
  build_cmd->add_option("--units", build_args.units, "unit NDJSON files named <utterance>.*")->required();
  build_cmd->add_option("--features", build_args.features, "FMAT files named <utterance>.<granularity>.fmat")
      ->required();
  build_cmd->add_option("--meta", build_args.meta, "NDJSON of utterance_id, speaker_id, language, label, duration_s")
      ->required();
  build_cmd->add_option("--granularity", build_args.granularity, "phoneme, syllable, word or all")
      ->capture_default_str();
  build_cmd->add_option("--conf", build_args.conf, "minimum unit confidence")->capture_default_str();
  build_cmd->add_option("--split", build_args.split, "train,val,test ratios")->capture_default_str();
  build_cmd->add_option("--seed", build_args.seed, "split seed (default: GRANALIGN_SEED or 0)");
  build_cmd->add_option("--bins", build_args.bins, "speaker duration quantile bins")->capture_default_str();
  build_cmd->add_option("--out", build_args.out, "dataset directory")->required();

  TrainArgs train_args;
  auto *train_cmd = app.add_subcommand("train", "train one model per seed");
  train_cmd->add_option("--data", train_args.data, "dataset directory")->required();
  train_cmd->add_option("--granularity", train_args.granularity, "phoneme, syllable, word or all")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "seed, a..b range or comma list (default: GRANALIGN_SEED or 0..4)");
  train_cmd->add_option("--out", train_args.out, "runs directory")->required();
  train_args.flags.Register(train_cmd);

  EvalArgs eval_args;
  auto *eval_cmd = app.add_subcommand("eval", "subject-level metrics over trained runs");
  eval_cmd->add_option("--runs", eval_args.runs, "runs directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "report directory")->required();

  AttentionArgs att_args;
  auto *att_cmd = app.add_subcommand("attention", "rank units by accumulated attention");
  att_cmd->add_option("--runs", att_args.runs, "runs directory")->required();
  att_cmd->add_option("--top", att_args.top, "entries kept per granularity")->capture_default_str();
  att_cmd->add_option("--out", att_args.out, "report NDJSON; a CSV is written beside it")->required();

  PipelineArgs pipe_args;
  auto *pipe_cmd = app.add_subcommand("pipeline", "run every stage on a corpus directory");
  pipe_cmd->add_option("--in", pipe_args.in, "corpus directory with corpus.ndjson and symbols.txt")->required();
  pipe_cmd->add_option("--granularity", pipe_args.granularity, "phoneme, syllable, word or all")
      ->capture_default_str();
  pipe_cmd->add_option("--seed", pipe_args.seed, "base seed (default: GRANALIGN_SEED or 0)");
  pipe_cmd->add_option("--num-seeds", pipe_args.num_seeds, "consecutive seeds trained")->capture_default_str();
  pipe_cmd->add_option("--out", pipe_args.out, "output directory")->capture_default_str();
  pipe_cmd->add_option("--hop", pipe_args.hop, "VAD samples per frame")->capture_default_str();
  pipe_cmd->add_option("--rate", pipe_args.rate, "VAD sample rate")->capture_default_str();
  pipe_cmd->add_option("--threshold", pipe_args.vad.threshold, "speech probability threshold")
      ->capture_default_str();
  pipe_cmd->add_option("--max-seg", pipe_args.vad.max_segment_s, "maximum segment length in seconds")
      ->capture_default_str();
  pipe_cmd->add_option("--min-gap", pipe_args.vad.min_gap_s, "shorter pauses are fused, in seconds")
      ->capture_default_str();
  pipe_cmd->add_option("--conf", pipe_args.conf, "minimum unit confidence")->capture_default_str();
  pipe_cmd->add_option("--split", pipe_args.split, "train,val,test ratios")->capture_default_str();
  pipe_cmd->add_option("--bins", pipe_args.bins, "speaker duration quantile bins")->capture_default_str();
  pipe_cmd->add_option("--top", pipe_args.top, "attention entries kept")->capture_default_str();
  pipe_cmd->add_option("--jobs", pipe_args.jobs, "alignment threads (0 = all cores)")->capture_default_str();
  pipe_args.flags.Register(pipe_cmd);

  std::vector<std::string> storage{"granalign"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (vad_cmd->parsed()) return RunVad(*vad_cmd, vad_args, out);
    if (align_cmd->parsed()) return RunAlign(*align_cmd, align_args, out);
    if (syl_cmd->parsed()) return RunSyllabify(*syl_cmd, syl_args, out, err);
    if (build_cmd->parsed()) return RunBuild(*build_cmd, build_args, out, err);
    if (train_cmd->parsed()) return RunTrain(*train_cmd, train_args, out, err);
    if (eval_cmd->parsed()) return RunEval(*eval_cmd, eval_args, out, err);
    if (att_cmd->parsed()) return RunAttention(*att_cmd, att_args, out);
    if (pipe_cmd->parsed()) return RunPipeline(*pipe_cmd, pipe_args, out, err);
  } catch (const CLI::ParseError &e) {
    err << "granalign: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error &e) {
    err << "granalign: " << e.what() << "\n";
    return e.is_data_error() ? kExitData : kExitValidation;
  } catch (const fs::filesystem_error &e) {
    err << "granalign: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace granalign::cli
