// granalign/src/synthetic.cc

#include "granalign/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "granalign/error.h"
#include "granalign/syllabifier.h"
#include "granalign/units.h"

namespace granalign::synthetic {

namespace {

using Lexicon = std::vector<std::pair<std::string, std::vector<std::string>>>;

// A handful of words per language. /pataka/ is shared: the diadochokinetic
// task is language-independent.
const std::map<std::string, Lexicon> &Lexicons() {
  static const std::map<std::string, Lexicon> kLexicons = {
      {"it",
       {{"pataka", {"p", "a", "t", "a", "k", "a"}},
        {"casa", {"k", "a", "s", "a"}},
        {"pane", {"p", "a", "n", "e"}},
        {"luna", {"l", "u", "n", "a"}},
        {"strada", {"s", "t", "r", "a", "d", "a"}},
        {"fiore", {"f", "j", "o", "r", "e"}},
        {"bello", {"b", "e", "l", "l", "o"}}}},
      {"es",
       {{"pataka", {"p", "a", "t", "a", "k", "a"}},
        {"mesa", {"m", "e", "s", "a"}},
        {"tres", {"t", "r", "e", "s"}},
        {"perro", {"p", "e", "r", "o"}},
        {"estrella", {"e", "s", "t", "r", "e", "j", "a"}},
        {"niño", {"n", "i", "n", "o"}},
        {"luna", {"l", "u", "n", "a"}}}},
      {"en",
       {{"pataka", {"p", "a", "t", "a", "k", "a"}},
        {"stop", {"s", "t", "o", "p"}},
        {"blue", {"b", "l", "u"}},
        {"table", {"t", "e", "j", "b", "l"}},
        {"window", {"w", "i", "n", "d", "o"}},
        {"ship", {"ʃ", "i", "p"}},
        {"money", {"m", "a", "n", "i"}}}},
  };
  return kLexicons;
}

std::vector<std::string> CollectSymbols() {
  std::set<std::string> all;
  for (const auto &[lang, lex] : Lexicons())
    for (const auto &[word, phones] : lex) all.insert(phones.begin(), phones.end());
  std::vector<std::string> out{"<blank>"};
  out.insert(out.end(), all.begin(), all.end());
  return out;
}

void LogSoftmaxRow(double *row, std::size_t n) {
  const double mx = *std::max_element(row, row + n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(row[i] - mx);
  const double lse = mx + std::log(z);
  for (std::size_t i = 0; i < n; ++i) row[i] -= lse;
}

FloatMatrix ToFloat(const std::vector<std::vector<double>> &rows, int dim) {
  FloatMatrix m(rows.size(), static_cast<std::size_t>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int d = 0; d < dim; ++d) m(r, d) = static_cast<float>(rows[r][d]);
  return m;
}

}  // namespace

const std::filesystem::path &CorpusEntry::features(Granularity g) const {
  switch (g) {
    case Granularity::kPhoneme: return phoneme_features;
    case Granularity::kSyllable: return syllable_features;
    case Granularity::kWord: return word_features;
  }
  return phoneme_features;
}

Corpus GenerateCorpus(const CorpusOptions &opt) {
  if (opt.speakers_per_group < 1 || opt.utterances_per_speaker < 1 || opt.feature_dim < 1 ||
      opt.words_min < 1 || opt.words_max < opt.words_min || !(opt.frame_dur_s > 0.0))
    throw Error(ErrorKind::kPrecondition, "invalid synthetic corpus options");

  Corpus corpus;
  corpus.options = opt;
  corpus.symbols = CollectSymbols();
  const std::size_t V = corpus.symbols.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t v = 0; v < V; ++v) index[corpus.symbols[v]] = v;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  // Fixed per-label embeddings and a class direction shared by all units.
  const int D = opt.feature_dim;
  std::map<std::string, std::vector<double>> embedding;
  for (std::size_t v = 1; v < V; ++v) {
    auto &e = embedding[corpus.symbols[v]];
    for (int d = 0; d < D; ++d) e.push_back(gauss(rng));
  }
  std::vector<double> class_dir(D);
  double norm = 0.0;
  for (auto &x : class_dir) {
    x = gauss(rng);
    norm += x * x;
  }
  for (auto &x : class_dir) x /= std::sqrt(norm);

  const auto inventory = syllable::PhonemeInventory::Default();
  const double vad_hop_s = 512.0 / 16000.0;

  for (const std::string lang : {"it", "es", "en"}) {
    const auto &lex = Lexicons().at(lang);
    for (const auto label : {dataset::Label::kHC, dataset::Label::kPD}) {
      const double sign = label == dataset::Label::kPD ? 1.0 : -1.0;
      for (int s = 0; s < opt.speakers_per_group; ++s) {
        char spk[64];
        std::snprintf(spk, sizeof spk, "%s_%s_%02d", lang.c_str(),
                      label == dataset::Label::kPD ? "pd" : "hc", s);
        // Speakers differ in their own feature offset, so the classifier
        // cannot key on a single global template.
        std::vector<double> speaker_offset(D);
        for (auto &x : speaker_offset) x = 0.2 * gauss(rng);

        for (int u = 0; u < opt.utterances_per_speaker; ++u) {
          Utterance utt;
          utt.speaker_id = spk;
          utt.utterance_id = std::string(spk) + "_u" + std::to_string(u);
          utt.language = lang;
          utt.label = label;

          std::vector<std::pair<std::string, std::vector<std::string>>> words;
          const int n_words = uniform_int(opt.words_min, opt.words_max);
          for (int w = 0; w < n_words; ++w) words.push_back(lex[rng() % lex.size()]);
          utt.target = ctc::TargetSequence::FromWords(words);

          // Frame labelling: leading silence, phonemes with optional blank
          // separators (mandatory between repeats), trailing silence.
          std::vector<std::size_t> frames(uniform_int(8, 15), 0);
          for (std::size_t i = 0; i < utt.target.phonemes.size(); ++i) {
            const auto &p = utt.target.phonemes[i];
            const bool repeat = i > 0 && utt.target.phonemes[i - 1] == p;
            if (repeat || unit(rng) < 0.3) frames.push_back(0);
            PlantedPhoneme planted{p, frames.size(), 0};
            const int dur = uniform_int(2, 5);
            for (int k = 0; k < dur; ++k) frames.push_back(index.at(p));
            planted.last_frame = frames.size() - 1;
            utt.planted.push_back(planted);
          }
          frames.insert(frames.end(), uniform_int(8, 15), 0);
          utt.num_frames = frames.size();

          utt.emissions.resize(utt.num_frames * V);
          for (std::size_t t = 0; t < utt.num_frames; ++t) {
            double *row = &utt.emissions[t * V];
            for (std::size_t v = 0; v < V; ++v) row[v] = 0.7 * gauss(rng);
            row[frames[t]] += 3.5 + 3.0 * unit(rng);
            LogSoftmaxRow(row, V);
          }

          const double speech_start = utt.planted.front().first_frame * opt.frame_dur_s;
          const double speech_end = (utt.planted.back().last_frame + 1) * opt.frame_dur_s;
          const auto n_vad = static_cast<std::size_t>(
              std::ceil(utt.num_frames * opt.frame_dur_s / vad_hop_s));
          for (std::size_t i = 0; i < n_vad; ++i) {
            const double a = i * vad_hop_s, b = (i + 1) * vad_hop_s;
            const bool speech = b > speech_start && a < speech_end;
            const bool interior = a > speech_start + vad_hop_s && b < speech_end - vad_hop_s;
            double p = speech ? 0.7 + 0.28 * unit(rng) : 0.01 + 0.19 * unit(rng);
            // Isolated sub-threshold dips inside speech exercise gap fusion.
            if (interior && unit(rng) < 0.05) p = 0.2 + 0.2 * unit(rng);
            utt.vad_probs.push_back(p);
          }

          std::vector<std::vector<double>> ph_rows;
          for (const auto &p : utt.target.phonemes) {
            std::vector<double> row(D);
            for (int d = 0; d < D; ++d)
              row[d] = embedding.at(p)[d] + speaker_offset[d] + sign * opt.class_shift * class_dir[d] +
                       0.5 * gauss(rng);
            ph_rows.push_back(std::move(row));
          }
          const auto pool = [&](std::size_t b, std::size_t e) {
            std::vector<double> row(D, 0.0);
            for (std::size_t i = b; i < e; ++i)
              for (int d = 0; d < D; ++d) row[d] += ph_rows[i][d] / static_cast<double>(e - b);
            for (auto &x : row) x += 0.1 * gauss(rng);
            return row;
          };
          std::vector<std::vector<double>> syl_rows, word_rows;
          for (std::size_t w = 0; w < utt.target.word_spans.size(); ++w) {
            const auto [wb, we] = utt.target.word_spans[w];
            const std::vector<std::string> phones(utt.target.phonemes.begin() + wb,
                                                  utt.target.phonemes.begin() + we);
            for (const auto &syl : syllable::SspSyllabify(phones, inventory))
              syl_rows.push_back(pool(wb + syl.begin, wb + syl.end));
            word_rows.push_back(pool(wb, we));
          }
          utt.phoneme_features = ToFloat(ph_rows, D);
          utt.syllable_features = ToFloat(syl_rows, D);
          utt.word_features = ToFloat(word_rows, D);
          corpus.utterances.push_back(std::move(utt));
        }
      }
    }
  }
  return corpus;
}

void WriteCorpus(const Corpus &corpus, const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  for (const char *sub : {"emissions", "vad", "targets", "features"})
    fs::create_directories(dir / sub);

  {
    std::ofstream sym(dir / "symbols.txt");
    for (const auto &s : corpus.symbols) sym << s << "\n";
    if (!sym) throw Error(ErrorKind::kData, "cannot write " + (dir / "symbols.txt").string());
  }

  const double fd = corpus.options.frame_dur_s;
  std::vector<Json> index_rows, truth_rows;
  for (const auto &u : corpus.utterances) {
    const std::string id = u.utterance_id;
    FloatMatrix em(u.num_frames, corpus.symbols.size());
    for (std::size_t i = 0; i < u.emissions.size(); ++i) em.data[i] = static_cast<float>(u.emissions[i]);
    WriteFmat(dir / "emissions" / (id + ".fmat"), em);
    Json meta;
    meta["frame_dur_s"] = fd;
    meta["blank_index"] = 0;
    WriteNdjson(dir / "emissions" / (id + ".meta.ndjson"), {meta});

    FloatMatrix vad(1, u.vad_probs.size());
    for (std::size_t i = 0; i < u.vad_probs.size(); ++i) vad.data[i] = static_cast<float>(u.vad_probs[i]);
    WriteFmat(dir / "vad" / (id + ".fmat"), vad);

    ctc::WriteTarget(dir / "targets" / (id + ".ndjson"), u.target);
    WriteFmat(dir / "features" / (id + ".phoneme.fmat"), u.phoneme_features);
    WriteFmat(dir / "features" / (id + ".syllable.fmat"), u.syllable_features);
    WriteFmat(dir / "features" / (id + ".word.fmat"), u.word_features);

    Json row;
    row["utterance_id"] = id;
    row["speaker_id"] = u.speaker_id;
    row["language"] = u.language;
    row["label"] = dataset::LabelName(u.label);
    row["duration_s"] = u.duration_s(fd);
    row["emissions"] = "emissions/" + id + ".fmat";
    row["vad"] = "vad/" + id + ".fmat";
    row["target"] = "targets/" + id + ".ndjson";
    row["features"] = {{"phoneme", "features/" + id + ".phoneme.fmat"},
                       {"syllable", "features/" + id + ".syllable.fmat"},
                       {"word", "features/" + id + ".word.fmat"}};
    index_rows.push_back(std::move(row));

    Json truth;
    truth["utterance_id"] = id;
    Json spans = Json::array();
    for (const auto &p : u.planted)
      spans.push_back({{"label", p.label}, {"first_frame", p.first_frame}, {"last_frame", p.last_frame}});
    truth["phonemes"] = std::move(spans);
    truth_rows.push_back(std::move(truth));
  }
  WriteNdjson(dir / "corpus.ndjson", index_rows);
  WriteNdjson(dir / "truth.ndjson", truth_rows);
}

std::vector<CorpusEntry> ReadCorpusIndex(const std::filesystem::path &dir) {
  std::vector<CorpusEntry> out;
  for (const auto &j : ReadNdjson(dir / "corpus.ndjson")) {
    try {
      CorpusEntry e;
      e.utterance_id = j.at("utterance_id").get<std::string>();
      e.speaker_id = j.at("speaker_id").get<std::string>();
      e.language = j.at("language").get<std::string>();
      e.label = dataset::ParseLabel(j.at("label").get<std::string>());
      e.duration_s = j.at("duration_s").get<double>();
      e.emissions = dir / j.at("emissions").get<std::string>();
      e.vad = dir / j.at("vad").get<std::string>();
      e.target = dir / j.at("target").get<std::string>();
      const auto &f = j.at("features");
      e.phoneme_features = dir / f.at("phoneme").get<std::string>();
      e.syllable_features = dir / f.at("syllable").get<std::string>();
      e.word_features = dir / f.at("word").get<std::string>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception &ex) {
      throw Error(ErrorKind::kData, "malformed corpus.ndjson row: " + std::string(ex.what()));
    }
  }
  if (out.empty()) throw Error(ErrorKind::kData, "corpus index " + (dir / "corpus.ndjson").string() + " is empty");
  return out;
}

std::vector<std::pair<std::string, std::vector<PlantedPhoneme>>> ReadTruth(
    const std::filesystem::path &path) {
  std::vector<std::pair<std::string, std::vector<PlantedPhoneme>>> out;
  for (const auto &j : ReadNdjson(path)) {
    std::vector<PlantedPhoneme> spans;
    for (const auto &p : j.at("phonemes"))
      spans.push_back({p.at("label").get<std::string>(), p.at("first_frame").get<std::size_t>(),
                       p.at("last_frame").get<std::size_t>()});
    out.emplace_back(j.at("utterance_id").get<std::string>(), std::move(spans));
  }
  return out;
}

}  // namespace granalign::synthetic
