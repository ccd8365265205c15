// granalign/src/checkpoint.cc

#include "granalign/checkpoint.h"

#include <fstream>
#include <map>

#include "granalign/error.h"
#include "granalign/fmat.h"

namespace granalign::checkpoint {

Json ConfigToJson(const model::ClassifierConfig &c) {
  Json j;
  j["input_dim"] = c.input_dim;
  j["num_layers"] = c.num_layers;
  j["hidden"] = c.hidden;
  j["dropout"] = c.dropout;
  j["heads"] = c.heads;
  j["classes"] = c.classes;
  return j;
}

model::ClassifierConfig ConfigFromJson(const nlohmann::json &j) {
  model::ClassifierConfig c;
  try {
    c.input_dim = j.at("input_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.heads = j.at("heads").get<int>();
    c.classes = j.at("classes").get<int>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, std::string("malformed model config: ") + e.what());
  }
  c.Validate();
  return c;
}

Json TrainConfigToJson(const train::TrainConfig &c) {
  Json j;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["plateau_factor"] = c.plateau_factor;
  j["plateau_patience"] = c.plateau_patience;
  j["early_stop_patience"] = c.early_stop_patience;
  j["early_stop_metric"] = "val_f1";
  j["betas"] = {c.beta1, c.beta2};
  j["eps"] = c.eps;
  return j;
}

std::vector<std::filesystem::path> Save(const std::filesystem::path &dir,
                                        const model::ModelParams &params,
                                        const model::ClassifierConfig &config, long step) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  {
    std::ofstream os(dir / "model_config.json");
    if (!os) throw Error(ErrorKind::kData, "cannot write " + (dir / "model_config.json").string());
    os << ConfigToJson(config).dump(2) << '\n';
    written.emplace_back("model_config.json");
  }
  std::vector<Json> manifest;
  for (const auto &t : params.Tensors()) {
    FloatMatrix m(static_cast<std::size_t>(t.rows), static_cast<std::size_t>(t.cols));
    // Eigen storage is column-major; FMAT payloads are row-major.
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c)
        m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
            static_cast<float>(t.data[c * t.rows + r]);
    const std::string file = t.name + ".fmat";
    WriteFmat(dir / file, m);
    written.emplace_back(file);
    Json row;
    row["name"] = t.name;
    row["file"] = file;
    row["shape"] = {t.rows, t.cols};
    row["step"] = step;
    manifest.push_back(std::move(row));
  }
  WriteNdjson(dir / "checkpoint.ndjson", manifest);
  written.emplace_back("checkpoint.ndjson");
  return written;
}

Loaded Load(const std::filesystem::path &dir) {
  Loaded out;
  {
    std::ifstream is(dir / "model_config.json");
    if (!is) throw Error(ErrorKind::kData, "cannot read " + (dir / "model_config.json").string());
    try {
      out.config = ConfigFromJson(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorKind::kData, std::string("malformed model_config.json: ") + e.what());
    }
  }
  std::map<std::string, nlohmann::json> entries;
  for (const auto &row : ReadNdjson(dir / "checkpoint.ndjson"))
    entries[row.at("name").get<std::string>()] = row;

  out.params = model::ModelParams::Zeros(out.config);
  for (auto &t : out.params.Tensors()) {
    const auto it = entries.find(t.name);
    if (it == entries.end()) throw Error(ErrorKind::kData, "checkpoint lacks tensor " + t.name);
    const FloatMatrix m = ReadFmat(dir / it->second.at("file").get<std::string>());
    if (static_cast<Eigen::Index>(m.rows) != t.rows || static_cast<Eigen::Index>(m.cols) != t.cols)
      throw Error(ErrorKind::kData, "tensor " + t.name + " has the wrong shape");
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c)
        t.data[c * t.rows + r] = m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    out.step = it->second.value("step", 0L);
  }
  return out;
}

Json EpochToJson(const train::EpochRecord &r) {
  Json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["mean_batch_loss"] = r.mean_batch_loss;
  j["train_loss"] = r.train_loss;
  j["train_accuracy"] = r.train_accuracy;
  j["val_loss"] = r.val_loss;
  j["val_f1"] = r.val_f1;
  j["val_accuracy"] = r.val_accuracy;
  j["best"] = r.best;
  return j;
}

}  // namespace granalign::checkpoint
