// granalign/checkpoint.h
//
// Checkpoint directory layout:
//   model_config.json   classifier config
//   checkpoint.ndjson   {"name","file","shape":[rows,cols],"step"} per tensor
//   <name>.fmat         one FMAT per parameter tensor (row-major)

#ifndef GRANALIGN_CHECKPOINT_H_
#define GRANALIGN_CHECKPOINT_H_

#include <filesystem>
#include <vector>

#include "granalign/classifier.h"
#include "granalign/trainer.h"

namespace granalign::checkpoint {

Json ConfigToJson(const model::ClassifierConfig &c);
model::ClassifierConfig ConfigFromJson(const nlohmann::json &j);

Json TrainConfigToJson(const train::TrainConfig &c);

// Returns the files written, relative to `dir`.
std::vector<std::filesystem::path> Save(const std::filesystem::path &dir,
                                        const model::ModelParams &params,
                                        const model::ClassifierConfig &config, long step);

struct Loaded {
  model::ClassifierConfig config;
  model::ModelParams params;
  long step = 0;
};

Loaded Load(const std::filesystem::path &dir);

Json EpochToJson(const train::EpochRecord &r);

}  // namespace granalign::checkpoint

#endif  // GRANALIGN_CHECKPOINT_H_
