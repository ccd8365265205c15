// granalign/run_manifest.h
//
// Provenance record written once per command invocation. Everything except
// the two timestamps is a function of the inputs and flags, so reruns can be
// compared by diffing manifests with those fields removed.

#ifndef GRANALIGN_RUN_MANIFEST_H_
#define GRANALIGN_RUN_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "granalign/units.h"

namespace granalign {

inline constexpr const char *kToolkitVersion = "0.1.0";

// Lower-case hex SHA-256 of the file contents. Throws kData if unreadable.
std::string Sha256File(const std::filesystem::path &path);

// UTC, second resolution: "2026-10-17T08:30:00Z".
std::string UtcTimestamp();

class RunManifest {
 public:
  explicit RunManifest(std::string subcommand);

  void SetFlag(const std::string &name, Json value) { flags_[name] = std::move(value); }
  void AddSeed(std::uint64_t seed) { seeds_.push_back(seed); }
  // Digests the file now; directories are expanded to their regular files.
  void AddInput(const std::filesystem::path &path);
  void AddOutput(const std::filesystem::path &path) { outputs_.push_back(path); }
  void AddOutputs(const std::vector<std::filesystem::path> &paths);

  // Digests the outputs, stamps the finish time and writes the manifest.
  // Paths are stored relative to the manifest's directory when they live
  // below it.
  void Write(const std::filesystem::path &path);

  const std::vector<std::filesystem::path> &outputs() const { return outputs_; }

 private:
  std::string subcommand_;
  Json flags_ = Json::object();
  std::vector<std::uint64_t> seeds_;
  std::vector<std::pair<std::filesystem::path, std::string>> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::string started_at_;
};

}  // namespace granalign

#endif  // GRANALIGN_RUN_MANIFEST_H_
