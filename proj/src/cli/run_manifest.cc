// src/cli/run_manifest.cc

#include "granalign/run_manifest.h"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include "granalign/error.h"

namespace granalign {

namespace fs = std::filesystem;

std::string Sha256File(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::kData, "SHA-256 unavailable");
  std::array<char, 1 << 16> buf;
  while (is) {
    is.read(buf.data(), buf.size());
    if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string subcommand)
    : subcommand_(std::move(subcommand)), started_at_(UtcTimestamp()) {}

void RunManifest::AddInput(const fs::path &path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto &e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto &f : files) inputs_.emplace_back(f, Sha256File(f));
    return;
  }
  inputs_.emplace_back(path, Sha256File(path));
}

void RunManifest::AddOutputs(const std::vector<fs::path> &paths) {
  outputs_.insert(outputs_.end(), paths.begin(), paths.end());
}

namespace {

std::string Display(const fs::path &p, const fs::path &base) {
  const fs::path abs = fs::weakly_canonical(fs::absolute(p));
  const fs::path rel = abs.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

}  // namespace

void RunManifest::Write(const fs::path &path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path base = fs::weakly_canonical(fs::absolute(path).parent_path());

  Json j;
  j["toolkit"] = "granalign";
  j["version"] = kToolkitVersion;
  j["subcommand"] = subcommand_;
  j["flags"] = flags_;
  j["seeds"] = seeds_;
  Json inputs = Json::array();
  for (const auto &[p, digest] : inputs_)
    inputs.push_back({{"path", Display(p, base)}, {"sha256", digest}});
  j["inputs"] = std::move(inputs);
  Json outputs = Json::array();
  for (const auto &p : outputs_)
    outputs.push_back({{"path", Display(p, base)}, {"sha256", Sha256File(p)}});
  j["outputs"] = std::move(outputs);
  j["timestamps"] = {{"started_at", started_at_}, {"finished_at", UtcTimestamp()}};

  std::ofstream os(path);
  os << j.dump(2) << "\n";
  if (!os) throw Error(ErrorKind::kData, "cannot write " + path.string());
}

}  // namespace granalign
