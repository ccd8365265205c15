// granalign/src/fmat.cc

#include "granalign/fmat.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "granalign/error.h"
#include "json.hpp"

namespace granalign {
namespace {

static_assert(sizeof(float) == 4);

void PutU32(std::vector<std::uint8_t> *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> EncodeFmat(const FloatMatrix &m) {
  if (m.data.size() != m.rows * m.cols)
    throw Error(ErrorKind::kConsistency, "FMAT payload size does not match shape");
  nlohmann::ordered_json header;
  header["dtype"] = "f32";
  header["shape"] = {m.rows, m.cols};
  header["order"] = "row-major";
  header["endian"] = "little";
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(12 + text.size() + 4 * m.data.size());
  for (char c : {'F', 'M', 'A', 'T'}) out.push_back(static_cast<std::uint8_t>(c));
  PutU32(&out, kFmatVersion);
  PutU32(&out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (float f : m.data) PutU32(&out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FloatMatrix DecodeFmat(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FMAT", 4) != 0)
    throw Error(ErrorKind::kData, "not an FMAT container (bad magic)");
  const std::uint32_t version = GetU32(bytes, 4);
  if (version != kFmatVersion)
    throw Error(ErrorKind::kData, "unsupported FMAT version " + std::to_string(version));
  const std::size_t header_len = GetU32(bytes, 8);
  if (bytes.size() < 12 + header_len)
    throw Error(ErrorKind::kData, "truncated FMAT header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::kData, std::string("malformed FMAT header: ") + e.what());
  }
  if (header.value("dtype", "") != "f32" || header.value("order", "") != "row-major" ||
      header.value("endian", "") != "little")
    throw Error(ErrorKind::kData, "unsupported FMAT header " + header.dump());
  const auto &shape = header.at("shape");
  if (!shape.is_array() || shape.size() != 2)
    throw Error(ErrorKind::kData, "FMAT shape must be [rows, cols]");

  FloatMatrix m(shape[0].get<std::size_t>(), shape[1].get<std::size_t>());
  const std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != 4 * m.rows * m.cols)
    throw Error(ErrorKind::kData, "FMAT payload length " + std::to_string(payload) +
                                      " does not match shape " + shape.dump());
  const std::size_t base = 12 + header_len;
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::bit_cast<float>(GetU32(bytes, base + 4 * i));
  return m;
}

void WriteFmat(const std::filesystem::path &path, const FloatMatrix &m) {
  const auto bytes = EncodeFmat(m);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kData, "cannot write " + path.string());
  os.write(reinterpret_cast<const char *>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

FloatMatrix ReadFmat(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kData, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeFmat(bytes);
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace granalign
