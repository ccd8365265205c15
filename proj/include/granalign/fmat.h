// granalign/fmat.h
//
// FMAT matrix container shared by every stage:
//
//   "FMAT" | u32 version = 1 | u32 header length | UTF-8 JSON header | payload
//
// The header is {"dtype":"f32","shape":[rows,cols],"order":"row-major",
// "endian":"little"} and the payload holds rows*cols little-endian float32.

#ifndef GRANALIGN_FMAT_H_
#define GRANALIGN_FMAT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace granalign {

struct FloatMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // row-major

  FloatMatrix() = default;
  FloatMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  float &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const FloatMatrix &) const = default;
};

inline constexpr std::uint32_t kFmatVersion = 1;

std::vector<std::uint8_t> EncodeFmat(const FloatMatrix &m);
FloatMatrix DecodeFmat(std::span<const std::uint8_t> bytes);

void WriteFmat(const std::filesystem::path &path, const FloatMatrix &m);
FloatMatrix ReadFmat(const std::filesystem::path &path);

}  // namespace granalign

#endif  // GRANALIGN_FMAT_H_
