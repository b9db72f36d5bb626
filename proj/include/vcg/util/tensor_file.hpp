#pragma once

// Binary tensor container shared by model checkpoints and feature sidecars.
//
//   "VCGM" | version u32 | config length u32 | config JSON bytes
//   repeated until EOF:
//     name length u32 | name UTF-8 | rank u32 | dims u32 x rank | f32 x prod(dims)
//
// All integers and floats are little-endian; data is row-major.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vcg {

inline constexpr std::uint32_t kTensorFileVersion = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct TensorFile {
  std::string config_json;
  std::vector<TensorRecord> records;

  const TensorRecord* find(std::string_view name) const;
};

class TensorFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(std::string_view bytes);

}  // namespace vcg
