#include "vcg/util/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <unordered_set>

namespace vcg {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw TensorFileError("truncated tensor file at byte " + std::to_string(pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const TensorRecord* TensorFile::find(std::string_view name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

std::string encode_tensor_file(const TensorFile& file) {
  std::string out = "VCGM";
  put_u32(out, kTensorFileVersion);
  put_u32(out, static_cast<std::uint32_t>(file.config_json.size()));
  out += file.config_json;
  std::unordered_set<std::string_view> seen;
  for (const auto& rec : file.records) {
    if (!seen.insert(rec.name).second) throw TensorFileError("duplicate tensor name: " + rec.name);
    std::size_t n = 1;
    for (auto d : rec.dims) n *= d;
    if (n != rec.data.size())
      throw TensorFileError("tensor " + rec.name + " has " + std::to_string(rec.data.size()) +
                            " values, dims imply " + std::to_string(n));
    put_u32(out, static_cast<std::uint32_t>(rec.name.size()));
    out += rec.name;
    put_u32(out, static_cast<std::uint32_t>(rec.dims.size()));
    for (auto d : rec.dims) put_u32(out, d);
    for (float f : rec.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

TensorFile decode_tensor_file(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != "VCGM") throw TensorFileError("bad magic: not a VCGM tensor file");
  const auto version = in.u32();
  if (version != kTensorFileVersion)
    throw TensorFileError("unsupported tensor file version " + std::to_string(version));
  TensorFile file;
  file.config_json = std::string(in.take(in.u32()));
  std::unordered_set<std::string> seen;
  while (!in.done()) {
    TensorRecord rec;
    rec.name = std::string(in.take(in.u32()));
    if (!seen.insert(rec.name).second) throw TensorFileError("duplicate tensor name: " + rec.name);
    const auto rank = in.u32();
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      rec.dims.push_back(in.u32());
      n *= rec.dims.back();
    }
    rec.data.resize(n);
    for (auto& f : rec.data) f = std::bit_cast<float>(in.u32());
    file.records.push_back(std::move(rec));
  }
  return file;
}

}  // namespace vcg
