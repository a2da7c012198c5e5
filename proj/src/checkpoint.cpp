// SPDX-License-Identifier: Apache-2.0
#include "dpa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace dpa {

namespace {

static_assert(std::endian::native == std::endian::little, "record format assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<long>(pos_), bytes_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError(origin_ + ": truncated tensor record file");
  }
  const std::vector<std::uint8_t>& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_records(const std::vector<NamedTensor>& records) {
  std::vector<std::uint8_t> out{'D', 'P', 'A', 'T'};
  put_u32(out, kRecordVersion);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u32(out, static_cast<std::uint32_t>(r.tensor.rank()));
    for (auto e : r.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : r.tensor.data()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_records(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader in(bytes, origin);
  if (in.str(4) != "DPAT") throw IoError(origin + ": bad magic, not a tensor record file");
  const auto version = in.u32();
  if (version != kRecordVersion) throw IoError(origin + ": unsupported record version " + std::to_string(version));
  const auto count = in.u32();
  std::vector<NamedTensor> records;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor r;
    r.name = in.str(in.u32());
    const auto rank = in.u32();
    if (rank == 0 || rank > 8) throw IoError(origin + ": record '" + r.name + "' has invalid rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(in.u32());
      if (shape.back() == 0) throw IoError(origin + ": record '" + r.name + "' has a zero extent");
    }
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = in.f64();
    r.tensor = Tensor(std::move(shape), std::move(data));
    records.push_back(std::move(r));
  }
  if (!in.done()) throw IoError(origin + ": trailing bytes after last record");
  return records;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string() + ": cannot open for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path.string() + ": write failed");
}

void save_records(const std::filesystem::path& path, const std::vector<NamedTensor>& records) {
  write_file_bytes(path, encode_records(records));
}

std::vector<NamedTensor> load_records(const std::filesystem::path& path) {
  return decode_records(read_file_bytes(path), path.string());
}

void assign_parameters(const ParameterList& params, const std::vector<NamedTensor>& records) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& r : records) by_name[r.name] = &r.tensor;
  for (auto p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ValidationError("checkpoint is missing parameter '" + p.name + "'");
    if (it->second->shape() != p.tensor.shape())
      throw ValidationError("checkpoint parameter '" + p.name + "' has shape " + shape_string(it->second->shape()) +
                            ", model expects " + shape_string(p.tensor.shape()));
    auto dst = p.tensor.mutable_data();
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dpa
