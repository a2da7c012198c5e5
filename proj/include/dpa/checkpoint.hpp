// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpa/tensor.hpp"

namespace dpa {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Tensor record file:
///   "DPAT" | u32 version | u32 record count |
///   per record: u32 name length | UTF-8 name | u32 rank | u32 extents... | f64 payload
/// All integers and floats little-endian.
inline constexpr std::uint32_t kRecordVersion = 1;

std::vector<std::uint8_t> encode_records(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_records(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_records(const std::filesystem::path& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> load_records(const std::filesystem::path& path);

/// Copies stored values into `params` by name; every parameter must be present
/// with an identical shape.
void assign_parameters(const ParameterList& params, const std::vector<NamedTensor>& records);

/// FNV-1a over a byte buffer; used to key cached banks to a checkpoint.
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dpa
