// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dpa/data.hpp"
#include "dpa/tensor.hpp"

// Binary NetPBM (P6 colour, P5 grey, maxval 255).
namespace dpa::netpbm {

std::vector<std::uint8_t> encode_ppm(const Tensor& rgb);
Tensor decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> encode_pgm(const Mask& mask);
Mask decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin);

void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
Tensor read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace dpa::netpbm
