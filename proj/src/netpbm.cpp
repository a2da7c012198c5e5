// SPDX-License-Identifier: Apache-2.0
#include "dpa/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "dpa/checkpoint.hpp"

namespace dpa::netpbm {

namespace {

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void put_header(std::vector<std::uint8_t>& out, const char* magic, std::size_t w, std::size_t h) {
  const std::string hdr = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.insert(out.end(), hdr.begin(), hdr.end());
}

struct Header {
  std::size_t width = 0, height = 0;
  std::size_t data_offset = 0;
};

Header parse_header(const std::vector<std::uint8_t>& bytes, const char* magic, const std::string& origin) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1])
    throw IoError(origin + ": not a binary " + magic + " file");
  std::size_t pos = 2;
  auto read_number = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(origin + ": malformed NetPBM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw IoError(origin + ": NetPBM extent too large");
    }
    return v;
  };
  Header h;
  h.width = read_number();
  h.height = read_number();
  const auto maxval = read_number();
  if (h.width == 0 || h.height == 0) throw IoError(origin + ": zero image extent");
  if (maxval != 255) throw IoError(origin + ": maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(origin + ": malformed NetPBM header");
  h.data_offset = pos + 1;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw DimensionError("encode_ppm: expected 3×H×W, got " + shape_string(rgb.shape()));
  const auto h = rgb.dim(1), w = rgb.dim(2);
  std::vector<std::uint8_t> out;
  put_header(out, "P6", w, h);
  const auto d = rgb.data();
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < 3; ++c) out.push_back(quantize(d[c * h * w + p]));
  return out;
}

Tensor decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto hdr = parse_header(bytes, "P6", origin);
  const auto hw = hdr.width * hdr.height;
  if (bytes.size() != hdr.data_offset + 3 * hw) throw IoError(origin + ": PPM payload has wrong size");
  std::vector<double> v(3 * hw);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c) v[c * hw + p] = bytes[hdr.data_offset + 3 * p + c] / 255.0;
  return Tensor({3, hdr.height, hdr.width}, std::move(v));
}

std::vector<std::uint8_t> encode_pgm(const Mask& mask) {
  std::vector<std::uint8_t> out;
  put_header(out, "P5", mask.width, mask.height);
  for (auto p : mask.pixels) out.push_back(p ? 255 : 0);
  return out;
}

Mask decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto hdr = parse_header(bytes, "P5", origin);
  if (bytes.size() != hdr.data_offset + hdr.width * hdr.height) throw IoError(origin + ": PGM payload has wrong size");
  Mask m(hdr.height, hdr.width);
  for (std::size_t p = 0; p < m.pixels.size(); ++p) {
    const auto b = bytes[hdr.data_offset + p];
    if (b != 0 && b != 255) throw IoError(origin + ": mask values must be 0 or 255");
    m.pixels[p] = b ? 1 : 0;
  }
  return m;
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) { write_file_bytes(path, encode_ppm(rgb)); }
Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path), path.string()); }
void write_pgm(const std::filesystem::path& path, const Mask& mask) { write_file_bytes(path, encode_pgm(mask)); }
Mask read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path), path.string()); }

}  // namespace dpa::netpbm
