// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpa/tensor.hpp"

namespace dpa {

/// Binary H×W segmentation, row-major, values 0 or 1.
struct Mask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;

  Mask() = default;
  Mask(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0) {}

  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::size_t area() const;
  bool operator==(const Mask&) const = default;
};

/// One video: RGB frames and 3-channel flow maps (3×H×W, values in [0,1])
/// with their ground-truth masks, all of length L.
struct VideoSample {
  std::string id;
  std::vector<Tensor> frames;
  std::vector<Tensor> flows;
  std::vector<Mask> masks;

  std::size_t length() const { return frames.size(); }
  std::size_t height() const { return frames.front().dim(1); }
  std::size_t width() const { return frames.front().dim(2); }
};

using Dataset = std::vector<VideoSample>;

// ---------------------------------------------------------------------------
// Synthetic scenes. Every layer translates rigidly, so the displacement
// between consecutive frames is known exactly at every pixel.

enum class ShapeKind { Ellipse, Rectangle, Polygon };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Ellipse;
  std::array<double, 2> center{};    // x, y at frame 0 (pixel units)
  std::array<double, 2> velocity{};  // px / frame
  std::array<double, 2> radius{};    // semi-axes (ellipse/rectangle)
  double angle = 0.0;                // rotation, radians
  std::vector<std::array<double, 2>> vertices;  // polygon, relative to center
  std::array<double, 3> color{};
  double stripe_freq = 0.0, stripe_amp = 0.0;  // texture in object coordinates

  bool contains(double x, double y, std::size_t t) const;
  double area() const;
};

struct BackgroundSpec {
  std::array<double, 2> velocity{};
  std::array<double, 3> base{};
  // Sum of plane waves per channel: amplitude, x/y frequency, phase.
  struct Wave {
    std::array<double, 3> amp;
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
};

struct OccluderSpec {
  ShapeSpec shape;  // moves with the background
  std::size_t first_frame = 0, frame_count = 0;
  bool visible(std::size_t t) const { return t >= first_frame && t < first_frame + frame_count; }
};

struct VideoSpec {
  std::size_t length = 0, height = 0, width = 0;
  BackgroundSpec background;
  ShapeSpec salient;
  std::vector<ShapeSpec> distractors;  // animated with the background velocity
  std::optional<OccluderSpec> occluder;
};

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_videos = 10;
  std::size_t length = 16;
  std::size_t height = 64, width = 64;
  /// 0 disables occluders; 1 lets an occluder cover the object for up to
  /// 25% of the frames.
  double difficulty = 0.5;
  std::string id_prefix = "vid";
  unsigned jobs = 1;
};

VideoSpec random_video_spec(const SyntheticOptions& options, std::size_t index);
VideoSample render_video(const VideoSpec& spec, const std::string& id);
/// Exact 2×H×W forward displacement (dx, dy) from frame t to t+1.
Tensor displacement_field(const VideoSpec& spec, std::size_t t);
Dataset gen_synthetic(const SyntheticOptions& options);

/// Middlebury color-wheel rendering of a 2×H×W displacement to 3×H×W in [0,1].
inline constexpr double kFlowMaxMagnitude = 4.0;
Tensor flow_to_color(const Tensor& displacement);

// ---------------------------------------------------------------------------
// On-disk layout:
//   root/manifest.txt            "id L H W" per line
//   root/<id>/frame_%04d.ppm     binary P6
//   root/<id>/flow_%04d.ppm      binary P6
//   root/<id>/mask_%04d.pgm      binary P5, 0 or 255

void save_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

/// Only masks (for predictions): root/manifest.txt plus root/<id>/mask_%04d.pgm.
struct MaskSequence {
  std::string id;
  std::vector<Mask> masks;
};
void save_mask_sequences(const std::vector<MaskSequence>& sequences, const std::filesystem::path& root);
std::vector<MaskSequence> load_mask_sequences(const std::filesystem::path& root);

struct Snippet {
  std::size_t video = 0;
  std::size_t start = 0;
  std::vector<Tensor> frames, flows;
  std::vector<Mask> masks;
};

/// Uniform video, then uniform start in [0, L − len].
Snippet sample_snippet(const Dataset& dataset, Rng& rng, std::size_t len = 4);

/// SplitMix64 finalizer; derives independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dpa
