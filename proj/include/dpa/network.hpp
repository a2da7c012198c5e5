// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpa/ifa.hpp"
#include "dpa/ima.hpp"
#include "dpa/tensor.hpp"

namespace dpa {

struct ModelConfig {
  std::size_t height = 64, width = 64;
  bool ima = true;
  bool ifa = true;
  bool ima_prototypes = true;
  bool ifa_prototypes = true;
  /// Only the appearance stream reads the memory bank.
  bool ifa_appearance_only = false;
  EmbedMode ima_embed = EmbedMode::HwFc;
  RegionAxis region_axis = RegionAxis::Spatial;
  std::array<std::size_t, 5> encoder_widths{16, 32, 64, 96, 128};
  std::size_t aspp_branch = 32, aspp_out = 64;
  std::array<std::size_t, 4> decoder_widths{64, 48, 32, 16};
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

/// Encoder outputs of one frame, before the block-5 attention.
struct FrameFeatures {
  std::array<Tensor, 4> skips;  // appearance blocks 1-4 (block 4 after IMA)
  Tensor appearance5, motion5;
};

/// Per-stream banks; undefined keys when the stream has no IFA.
struct VideoBanks {
  MemoryBank appearance, motion;
};

struct ConvLayer {
  Parameter weight, bias;
  std::size_t dilation = 1;
  Tensor operator()(const Tensor& x) const;
};

/// Two-stream encoder-decoder with inter-modality attention at blocks 4 and 5,
/// inter-frame attention at block 5, ASPP and a skip-connected decoder.
class DpaModel {
 public:
  explicit DpaModel(ModelConfig config);

  FrameFeatures encode(const Tensor& rgb, const Tensor& flow) const;
  /// Banks over the block-5 features of the reference frames.
  VideoBanks build_banks(const std::vector<FrameFeatures>& refs, std::vector<std::size_t> frame_indices) const;
  /// 2×H×W logits.
  Tensor decode(const FrameFeatures& features, const VideoBanks& banks) const;
  Tensor forward_frame(const Tensor& rgb, const Tensor& flow, const VideoBanks& banks) const;

  Tensor aspp(const Tensor& x) const;

  ParameterList parameters() const;
  std::size_t parameter_count() const;
  const ModelConfig& config() const { return config_; }
  bool uses_banks() const { return config_.ifa; }

  void save(const std::filesystem::path& path) const;
  std::vector<std::uint8_t> serialize() const;
  static DpaModel load(const std::filesystem::path& path);
  static DpaModel deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin);

 private:
  struct Stream {
    std::array<std::array<ConvLayer, 2>, 5> blocks;
  };
  Tensor run_block(const Stream& s, std::size_t b, const Tensor& x) const;

  ModelConfig config_;
  Stream enc_a_, enc_m_;
  std::optional<ImaBlock> ima4_, ima5_;
  std::optional<IfaBlock> ifa_a_, ifa_m_;
  std::optional<ConvLayer> fuse_a_, fuse_m_;
  std::array<ConvLayer, 4> aspp_branches_;
  ConvLayer aspp_project_;
  std::array<ConvLayer, 4> decoder_;
  ConvLayer head_;
};

}  // namespace dpa
