// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>

#include "dpa/prototype.hpp"
#include "dpa/tensor.hpp"

namespace dpa {

/// How σ_K / σ_V act on a C'×HW correlation map.
enum class EmbedMode {
  /// Learned HW×HW map along the pixel axis (ties the block to one resolution).
  HwFc,
  /// Learned C'×C' map along the prototype axis, resolution independent.
  ChannelFc,
};

struct ImaOptions {
  bool use_prototypes = true;
  EmbedMode embed = EmbedMode::HwFc;
  RegionAxis region_axis = RegionAxis::Spatial;
};

/// K or V embedding of a C'×HW map. HwFc computes psi ⊗ W with W of HW×HW;
/// ChannelFc computes W ⊗ psi with W of C'×C'.
Tensor embed_kv(const Tensor& psi, const Tensor& weight, EmbedMode mode);

/// Φ1 = K_A ⊗ K_Mᵀ.
Tensor correspondence(const Tensor& k_a, const Tensor& k_m);

struct Transferred {
  Tensor to_appearance;  // T_A = Softmax(Φ1) ⊗ V_M
  Tensor to_motion;      // T_M = Softmax(Φ1ᵀ) ⊗ V_A
};

/// Row-softmax attention in both directions over one shared Φ1.
Transferred transfer(const Tensor& phi, const Tensor& v_a, const Tensor& v_m);

struct ImaOutput {
  Tensor appearance;
  Tensor motion;
};

/// Inter-modality attention over a pair of C×H×W maps at a fixed resolution.
class ImaBlock {
 public:
  ImaBlock(std::string name, std::size_t channels, std::size_t height, std::size_t width, ImaOptions options,
           Rng& rng);

  ImaOutput forward(const Tensor& x_a, const Tensor& x_m) const;

  /// Copy whose appearance and motion weights are exchanged (fresh storage).
  ImaBlock mirrored() const;

  ParameterList parameters() const;
  const ImaOptions& options() const { return options_; }
  std::size_t channels() const { return channels_; }

  // Per-branch weights, exposed for tests and weight surgery.
  Parameter sigma_k_a, sigma_v_a, sigma_k_m, sigma_v_m;
  Parameter fuse_a_w, fuse_a_b, fuse_m_w, fuse_m_b;

 private:
  ImaBlock() = default;
  Tensor embed_source(const Tensor& x) const;

  std::string name_;
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  ImaOptions options_;
};

}  // namespace dpa
