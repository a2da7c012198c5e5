// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpa/prototype.hpp"
#include "dpa/tensor.hpp"

namespace dpa {

/// Uniformly spaced reference frames: k_i = floor(i·(L−1)/(N−1)).
/// N == 1 selects frame 0. Throws ArgumentError unless 1 ≤ N ≤ L.
std::vector<std::size_t> sample_reference_indices(std::size_t video_len, std::size_t n_refs);

/// Key/value prototypes of N reference frames, concatenated along columns.
/// Immutable once built; safe to read from many query frames at once.
struct MemoryBank {
  Tensor keys;    // D × N·D'
  Tensor values;  // D × N·D'
  std::vector<std::size_t> frame_indices;

  std::size_t frames() const { return frame_indices.size(); }
  std::size_t columns() const { return keys.dim(1); }
};

struct IfaOptions {
  bool use_prototypes = true;
  RegionAxis region_axis = RegionAxis::Spatial;
};

/// Inter-frame attention: reads video-level context from a MemoryBank into a
/// D×H×W query map.
class IfaBlock {
 public:
  IfaBlock(std::string name, std::size_t channels, std::size_t height, std::size_t width, IfaOptions options,
           Rng& rng);

  /// D×D' prototypes of one frame, or the D×HW features themselves when
  /// prototypes are disabled.
  Tensor frame_prototypes(const Tensor& y) const;

  /// Reference indices default to 0..N−1. Frames must share one shape.
  MemoryBank build_memory(const std::vector<Tensor>& ref_features) const;
  MemoryBank build_memory(const std::vector<Tensor>& ref_features, std::vector<std::size_t> frame_indices) const;

  /// R = (Softmax(Qᵀ ⊗ K) ⊗ Vᵀ)ᵀ with Q = W_q ⊗ query_protos.
  Tensor temporal_read(const PrototypeSet& query_protos, const MemoryBank& bank) const;

  /// Ψ2 = N(R)ᵀ ⊗ N(Y) for the query map `y`.
  CorrelationMap read_correlation(const Tensor& y, const MemoryBank& bank) const;

  /// Y' = relu(Conv(Y ⊕ Ψ2)).
  Tensor forward(const Tensor& y, const MemoryBank& bank) const;

  ParameterList parameters() const;
  const IfaOptions& options() const { return options_; }

  Parameter q_embed, k_embed, v_embed;
  Parameter fuse_w, fuse_b;

 private:
  Tensor flat(const Tensor& y) const;

  std::string name_;
  std::size_t channels_, height_, width_;
  IfaOptions options_;
};

/// Cache file name for a bank: id, N and the checkpoint hash.
std::string bank_cache_name(const std::string& video_id, std::size_t n_refs, std::uint64_t checkpoint_hash);
void save_bank(const std::filesystem::path& path, const MemoryBank& bank);
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace dpa
