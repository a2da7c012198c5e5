// SPDX-License-Identifier: Apache-2.0
#include "dpa/ifa.hpp"

#include <cstdio>

#include "dpa/checkpoint.hpp"
#include "dpa/ops.hpp"

namespace dpa {

std::vector<std::size_t> sample_reference_indices(std::size_t video_len, std::size_t n_refs) {
  if (video_len < 1 || n_refs < 1 || n_refs > video_len)
    throw ArgumentError("sample_reference_indices: need 1 <= N <= L, got N=" + std::to_string(n_refs) +
                        " L=" + std::to_string(video_len));
  if (n_refs == 1) return {0};
  std::vector<std::size_t> idx(n_refs);
  for (std::size_t i = 0; i < n_refs; ++i) idx[i] = i * (video_len - 1) / (n_refs - 1);
  return idx;
}

IfaBlock::IfaBlock(std::string name, std::size_t channels, std::size_t height, std::size_t width,
                   IfaOptions options, Rng& rng)
    : name_(std::move(name)), channels_(channels), height_(height), width_(width), options_(options) {
  q_embed = make_weight(name_ + ".q_embed", {channels, channels}, channels, rng);
  k_embed = make_weight(name_ + ".k_embed", {channels, channels}, channels, rng);
  v_embed = make_weight(name_ + ".v_embed", {channels, channels}, channels, rng);
  // Ψ2 has one row per prototype, or one per pixel when prototypes are bypassed.
  const std::size_t corr_rows = options_.use_prototypes ? channels : height * width;
  const std::size_t cin = channels + corr_rows;
  fuse_w = make_fusion_weight(name_ + ".fuse.weight", channels, channels, cin - channels, 3, 1.0, rng);
  fuse_b = make_bias(name_ + ".fuse.bias", channels);
}

Tensor IfaBlock::flat(const Tensor& y) const {
  const Shape expected{channels_, height_, width_};
  if (y.shape() != expected)
    throw DimensionError("ifa: block " + name_ + " expects " + shape_string(expected) + ", got " +
                         shape_string(y.shape()));
  return reshape(y, {channels_, height_ * width_});
}

Tensor IfaBlock::frame_prototypes(const Tensor& y) const {
  const auto f = flat(y);
  if (!options_.use_prototypes) return f;
  return make_prototypes(f, options_.region_axis).protos;
}

MemoryBank IfaBlock::build_memory(const std::vector<Tensor>& ref_features) const {
  std::vector<std::size_t> idx(ref_features.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return build_memory(ref_features, std::move(idx));
}

MemoryBank IfaBlock::build_memory(const std::vector<Tensor>& ref_features,
                                  std::vector<std::size_t> frame_indices) const {
  if (ref_features.empty()) throw ContractError("build_memory: no reference frames");
  if (frame_indices.size() != ref_features.size())
    throw ArgumentError("build_memory: " + std::to_string(frame_indices.size()) + " indices for " +
                        std::to_string(ref_features.size()) + " frames");
  for (std::size_t i = 1; i < frame_indices.size(); ++i)
    if (frame_indices[i] <= frame_indices[i - 1]) throw ArgumentError("build_memory: frame indices must increase");
  std::vector<Tensor> keys, values;
  for (const auto& f : ref_features) {
    if (f.shape() != ref_features.front().shape())
      throw DimensionError("build_memory: reference frames differ in shape, " +
                           shape_string(ref_features.front().shape()) + " vs " + shape_string(f.shape()));
    const auto p = frame_prototypes(f);
    keys.push_back(matmul(k_embed.tensor, p));
    values.push_back(matmul(v_embed.tensor, p));
  }
  return {concat(keys, 1), concat(values, 1), std::move(frame_indices)};
}

Tensor IfaBlock::temporal_read(const PrototypeSet& query_protos, const MemoryBank& bank) const {
  if (!bank.keys.defined() || bank.frames() == 0) throw ContractError("temporal_read: empty memory bank");
  if (query_protos.protos.dim(0) != bank.keys.dim(0))
    throw DimensionError("temporal_read: query prototypes " + shape_string(query_protos.protos.shape()) +
                         " vs bank keys " + shape_string(bank.keys.shape()));
  const auto q = matmul(q_embed.tensor, query_protos.protos);
  const auto phi = matmul(transpose(q), bank.keys);
  return transpose(matmul(softmax(phi, 1), transpose(bank.values)));
}

CorrelationMap IfaBlock::read_correlation(const Tensor& y, const MemoryBank& bank) const {
  const auto r = temporal_read({frame_prototypes(y)}, bank);
  return self_correlate({r}, flat(y));
}

Tensor IfaBlock::forward(const Tensor& y, const MemoryBank& bank) const {
  const auto psi = read_correlation(y, bank).corr;
  const auto psi_map = reshape(psi, {psi.dim(0), height_, width_});
  return relu(conv2d(concat(y, psi_map, 0), fuse_w.tensor, fuse_b.tensor));
}

ParameterList IfaBlock::parameters() const { return {q_embed, k_embed, v_embed, fuse_w, fuse_b}; }

std::string bank_cache_name(const std::string& video_id, std::size_t n_refs, std::uint64_t checkpoint_hash) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(checkpoint_hash));
  return video_id + "_N" + std::to_string(n_refs) + "_" + hash + ".dpab";
}

void save_bank(const std::filesystem::path& path, const MemoryBank& bank) {
  std::vector<double> idx(bank.frame_indices.begin(), bank.frame_indices.end());
  save_records(path, {{"keys", bank.keys.detach()},
                      {"values", bank.values.detach()},
                      {"frame_indices", Tensor({idx.size()}, idx)}});
}

MemoryBank load_bank(const std::filesystem::path& path) {
  auto records = load_records(path);
  if (records.size() != 3 || records[0].name != "keys" || records[1].name != "values" ||
      records[2].name != "frame_indices")
    throw ValidationError(path.string() + ": not a memory bank file");
  MemoryBank bank{records[0].tensor, records[1].tensor, {}};
  for (double v : records[2].tensor.data()) bank.frame_indices.push_back(static_cast<std::size_t>(v));
  if (bank.keys.shape() != bank.values.shape())
    throw ValidationError(path.string() + ": key/value shapes disagree");
  return bank;
}

}  // namespace dpa
