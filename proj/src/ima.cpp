// SPDX-License-Identifier: Apache-2.0
#include "dpa/ima.hpp"

#include "dpa/ops.hpp"

namespace dpa {

Tensor embed_kv(const Tensor& psi, const Tensor& weight, EmbedMode mode) {
  if (psi.rank() != 2) throw DimensionError("embed_kv: expected C'×HW, got " + shape_string(psi.shape()));
  if (mode == EmbedMode::HwFc) {
    if (weight.dim(0) != psi.dim(1))
      throw DimensionError("embed_kv: map has HW=" + std::to_string(psi.dim(1)) + " but the block is configured for " +
                           shape_string(weight.shape()));
    return matmul(psi, weight);
  }
  if (weight.dim(1) != psi.dim(0))
    throw DimensionError("embed_kv: map has C'=" + std::to_string(psi.dim(0)) + " but weight is " +
                         shape_string(weight.shape()));
  return matmul(weight, psi);
}

Tensor correspondence(const Tensor& k_a, const Tensor& k_m) {
  if (k_a.shape() != k_m.shape())
    throw DimensionError("correspondence: " + shape_string(k_a.shape()) + " vs " + shape_string(k_m.shape()));
  return matmul(k_a, transpose(k_m));
}

Transferred transfer(const Tensor& phi, const Tensor& v_a, const Tensor& v_m) {
  if (phi.rank() != 2 || phi.dim(0) != phi.dim(1) || v_a.shape() != v_m.shape() || v_a.dim(0) != phi.dim(0))
    throw DimensionError("transfer: Φ " + shape_string(phi.shape()) + ", V_A " + shape_string(v_a.shape()) +
                         ", V_M " + shape_string(v_m.shape()));
  return {matmul(softmax(phi, 1), v_m), matmul(softmax(transpose(phi), 1), v_a)};
}

ImaBlock::ImaBlock(std::string name, std::size_t channels, std::size_t height, std::size_t width,
                   ImaOptions options, Rng& rng)
    : name_(std::move(name)), channels_(channels), height_(height), width_(width), options_(options) {
  const std::size_t hw = height * width;
  const std::size_t protos = channels;
  auto embed = [&](const std::string& suffix) {
    const auto n = options_.embed == EmbedMode::HwFc ? hw : protos;
    return make_weight(name_ + "." + suffix, {n, n}, n, rng);
  };
  sigma_k_a = embed("sigma_k_a");
  sigma_v_a = embed("sigma_v_a");
  sigma_k_m = embed("sigma_k_m");
  sigma_v_m = embed("sigma_v_m");
  const std::size_t cin = channels + protos;
  fuse_a_w = make_fusion_weight(name_ + ".fuse_a.weight", channels, channels, cin - channels, 3, 1.0, rng);
  fuse_a_b = make_bias(name_ + ".fuse_a.bias", channels);
  fuse_m_w = make_fusion_weight(name_ + ".fuse_m.weight", channels, channels, cin - channels, 3, 1.0, rng);
  fuse_m_b = make_bias(name_ + ".fuse_m.bias", channels);
}

Tensor ImaBlock::embed_source(const Tensor& x) const {
  if (!options_.use_prototypes) return x;
  return self_correlate(make_prototypes(x, options_.region_axis), x).corr;
}

ImaOutput ImaBlock::forward(const Tensor& x_a, const Tensor& x_m) const {
  const Shape expected{channels_, height_, width_};
  if (x_a.shape() != expected || x_m.shape() != expected)
    throw DimensionError("ima_forward: block " + name_ + " expects " + shape_string(expected) + ", got " +
                         shape_string(x_a.shape()) + " and " + shape_string(x_m.shape()));
  const Shape flat{channels_, height_ * width_};
  const auto fa = reshape(x_a, flat);
  const auto fm = reshape(x_m, flat);

  const auto psi_a = embed_source(fa);
  const auto psi_m = embed_source(fm);
  const auto k_a = embed_kv(psi_a, sigma_k_a.tensor, options_.embed);
  const auto v_a = embed_kv(psi_a, sigma_v_a.tensor, options_.embed);
  const auto k_m = embed_kv(psi_m, sigma_k_m.tensor, options_.embed);
  const auto v_m = embed_kv(psi_m, sigma_v_m.tensor, options_.embed);

  const auto t = transfer(correspondence(k_a, k_m), v_a, v_m);
  const Shape cube{channels_, height_, width_};
  const auto ta = reshape(t.to_appearance, cube);
  const auto tm = reshape(t.to_motion, cube);
  return {relu(conv2d(concat(x_a, ta, 0), fuse_a_w.tensor, fuse_a_b.tensor)),
          relu(conv2d(concat(x_m, tm, 0), fuse_m_w.tensor, fuse_m_b.tensor))};
}

ImaBlock ImaBlock::mirrored() const {
  auto copy = [](const Parameter& p, const Parameter& named_as) {
    return Parameter{named_as.name, Tensor(p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}, true)};
  };
  ImaBlock m;
  m.name_ = name_;
  m.channels_ = channels_;
  m.height_ = height_;
  m.width_ = width_;
  m.options_ = options_;
  m.sigma_k_a = copy(sigma_k_m, sigma_k_a);
  m.sigma_v_a = copy(sigma_v_m, sigma_v_a);
  m.sigma_k_m = copy(sigma_k_a, sigma_k_m);
  m.sigma_v_m = copy(sigma_v_a, sigma_v_m);
  m.fuse_a_w = copy(fuse_m_w, fuse_a_w);
  m.fuse_a_b = copy(fuse_m_b, fuse_a_b);
  m.fuse_m_w = copy(fuse_a_w, fuse_m_w);
  m.fuse_m_b = copy(fuse_a_b, fuse_m_b);
  return m;
}

ParameterList ImaBlock::parameters() const {
  return {sigma_k_a, sigma_v_a, sigma_k_m, sigma_v_m, fuse_a_w, fuse_a_b, fuse_m_w, fuse_m_b};
}

}  // namespace dpa
