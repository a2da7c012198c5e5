// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpa/tensor.hpp"

// Differentiable free functions over Tensor. Every op records its backward
// rule when grad recording is on and an input requires grad.
namespace dpa {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);

/// While alive, folds the on/off pattern of every relu evaluated on this
/// thread into a signature. Two evaluations with equal signatures took the
/// same linear piece of the network.
class ReluPatternProbe {
 public:
  ReluPatternProbe();
  ~ReluPatternProbe();
  ReluPatternProbe(const ReluPatternProbe&) = delete;
  ReluPatternProbe& operator=(const ReluPatternProbe&) = delete;
  std::uint64_t signature() const { return signature_; }
  /// Smallest |input| seen by any relu (inputs of exactly 0 count as 0).
  double margin() const { return margin_; }

 private:
  friend Tensor relu(const Tensor& x);
  ReluPatternProbe* previous_;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
  double margin_;
};

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Column-wise L2 normalization of a C×N matrix. Columns with norm below
/// kNormEpsilon map to exact zeros (and pass no gradient).
inline constexpr double kNormEpsilon = 1e-12;
Tensor l2_normalize(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
inline Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) { return concat({a, b}, axis); }
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t length);
std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes);

/// Same-padded (zero) 2-D convolution of a C_in×H×W map with a
/// C_out×C_in×k×k weight, k odd. `bias` may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation = 1);

/// Nearest-neighbour 2× upsampling of C×H×W.
Tensor upsample2x(const Tensor& x);
/// 2×2 average pooling with stride 2; H and W must be even.
Tensor avgpool2x(const Tensor& x);
/// C×H×W → C×1×1 spatial mean.
Tensor global_avg_pool(const Tensor& x);
/// C×1×1 → C×H×W by replication.
Tensor broadcast_spatial(const Tensor& x, std::size_t height, std::size_t width);

/// Mean over pixels of −log softmax(logits)[target]. logits is 2×H×W and
/// target holds H·W labels in {0, 1}, row-major.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> target);

}  // namespace dpa
