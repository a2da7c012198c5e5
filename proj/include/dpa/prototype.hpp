// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dpa/tensor.hpp"

// Prototype generation and prototype/pixel correlation shared by the
// inter-modality and inter-frame attention blocks.
namespace dpa {

/// Axis of the soft-region softmax.
enum class RegionAxis {
  /// Each channel is a spatial distribution over pixels (rows sum to 1).
  /// Prototypes are then convex combinations of pixel features.
  Spatial,
  /// Each pixel is a distribution over channels (columns sum to 1).
  Channel,
};

/// C × C' matrix of prototype columns, C' == C.
struct PrototypeSet {
  Tensor protos;
  std::size_t feature_size() const { return protos.dim(0); }
  std::size_t count() const { return protos.dim(1); }
};

/// C' × HW cosine similarities between prototypes and pixels.
struct CorrelationMap {
  Tensor corr;
};

/// Softmax of a C×HW feature matrix along `axis`.
Tensor soft_regions(const Tensor& x, RegionAxis axis = RegionAxis::Spatial);

/// P = X ⊗ Sᵀ; column j is the S[j]-weighted sum of pixel features.
PrototypeSet aggregate(const Tensor& x, const Tensor& s);

/// soft_regions followed by aggregate.
PrototypeSet make_prototypes(const Tensor& x, RegionAxis axis = RegionAxis::Spatial);

/// corr[i, p] = cos(protos[:, i], x[:, p]). Zero columns give zero entries.
CorrelationMap self_correlate(const PrototypeSet& protos, const Tensor& x);

}  // namespace dpa
