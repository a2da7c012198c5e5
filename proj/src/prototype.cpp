// SPDX-License-Identifier: Apache-2.0
#include "dpa/prototype.hpp"

#include "dpa/ops.hpp"

namespace dpa {

Tensor soft_regions(const Tensor& x, RegionAxis axis) {
  if (x.rank() != 2) throw DimensionError("soft_regions: expected C×HW, got " + shape_string(x.shape()));
  return softmax(x, axis == RegionAxis::Spatial ? 1 : 0);
}

PrototypeSet aggregate(const Tensor& x, const Tensor& s) {
  if (x.shape() != s.shape())
    throw DimensionError("aggregate: features " + shape_string(x.shape()) + " vs regions " + shape_string(s.shape()));
  return {matmul(x, transpose(s))};
}

PrototypeSet make_prototypes(const Tensor& x, RegionAxis axis) { return aggregate(x, soft_regions(x, axis)); }

CorrelationMap self_correlate(const PrototypeSet& protos, const Tensor& x) {
  if (x.rank() != 2 || protos.protos.dim(0) != x.dim(0))
    throw DimensionError("self_correlate: prototypes " + shape_string(protos.protos.shape()) + " vs features " +
                         shape_string(x.shape()));
  return {matmul(transpose(l2_normalize(protos.protos)), l2_normalize(x))};
}

}  // namespace dpa
