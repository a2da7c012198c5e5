// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dpa/ops.hpp"
#include "dpa/prototype.hpp"
#include "gradcheck.hpp"

namespace dpa {
namespace {

using test::random_tensor;

TEST(SoftRegions, ConstantInputIsUniform) {
  const auto s = soft_regions(Tensor::full({3, 8}, 2.0));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 8.0, 1e-15);
}

TEST(SoftRegions, RowsSumToOne) {
  std::mt19937_64 rng(1);
  const auto s = soft_regions(random_tensor({5, 12}, rng, -4, 4, false)).to_matrix();
  for (int r = 0; r < s.rows(); ++r) EXPECT_NEAR(s.row(r).sum(), 1.0, 1e-9);
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
}

TEST(SoftRegions, ChannelAxisNormalizesColumns) {
  std::mt19937_64 rng(1);
  const auto s = soft_regions(random_tensor({5, 12}, rng, -4, 4, false), RegionAxis::Channel).to_matrix();
  for (int c = 0; c < s.cols(); ++c) EXPECT_NEAR(s.col(c).sum(), 1.0, 1e-9);
}

TEST(SoftRegions, SpikeDominates) {
  std::mt19937_64 rng(2);
  for (double spike : {20.0, 35.0}) {
    RowMatrix x = random_tensor({4, 16}, rng, 0, 1, false).to_matrix();
    for (int c = 0; c < 4; ++c) x(c, (c * 5) % 16) += spike;
    const auto s = soft_regions(Tensor::from_matrix(x)).to_matrix();
    for (int c = 0; c < 4; ++c) EXPECT_GT(s(c, (c * 5) % 16), 0.99);
  }
}

TEST(Aggregate, UniformRegionsGiveSpatialMean) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor({4, 10}, rng, -1, 1, false);
  const auto p = aggregate(x, Tensor::full({4, 10}, 0.1)).protos.to_matrix();
  const Eigen::VectorXd mean = x.to_matrix().rowwise().mean();
  for (int j = 0; j < 4; ++j) EXPECT_LE((p.col(j) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Aggregate, OneHotRegionsPickPixels) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor({3, 6}, rng, -1, 1, false);
  RowMatrix s = RowMatrix::Zero(3, 6);
  const int pick[3] = {5, 0, 2};
  for (int j = 0; j < 3; ++j) s(j, pick[j]) = 1.0;
  const auto p = aggregate(x, Tensor::from_matrix(s)).protos.to_matrix();
  for (int j = 0; j < 3; ++j) EXPECT_EQ(p.col(j), x.to_matrix().col(pick[j]));
}

TEST(Aggregate, MatchesWeightedSumOracle) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor({5, 7}, rng, -1, 1, false), s = random_tensor({5, 7}, rng, 0, 1, false);
  const auto p = aggregate(x, s).protos;
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < 7; ++q) acc += x[c * 7 + q] * s[j * 7 + q];
      EXPECT_NEAR(p[c * 5 + j], acc, 1e-12);
    }
  EXPECT_THROW(aggregate(x, Tensor::zeros({5, 6})), DimensionError);
}

TEST(Prototypes, CountEqualsFeatureSize) {
  std::mt19937_64 rng(5);
  const auto p = make_prototypes(random_tensor({6, 20}, rng, -1, 1, false));
  EXPECT_EQ(p.feature_size(), 6u);
  EXPECT_EQ(p.count(), 6u);
}

TEST(Prototypes, StayInsidePixelEnvelope) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_tensor({4, 9}, rng, -10, 10, false);
    const auto xm = x.to_matrix();
    const auto p = make_prototypes(x).protos.to_matrix();
    for (int c = 0; c < 4; ++c) {
      ASSERT_GE(p.row(c).minCoeff(), xm.row(c).minCoeff() - 1e-9);
      ASSERT_LE(p.row(c).maxCoeff(), xm.row(c).maxCoeff() + 1e-9);
    }
  }
}

TEST(SelfCorrelate, PixelPrototypeCorrelatesToOne) {
  std::mt19937_64 rng(7);
  const auto x = random_tensor({4, 6}, rng, -1, 1, false);
  const RowMatrix protos = x.to_matrix().leftCols(4);
  const auto corr = self_correlate({Tensor::from_matrix(protos)}, x).corr.to_matrix();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(corr(i, i), 1.0, 1e-9);
}

TEST(SelfCorrelate, OrthogonalPairIsZero) {
  const auto corr = self_correlate({Tensor({2, 1}, {1, 0})}, Tensor({2, 2}, {0, 1, 1, 0})).corr;
  EXPECT_NEAR(corr[0], 0.0, 1e-9);
  EXPECT_NEAR(corr[1], 1.0, 1e-9);
}

TEST(SelfCorrelate, BoundedAndScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> positive(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_tensor({5, 11}, rng, -3, 3, false);
    const auto protos = make_prototypes(x);
    const auto corr = self_correlate(protos, x).corr.to_matrix();
    ASSERT_LE(corr.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
    RowMatrix xs = x.to_matrix(), ps = protos.protos.to_matrix();
    for (int c = 0; c < xs.cols(); ++c) xs.col(c) *= positive(rng);
    for (int c = 0; c < ps.cols(); ++c) ps.col(c) *= positive(rng);
    const auto scaled = self_correlate({Tensor::from_matrix(ps)}, Tensor::from_matrix(xs)).corr.to_matrix();
    ASSERT_LE((scaled - corr).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SelfCorrelate, ZeroPixelGivesZeroColumn) {
  const auto corr = self_correlate({Tensor({2, 1}, {1, 1})}, Tensor({2, 2}, {0, 1, 0, 2})).corr;
  EXPECT_EQ(corr[0], 0.0);
}

TEST(PrototypeGradient, EndToEnd) {
  std::mt19937_64 rng(9);
  for (auto axis : {RegionAxis::Spatial, RegionAxis::Channel}) {
    const auto x = random_tensor({4, 9}, rng);
    const auto w = random_tensor({4, 9}, rng, -1, 1, false);
    const auto r = test::grad_check(
        [&] { return test::weighted_readout(self_correlate(make_prototypes(x, axis), x).corr, w); }, {x});
    EXPECT_LT(r.max_rel_error, 1e-5);
  }
}

}  // namespace
}  // namespace dpa
