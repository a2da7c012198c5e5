// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dpa/ops.hpp"
#include "dpa/optim.hpp"

namespace dpa {
namespace {

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 1000), 1e-4);
  EXPECT_NEAR(cosine_lr(1000, 1000), 1e-5, 1e-18);
}

TEST(CosineLr, Midpoint) { EXPECT_NEAR(cosine_lr(500, 1000), (1e-4 + 1e-5) / 2, 1e-12); }

TEST(CosineLr, MonotoneNonincreasing) {
  double prev = cosine_lr(0, 137);
  for (long s = 1; s <= 137; ++s) {
    const double lr = cosine_lr(s, 137);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Adam, ScalarQuadraticConverges) {
  Parameter x{"x", Tensor({1}, {1.0}, true)};
  Adam adam({x});
  for (int step = 0; step < 2000; ++step) {
    backward(sum(mul(x.tensor, x.tensor)));
    adam.step(1e-2);
    adam.zero_grad();
  }
  EXPECT_LT(std::abs(x.tensor[0]), 1e-3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter x{"x", Tensor({2}, {1.0, -3.0}, true)};
  Adam adam({x});
  backward(sum(mul(x.tensor, x.tensor)));
  adam.step(0.1);
  // Bias-corrected first step is lr·sign(g) up to epsilon.
  EXPECT_NEAR(x.tensor[0], 0.9, 1e-6);
  EXPECT_NEAR(x.tensor[1], -2.9, 1e-6);
}

TEST(Adam, SkipsParametersWithoutGradient) {
  Parameter a{"a", Tensor({1}, {1.0}, true)}, b{"b", Tensor({1}, {5.0}, true)};
  Adam adam({a, b});
  backward(sum(a.tensor));
  adam.step(0.1);
  EXPECT_EQ(b.tensor[0], 5.0);
}

}  // namespace
}  // namespace dpa
