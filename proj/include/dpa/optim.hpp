// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dpa/tensor.hpp"

namespace dpa {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  explicit Adam(ParameterList params, AdamOptions options = {});

  /// One update with learning rate `lr` using the currently accumulated grads.
  /// Parameters without a gradient are left untouched.
  void step(double lr);
  void zero_grad();
  long steps_taken() const { return t_; }

 private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

/// Cosine annealing from lr_max at step 0 to lr_min at step == total.
double cosine_lr(long step, long total, double lr_max = 1e-4, double lr_min = 1e-5);

}  // namespace dpa
