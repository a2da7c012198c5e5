// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dpa/errors.hpp"

namespace dpa {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using Rng = std::mt19937_64;

/// Storage aligned for Eigen's widest packets. Eigen peels reductions and
/// matrix-vector products differently depending on the start address, so
/// aligned storage is what makes results bit-reproducible across runs.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor;

namespace detail {

using BackwardFn = std::function<void(std::span<const double> out_grad)>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

/// Writable gradient buffer of `t`, allocated (zeroed) on first use.
std::span<double> grad_buffer(const Tensor& t);

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A Tensor is a cheap handle; copies share storage. Values produced by
/// forward operations are never mutated afterwards, so handles may be shared
/// across threads for reading. Only leaves (parameters) are updated in place,
/// and only by the training thread.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_matrix(const RowMatrix& m, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);
  static Tensor normal(Shape shape, double stddev, Rng& rng, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// In-place access for leaves (optimizer updates, test perturbations).
  std::span<double> mutable_data();
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  /// Zero-length span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  /// Rank-2 view; rank-3 C×H×W tensors are viewed as C×(H·W).
  ConstMatrixMap matrix() const;
  RowMatrix to_matrix() const { return matrix(); }

  /// Same values, detached from the recorded graph.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class TensorAccess;
  friend Tensor make_result(Shape, Buffer, const std::vector<Tensor>&, detail::BackwardFn);
  static Tensor adopt(Shape shape, Buffer data, bool requires_grad);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Internal hook used by op implementations and backward().
class TensorAccess {
 public:
  static const std::shared_ptr<detail::Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds an op result. When recording is on and any input requires grad, the
/// result records `inputs` as parents and `fn` as its backward rule.
Tensor make_result(Shape shape, Buffer value, std::initializer_list<Tensor> inputs,
                   detail::BackwardFn fn);
Tensor make_result(Shape shape, Buffer value, const std::vector<Tensor>& inputs,
                   detail::BackwardFn fn);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across calls.
void backward(const Tensor& loss);

/// Named trainable leaf.
struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

/// Uniform in ±sqrt(gain/fan_in).
Parameter make_weight(std::string name, Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0);

/// He-uniform gain for weights feeding a relu.
inline constexpr double kReluGain = 6.0;

/// Gain for the attention-input slice of a fusion conv.
inline constexpr double kFusionGain = 0.1;
/// c_out × (pass + extra) × k × k fusion kernel. Pass-through input channel i
/// feeds output i % c_out through the centre tap with weight `pass_weight`;
/// the remaining input channels are uniform in ±sqrt(kFusionGain/fan_in).
Parameter make_fusion_weight(std::string name, std::size_t c_out, std::size_t pass, std::size_t extra, std::size_t k,
                             double pass_weight, Rng& rng);
Parameter make_bias(std::string name, std::size_t size);

std::size_t parameter_count(const ParameterList& params);
void zero_grad(const ParameterList& params);

}  // namespace dpa
