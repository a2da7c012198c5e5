// SPDX-License-Identifier: Apache-2.0
#include "dpa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dpa {

namespace {
thread_local bool t_grad_enabled = true;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "×" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace detail {

std::span<double> grad_buffer(const Tensor& t) {
  auto& n = *TensorAccess::node(t);
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : Tensor(adopt(std::move(shape), Buffer(data.begin(), data.end()), requires_grad)) {}

Tensor Tensor::adopt(Shape shape, Buffer data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  if (shape_numel(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_matrix(const RowMatrix& m, bool requires_grad) {
  std::vector<double> v(m.data(), m.data() + m.size());
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v),
                requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::normal(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

ConstMatrixMap Tensor::matrix() const {
  const auto& s = shape();
  if (s.size() == 2) return ConstMatrixMap(node_->value.data(), s[0], s[1]);
  if (s.size() == 3) return ConstMatrixMap(node_->value.data(), s[0], s[1] * s[2]);
  if (s.size() == 1) return ConstMatrixMap(node_->value.data(), s[0], 1);
  throw DimensionError("matrix view needs rank 1-3, got " + shape_string(s));
}

Tensor Tensor::detach() const { return adopt(shape(), node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

Tensor make_result(Shape shape, Buffer value, const std::vector<Tensor>& inputs,
                   detail::BackwardFn fn) {
  Tensor out = Tensor::adopt(std::move(shape), std::move(value), false);
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto& node = *TensorAccess::node(out);
  node.requires_grad = true;
  for (const auto& in : inputs)
    if (in.requires_grad()) node.parents.push_back(TensorAccess::node(in));
  node.backward = std::move(fn);
  return out;
}

Tensor make_result(Shape shape, Buffer value, std::initializer_list<Tensor> inputs,
                   detail::BackwardFn fn) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor>(inputs), std::move(fn));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  auto* root = TensorAccess::node(loss).get();
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      auto* p = n->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients restart every sweep; leaves keep accumulating.
  for (auto* n : order)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  if (root->grad.size() != 1) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (n->backward) n->backward(n->grad);
  }
}

Parameter make_weight(std::string name, Shape shape, std::size_t fan_in, Rng& rng, double gain) {
  const double bound = std::sqrt(gain / static_cast<double>(fan_in));
  return {std::move(name), Tensor::uniform(std::move(shape), -bound, bound, rng, true)};
}

Parameter make_fusion_weight(std::string name, std::size_t c_out, std::size_t pass, std::size_t extra, std::size_t k,
                             double pass_weight, Rng& rng) {
  const auto cin = pass + extra;
  auto p = make_weight(std::move(name), {c_out, cin, k, k}, cin * k * k, rng, kFusionGain);
  auto w = p.tensor.mutable_data();
  const auto taps = k * k;
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t i = 0; i < pass; ++i)
      for (std::size_t t = 0; t < taps; ++t)
        w[(o * cin + i) * taps + t] = (i % c_out == o && t == taps / 2) ? pass_weight : 0.0;
  return p;
}

Parameter make_bias(std::string name, std::size_t size) {
  return {std::move(name), Tensor::zeros({size}, true)};
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void zero_grad(const ParameterList& params) {
  for (auto p : params) p.tensor.zero_grad();
}

}  // namespace dpa
