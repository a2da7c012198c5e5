// SPDX-License-Identifier: Apache-2.0
#include "dpa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpa {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

MatrixMap grad_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
  return MatrixMap(detail::grad_buffer(t).data(), rows, cols);
}

// (outer, extent, inner) decomposition of a shape around an axis.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " ⊗ " +
                         shape_string(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Buffer out(m * n);
  MatrixMap(out.data(), m, n).noalias() = a.matrix() * b.matrix();
  return make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](std::span<const double> g) {
    ConstMatrixMap gm(g.data(), m, n);
    if (a.requires_grad()) grad_matrix(a, m, k).noalias() += gm * b.matrix().transpose();
    if (b.requires_grad()) grad_matrix(b, k, n).noalias() += a.matrix().transpose() * gm;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto m = a.dim(0), n = a.dim(1);
  Buffer out(m * n);
  MatrixMap(out.data(), n, m) = a.matrix().transpose();
  return make_result({n, m}, std::move(out), {a}, [a, m, n](std::span<const double> g) {
    grad_matrix(a, m, n) += ConstMatrixMap(g.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  Buffer out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [x](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    for (const auto& t : {a, b}) {
      if (!t.requires_grad()) continue;
      auto gt = detail::grad_buffer(t);
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Buffer out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto ga = detail::grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = detail::grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Buffer out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto ga = detail::grad_buffer(a);
      const auto db = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * db[i];
    }
    if (b.requires_grad()) {
      auto gb = detail::grad_buffer(b);
      const auto da = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * da[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  Buffer out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x}, [x, factor](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

namespace {
thread_local ReluPatternProbe* active_probe = nullptr;
}  // namespace

ReluPatternProbe::ReluPatternProbe()
    : previous_(active_probe), margin_(std::numeric_limits<double>::infinity()) {
  active_probe = this;
}

ReluPatternProbe::~ReluPatternProbe() { active_probe = previous_; }

Tensor relu(const Tensor& x) {
  Buffer out(x.data().begin(), x.data().end());
  if (auto* probe = active_probe) {
    for (double v : out) {
      probe->signature_ = (probe->signature_ ^ (v > 0.0 ? 1u : 2u)) * 0x100000001b3ULL;
      probe->margin_ = std::min(probe->margin_, std::abs(v));
    }
  }
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    const auto dx = x.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (dx[i] > 0.0) gx[i] += g[i];
  });
}

Tensor sum(const Tensor& x) {
  const auto d = x.data();
  const double s = std::accumulate(d.begin(), d.end(), 0.0);
  return make_result({1}, {s}, {x}, [x](std::span<const double> g) {
    for (auto& v : detail::grad_buffer(x)) v += g[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_string(x.shape()));
  const auto v = axis_view(x.shape(), axis);
  const auto dx = x.data();
  Buffer out(x.numel());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = dx[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, dx[base + e * v.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double ex = std::exp(dx[base + e * v.inner] - mx);
        out[base + e * v.inner] = ex;
        z += ex;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= z;
    }
  }
  auto result = make_result(x.shape(), std::move(out), {x}, nullptr);
  if (!result.requires_grad()) return result;
  // The backward rule needs the output values; capture them without a cycle.
  auto y = result.detach();
  TensorAccess::node(result)->backward = [x, y, v](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    const auto dy = y.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * dy[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const auto i = base + e * v.inner;
          gx[i] += dy[i] * (g[i] - dot);
        }
      }
    }
  };
  return result;
}

Tensor l2_normalize(const Tensor& x) {
  require_rank(x, 2, "l2_normalize");
  const auto rows = x.dim(0), cols = x.dim(1);
  const auto dx = x.data();
  Buffer norms(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) norms[c] += dx[r * cols + c] * dx[r * cols + c];
  for (auto& n : norms) n = std::sqrt(n);
  Buffer out(x.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (norms[c] >= kNormEpsilon) out[r * cols + c] = dx[r * cols + c] / norms[c];
  auto result = make_result(x.shape(), std::move(out), {x}, nullptr);
  if (!result.requires_grad()) return result;
  auto y = result.detach();
  TensorAccess::node(result)->backward = [x, y, norms, rows, cols](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    const auto dy = y.data();
    for (std::size_t c = 0; c < cols; ++c) {
      if (norms[c] < kNormEpsilon) continue;
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += dy[r * cols + c] * g[r * cols + c];
      for (std::size_t r = 0; r < rows; ++r) {
        const auto i = r * cols + c;
        gx[i] += (g[i] - dy[i] * dot) / norms[c];
      }
    }
  };
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const auto& first = parts.front().shape();
  if (axis >= first.size())
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok)
      throw DimensionError("concat: side extents differ, " + shape_string(first) + " vs " + shape_string(s));
    out_shape[axis] += s[axis];
  }
  const auto v = axis_view(out_shape, axis);
  Buffer out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const auto ext = p.dim(axis);
    const auto src = p.data();
    const std::size_t chunk = ext * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(src.begin() + o * chunk, chunk, out.begin() + o * v.extent * v.inner + offset * v.inner);
    offset += ext;
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [parts, offsets, v, axis](std::span<const double> g) {
                       for (std::size_t k = 0; k < parts.size(); ++k) {
                         const auto& p = parts[k];
                         if (!p.requires_grad()) continue;
                         auto gp = detail::grad_buffer(p);
                         const std::size_t chunk = p.dim(axis) * v.inner;
                         for (std::size_t o = 0; o < v.outer; ++o) {
                           const auto* src = g.data() + o * v.extent * v.inner + offsets[k] * v.inner;
                           for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += src[i];
                         }
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t length) {
  if (axis >= x.rank() || length == 0 || begin + length > x.dim(axis))
    throw DimensionError("slice: [" + std::to_string(begin) + ", +" + std::to_string(length) +
                         ") invalid on axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  const auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Buffer out(shape_numel(out_shape));
  const auto src = x.data();
  const std::size_t chunk = length * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(src.begin() + o * v.extent * v.inner + begin * v.inner, chunk, out.begin() + o * chunk);
  return make_result(std::move(out_shape), std::move(out), {x}, [x, v, begin, chunk](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < chunk; ++i) gx[o * v.extent * v.inner + begin * v.inner + i] += g[o * chunk + i];
  });
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes) {
  std::vector<Tensor> parts;
  std::size_t begin = 0;
  for (auto s : sizes) {
    parts.push_back(slice(x, axis, begin, s));
    begin += s;
  }
  if (begin != x.dim(axis))
    throw DimensionError("split: sizes do not cover axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  return parts;
}

namespace {

// Column matrix (C·k·k) × (H·W) for a same-padded dilated kernel.
RowMatrix im2col(std::span<const double> x, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
                 std::size_t dilation) {
  const auto pad = static_cast<long>(dilation * (k - 1) / 2);
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(channels * k * k), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols.row(static_cast<Eigen::Index>((c * k + ky) * k + kx)).data();
        const long oy = static_cast<long>(ky * dilation) - pad;
        const long ox = static_cast<long>(kx * dilation) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + oy;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const long lo = std::max(0L, -ox), hi = std::min(static_cast<long>(w), static_cast<long>(w) - ox);
          if (lo >= hi) continue;
          const auto x0 = static_cast<std::size_t>(lo), x1 = static_cast<std::size_t>(hi);
          const double* src = x.data() + c * h * w + static_cast<std::size_t>(sy) * w;
          for (std::size_t xx = x0; xx < x1; ++xx) row[y * w + xx] = src[static_cast<long>(xx) + ox];
        }
      }
  return cols;
}

void col2im_add(const RowMatrix& cols, std::span<double> gx, std::size_t channels, std::size_t h, std::size_t w,
                std::size_t k, std::size_t dilation) {
  const auto pad = static_cast<long>(dilation * (k - 1) / 2);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols.row(static_cast<Eigen::Index>((c * k + ky) * k + kx)).data();
        const long oy = static_cast<long>(ky * dilation) - pad;
        const long ox = static_cast<long>(kx * dilation) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + oy;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const long lo = std::max(0L, -ox), hi = std::min(static_cast<long>(w), static_cast<long>(w) - ox);
          if (lo >= hi) continue;
          const auto x0 = static_cast<std::size_t>(lo), x1 = static_cast<std::size_t>(hi);
          double* dst = gx.data() + c * h * w + static_cast<std::size_t>(sy) * w;
          for (std::size_t xx = x0; xx < x1; ++xx) dst[static_cast<long>(xx) + ox] += row[y * w + xx];
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const auto cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin)
    throw DimensionError("conv2d: input has " + std::to_string(cin) + " channels but weight is " +
                         shape_string(weight.shape()));
  if (weight.dim(3) != k || k % 2 == 0) throw DimensionError("conv2d: kernel must be square and odd, got " +
                                                                shape_string(weight.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " + std::to_string(cout) +
                         " output channels");
  const auto hw = static_cast<Eigen::Index>(h * w);
  const auto ckk = static_cast<Eigen::Index>(cin * k * k);
  ConstMatrixMap wm(weight.data().data(), static_cast<Eigen::Index>(cout), ckk);

  std::shared_ptr<RowMatrix> cols;
  if (k > 1) cols = std::make_shared<RowMatrix>(im2col(x.data(), cin, h, w, k, dilation));
  Buffer out(cout * h * w);
  MatrixMap om(out.data(), static_cast<Eigen::Index>(cout), hw);
  if (cols)
    om.noalias() = wm * (*cols);
  else
    om.noalias() = wm * x.matrix();
  if (bias.defined()) {
    const auto b = bias.data();
    for (std::size_t c = 0; c < cout; ++c) om.row(static_cast<Eigen::Index>(c)).array() += b[c];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({cout, h, w}, std::move(out), inputs,
                     [x, weight, bias, cols, cin, cout, h, w, k, dilation, hw, ckk](std::span<const double> g) {
                       ConstMatrixMap gm(g.data(), static_cast<Eigen::Index>(cout), hw);
                       if (weight.requires_grad()) {
                         auto gw = grad_matrix(weight, static_cast<Eigen::Index>(cout), ckk);
                         if (cols)
                           gw.noalias() += gm * cols->transpose();
                         else
                           gw.noalias() += gm * x.matrix().transpose();
                       }
                       if (bias.defined() && bias.requires_grad()) {
                         auto gb = detail::grad_buffer(bias);
                         for (std::size_t c = 0; c < cout; ++c) gb[c] += gm.row(static_cast<Eigen::Index>(c)).sum();
                       }
                       if (x.requires_grad()) {
                         ConstMatrixMap wm(weight.data().data(), static_cast<Eigen::Index>(cout), ckk);
                         if (k > 1) {
                           RowMatrix gcols = wm.transpose() * gm;
                           col2im_add(gcols, detail::grad_buffer(x), cin, h, w, k, dilation);
                         } else {
                           grad_matrix(x, static_cast<Eigen::Index>(cin), hw).noalias() += wm.transpose() * gm;
                         }
                       }
                     });
}

Tensor upsample2x(const Tensor& x) {
  require_rank(x, 3, "upsample2x");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto src = x.data();
  Buffer out(c * 4 * h * w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        out[(ch * 2 * h + y) * 2 * w + xx] = src[(ch * h + y / 2) * w + xx / 2];
  return make_result({c, 2 * h, 2 * w}, std::move(out), {x}, [x, c, h, w](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx) gx[(ch * h + y / 2) * w + xx / 2] += g[(ch * 2 * h + y) * 2 * w + xx];
  });
}

Tensor avgpool2x(const Tensor& x) {
  require_rank(x, 3, "avgpool2x");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) throw DimensionError("avgpool2x: odd spatial extent in " + shape_string(x.shape()));
  const auto oh = h / 2, ow = w / 2;
  const auto src = x.data();
  Buffer out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* p = src.data() + (ch * h + 2 * y) * w + 2 * xx;
        out[(ch * oh + y) * ow + xx] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return make_result({c, oh, ow}, std::move(out), {x}, [x, c, h, w, oh, ow](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const double v = 0.25 * g[(ch * oh + y) * ow + xx];
          double* p = gx.data() + (ch * h + 2 * y) * w + 2 * xx;
          p[0] += v;
          p[1] += v;
          p[w] += v;
          p[w + 1] += v;
        }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const auto c = x.dim(0), hw = x.dim(1) * x.dim(2);
  Buffer out(c);
  for (std::size_t ch = 0; ch < c; ++ch) out[ch] = x.matrix().row(static_cast<Eigen::Index>(ch)).mean();
  return make_result({c, 1, 1}, std::move(out), {x}, [x, c, hw](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) gx[ch * hw + p] += g[ch] / static_cast<double>(hw);
  });
}

Tensor broadcast_spatial(const Tensor& x, std::size_t height, std::size_t width) {
  require_rank(x, 3, "broadcast_spatial");
  if (x.dim(1) != 1 || x.dim(2) != 1)
    throw DimensionError("broadcast_spatial: expected C×1×1, got " + shape_string(x.shape()));
  const auto c = x.dim(0), hw = height * width;
  Buffer out(c * hw);
  for (std::size_t ch = 0; ch < c; ++ch) std::fill_n(out.begin() + ch * hw, hw, x.data()[ch]);
  return make_result({c, height, width}, std::move(out), {x}, [x, c, hw](std::span<const double> g) {
    auto gx = detail::grad_buffer(x);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) gx[ch] += g[ch * hw + p];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> target) {
  require_rank(logits, 3, "cross_entropy");
  if (logits.dim(0) != 2) throw DimensionError("cross_entropy: expected 2 logit channels, got " +
                                               shape_string(logits.shape()));
  const auto hw = logits.dim(1) * logits.dim(2);
  if (target.size() != hw)
    throw DimensionError("cross_entropy: target has " + std::to_string(target.size()) + " labels for " +
                         shape_string(logits.shape()));
  const auto l = logits.data();
  Buffer p1(hw);
  double total = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    if (target[p] > 1) throw ArgumentError("cross_entropy: target labels must be 0 or 1");
    const double a = l[p], b = l[hw + p];
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    total += lse - (target[p] ? b : a);
    p1[p] = std::exp(b - lse);
  }
  const double n = static_cast<double>(hw);
  std::vector<std::uint8_t> labels(target.begin(), target.end());
  return make_result({1}, {total / n}, {logits}, [logits, p1 = std::move(p1), labels, hw, n](std::span<const double> g) {
    auto gl = detail::grad_buffer(logits);
    for (std::size_t p = 0; p < hw; ++p) {
      const double q1 = p1[p], q0 = 1.0 - q1;
      gl[p] += g[0] * (q0 - (labels[p] ? 0.0 : 1.0)) / n;
      gl[hw + p] += g[0] * (q1 - (labels[p] ? 1.0 : 0.0)) / n;
    }
  });
}

}  // namespace dpa
