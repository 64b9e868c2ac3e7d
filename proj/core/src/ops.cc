// Copyright 2026 The CoFlow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "coflow/ops.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace coflow::ops {
namespace {

using Storage = internal::TensorStorage;
using StoragePtr = std::shared_ptr<Storage>;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMatrix>;
using ConstMapRow = Eigen::Map<const RowMatrix>;

[[noreturn]] void ShapeError(OpKind kind, const Shape& a, const Shape& b,
                             const std::string& detail = "") {
  std::string msg = std::string(OpKindName(kind)) + ": shape mismatch " +
                    ShapeString(a) + " vs " + ShapeString(b);
  if (!detail.empty()) msg += " (" + detail + ")";
  throw std::invalid_argument(msg);
}

[[noreturn]] void RankError(OpKind kind, const Shape& a,
                            const std::string& expected) {
  throw std::invalid_argument(std::string(OpKindName(kind)) + ": expected " +
                              expected + ", got shape " + ShapeString(a));
}

int NormalizeAxis(OpKind kind, int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument(std::string(OpKindName(kind)) +
                                ": axis out of range");
  }
  return axis;
}

bool Wants(const StoragePtr& s) { return s && s->requires_grad; }

void Record(OpKind kind, std::initializer_list<Tensor> inputs, Tensor& out,
            std::function<void()> fn) {
  std::vector<Tensor> v(inputs);
  Tape::Current().Record(kind, v, out, std::move(fn));
}

// out[m, n] += op(A) op(B) with row-major operands; op(A) is [m, k]. When
// transposed, A is stored [k, m] and B is stored [n, k].
void SmallGemm(const double* a, const double* b, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool trans_a, bool trans_b) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      double* orow = out + i * n;
      if (trans_b) {
        for (std::int64_t j = 0; j < n; ++j) orow[j] += av * b[j * k + p];
      } else {
        const double* brow = b + p * n;
        for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
}

// Elementwise binary op with scalar broadcast support.
enum class Binary { kAdd, kSub, kMul };

Tensor BinaryOp(Binary which, const Tensor& a, const Tensor& b) {
  const OpKind kind = which == Binary::kAdd   ? OpKind::kAdd
                      : which == Binary::kSub ? OpKind::kSub
                                              : OpKind::kMul;
  const bool same = a.shape() == b.shape();
  const bool b_scalar = !same && b.numel() == 1;
  const bool a_scalar = !same && !b_scalar && a.numel() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    ShapeError(kind, a.shape(), b.shape());
  }
  const Shape& out_shape = a_scalar ? b.shape() : a.shape();
  const std::int64_t n = NumElements(out_shape);
  std::vector<double> out(n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  const std::int64_t as = a_scalar ? 0 : 1;
  const std::int64_t bs = b_scalar ? 0 : 1;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = ad[i * as], y = bd[i * bs];
    out[i] = which == Binary::kAdd ? x + y : which == Binary::kSub ? x - y
                                                                   : x * y;
  }
  Tensor result(out_shape, std::move(out));
  StoragePtr sa = a.shared_storage(), sb = b.shared_storage();
  StoragePtr so = result.shared_storage();
  Record(kind, {a, b}, result, [=]() {
    if (so->grad.empty()) return;
    const double* g = so->grad.data();
    if (Wants(sa)) {
      auto ga = sa->EnsureGrad();
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = which == Binary::kMul ? g[i] * sb->data[i * bs] : g[i];
        ga[i * as] += d;
      }
    }
    if (Wants(sb)) {
      auto gb = sb->EnsureGrad();
      for (std::int64_t i = 0; i < n; ++i) {
        double d = which == Binary::kMul   ? g[i] * sa->data[i * as]
                   : which == Binary::kSub ? -g[i]
                                           : g[i];
        gb[i * bs] += d;
      }
    }
  });
  return result;
}

// Number of elements before, along and after an axis.
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit SplitAt(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

double Softplus(double x) {
  if (x > 20.0) return x;
  return std::log1p(std::exp(x));
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return BinaryOp(Binary::kAdd, a, b);
}
Tensor Sub(const Tensor& a, const Tensor& b) {
  return BinaryOp(Binary::kSub, a, b);
}
Tensor Mul(const Tensor& a, const Tensor& b) {
  return BinaryOp(Binary::kMul, a, b);
}

Tensor ScalarMul(const Tensor& a, double scale) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= scale;
  Tensor result(a.shape(), std::move(out));
  StoragePtr sa = a.shared_storage(), so = result.shared_storage();
  Record(OpKind::kScalarMul, {a}, result, [=]() {
    if (so->grad.empty() || !Wants(sa)) return;
    auto ga = sa->EnsureGrad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += scale * so->grad[i];
  });
  return result;
}

Tensor Matmul(const Tensor& a, const Tensor& b) {
  const OpKind kind = OpKind::kMatmul;
  std::int64_t g = 1, m, k, n;
  if (a.rank() == 2 && b.rank() == 2) {
    m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) ShapeError(kind, a.shape(), b.shape(), "inner dims");
  } else if (a.rank() == 3 && b.rank() == 3) {
    g = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    if (b.dim(0) != g || b.dim(1) != k) {
      ShapeError(kind, a.shape(), b.shape(), "batch or inner dims");
    }
  } else {
    ShapeError(kind, a.shape(), b.shape(), "need rank 2 or 3 operands");
  }
  Shape out_shape = a.rank() == 2 ? Shape{m, n} : Shape{g, m, n};
  std::vector<double> out(g * m * n, 0.0);
  // Many tiny products (attention over a few agents) are faster as plain
  // loops than through the general GEMM dispatch.
  const bool small = m * k * n <= 512;
  for (std::int64_t i = 0; i < g; ++i) {
    const double* ap = a.data().data() + i * m * k;
    const double* bp = b.data().data() + i * k * n;
    double* op = out.data() + i * m * n;
    if (small) {
      SmallGemm(ap, bp, op, m, k, n, false, false);
    } else {
      MapRow(op, m, n).noalias() = ConstMapRow(ap, m, k) * ConstMapRow(bp, k, n);
    }
  }
  Tensor result(out_shape, std::move(out));
  StoragePtr sa = a.shared_storage(), sb = b.shared_storage();
  StoragePtr so = result.shared_storage();
  Record(kind, {a, b}, result, [=]() {
    if (so->grad.empty()) return;
    if (small) {
      double* ga = Wants(sa) ? sa->EnsureGrad().data() : nullptr;
      double* gb = Wants(sb) ? sb->EnsureGrad().data() : nullptr;
      for (std::int64_t i = 0; i < g; ++i) {
        const double* dy = so->grad.data() + i * m * n;
        // dA += dY B^T, dB += A^T dY
        if (ga) SmallGemm(dy, sb->data.data() + i * k * n, ga + i * m * k, m, n, k, false, true);
        if (gb) SmallGemm(sa->data.data() + i * m * k, dy, gb + i * k * n, k, m, n, true, false);
      }
      return;
    }
    for (std::int64_t i = 0; i < g; ++i) {
      ConstMapRow dy(so->grad.data() + i * m * n, m, n);
      if (Wants(sa)) {
        MapRow(sa->EnsureGrad().data() + i * m * k, m, k).noalias() +=
            dy * ConstMapRow(sb->data.data() + i * k * n, k, n).transpose();
      }
      if (Wants(sb)) {
        MapRow(sb->EnsureGrad().data() + i * k * n, k, n).noalias() +=
            ConstMapRow(sa->data.data() + i * m * k, m, k).transpose() * dy;
      }
    }
  });
  return result;
}

Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  const OpKind kind = stride == 1 ? OpKind::kConv1d : OpKind::kStridedConv1d;
  if (x.rank() != 3) RankError(kind, x.shape(), "input [B, Cin, T]");
  if (weight.rank() != 3) RankError(kind, weight.shape(), "weight [Cout, Cin, K]");
  if (stride < 1 || padding < 0) {
    throw std::invalid_argument(std::string(OpKindName(kind)) +
                                ": invalid stride or padding");
  }
  const std::int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::int64_t cout = weight.dim(0), ksize = weight.dim(2);
  if (weight.dim(1) != cin) ShapeError(kind, x.shape(), weight.shape(), "channels");
  if (bias.defined() && bias.shape() != Shape{cout}) {
    ShapeError(kind, weight.shape(), bias.shape(), "bias");
  }
  const std::int64_t out_len = (len + 2 * padding - ksize) / stride + 1;
  if (out_len <= 0) ShapeError(kind, x.shape(), weight.shape(), "too short");
  const std::int64_t rows = cin * ksize, cols_n = batch * out_len;
  // cols[(ci, k), (b, to)] = x[b, ci, to * stride - padding + k]
  auto cols = std::make_shared<std::vector<double>>(rows * cols_n, 0.0);
  const double* xd = x.data().data();
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    for (std::int64_t k = 0; k < ksize; ++k) {
      double* row = cols->data() + (ci * ksize + k) * cols_n;
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* xrow = xd + (b * cin + ci) * len;
        for (std::int64_t to = 0; to < out_len; ++to) {
          const std::int64_t ti = to * stride - padding + k;
          if (ti >= 0 && ti < len) row[b * out_len + to] = xrow[ti];
        }
      }
    }
  }
  RowMatrix y(cout, cols_n);
  y.noalias() = ConstMapRow(weight.data().data(), cout, rows) *
                ConstMapRow(cols->data(), rows, cols_n);
  std::vector<double> out(batch * cout * out_len);
  for (std::int64_t co = 0; co < cout; ++co) {
    const double bv = bias.defined() ? bias.at(co) : 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
      double* dst = out.data() + (b * cout + co) * out_len;
      const double* src = y.data() + co * cols_n + b * out_len;
      for (std::int64_t to = 0; to < out_len; ++to) dst[to] = src[to] + bv;
    }
  }
  Tensor result({batch, cout, out_len}, std::move(out));
  StoragePtr sx = x.shared_storage(), sw = weight.shared_storage();
  StoragePtr sb = bias.defined() ? bias.shared_storage() : nullptr;
  StoragePtr so = result.shared_storage();
  Tensor inputs_bias = bias.defined() ? bias : Tensor::Zeros({0});
  Record(kind, {x, weight, inputs_bias}, result, [=]() {
    if (so->grad.empty()) return;
    RowMatrix dy(cout, cols_n);
    for (std::int64_t co = 0; co < cout; ++co) {
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* src = so->grad.data() + (b * cout + co) * out_len;
        std::copy(src, src + out_len, dy.data() + co * cols_n + b * out_len);
      }
    }
    if (Wants(sb)) {
      auto gb = sb->EnsureGrad();
      for (std::int64_t co = 0; co < cout; ++co) gb[co] += dy.row(co).sum();
    }
    if (Wants(sw)) {
      MapRow(sw->EnsureGrad().data(), cout, rows).noalias() +=
          dy * ConstMapRow(cols->data(), rows, cols_n).transpose();
    }
    if (Wants(sx)) {
      RowMatrix dcols(rows, cols_n);
      dcols.noalias() =
          ConstMapRow(sw->data.data(), cout, rows).transpose() * dy;
      auto gx = sx->EnsureGrad();
      for (std::int64_t ci = 0; ci < cin; ++ci) {
        for (std::int64_t k = 0; k < ksize; ++k) {
          const double* row = dcols.data() + (ci * ksize + k) * cols_n;
          for (std::int64_t b = 0; b < batch; ++b) {
            double* gxrow = gx.data() + (b * cin + ci) * len;
            for (std::int64_t to = 0; to < out_len; ++to) {
              const std::int64_t ti = to * stride - padding + k;
              if (ti >= 0 && ti < len) gxrow[ti] += row[b * out_len + to];
            }
          }
        }
      }
    }
  });
  return result;
}

Tensor TransposedConv1d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, int stride, int padding) {
  const OpKind kind = OpKind::kTransposedConv1d;
  if (x.rank() != 3) RankError(kind, x.shape(), "input [B, Cin, T]");
  if (weight.rank() != 3) RankError(kind, weight.shape(), "weight [Cin, Cout, K]");
  const std::int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::int64_t cout = weight.dim(1), ksize = weight.dim(2);
  if (weight.dim(0) != cin) ShapeError(kind, x.shape(), weight.shape(), "channels");
  if (bias.defined() && bias.shape() != Shape{cout}) {
    ShapeError(kind, weight.shape(), bias.shape(), "bias");
  }
  const std::int64_t out_len = (len - 1) * stride - 2 * padding + ksize;
  if (out_len <= 0) ShapeError(kind, x.shape(), weight.shape(), "too short");
  const std::int64_t cols_n = batch * len, rows = cout * ksize;
  // xm[ci, (b, ti)]
  auto xm = std::make_shared<std::vector<double>>(cin * cols_n);
  const double* xd = x.data().data();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t ci = 0; ci < cin; ++ci) {
      std::copy(xd + (b * cin + ci) * len, xd + (b * cin + ci + 1) * len,
                xm->data() + ci * cols_n + b * len);
    }
  }
  RowMatrix c(rows, cols_n);
  c.noalias() = ConstMapRow(weight.data().data(), cin, rows).transpose() *
                ConstMapRow(xm->data(), cin, cols_n);
  std::vector<double> out(batch * cout * out_len, 0.0);
  for (std::int64_t co = 0; co < cout; ++co) {
    for (std::int64_t k = 0; k < ksize; ++k) {
      const double* row = c.data() + (co * ksize + k) * cols_n;
      for (std::int64_t b = 0; b < batch; ++b) {
        double* dst = out.data() + (b * cout + co) * out_len;
        for (std::int64_t ti = 0; ti < len; ++ti) {
          const std::int64_t to = ti * stride - padding + k;
          if (to >= 0 && to < out_len) dst[to] += row[b * len + ti];
        }
      }
    }
  }
  if (bias.defined()) {
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t co = 0; co < cout; ++co) {
        double* dst = out.data() + (b * cout + co) * out_len;
        for (std::int64_t to = 0; to < out_len; ++to) dst[to] += bias.at(co);
      }
    }
  }
  Tensor result({batch, cout, out_len}, std::move(out));
  StoragePtr sx = x.shared_storage(), sw = weight.shared_storage();
  StoragePtr sb = bias.defined() ? bias.shared_storage() : nullptr;
  StoragePtr so = result.shared_storage();
  Tensor inputs_bias = bias.defined() ? bias : Tensor::Zeros({0});
  Record(kind, {x, weight, inputs_bias}, result, [=]() {
    if (so->grad.empty()) return;
    const double* g = so->grad.data();
    if (Wants(sb)) {
      auto gb = sb->EnsureGrad();
      for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t co = 0; co < cout; ++co) {
          const double* src = g + (b * cout + co) * out_len;
          for (std::int64_t to = 0; to < out_len; ++to) gb[co] += src[to];
        }
      }
    }
    RowMatrix dc = RowMatrix::Zero(rows, cols_n);
    for (std::int64_t co = 0; co < cout; ++co) {
      for (std::int64_t k = 0; k < ksize; ++k) {
        double* row = dc.data() + (co * ksize + k) * cols_n;
        for (std::int64_t b = 0; b < batch; ++b) {
          const double* src = g + (b * cout + co) * out_len;
          for (std::int64_t ti = 0; ti < len; ++ti) {
            const std::int64_t to = ti * stride - padding + k;
            if (to >= 0 && to < out_len) row[b * len + ti] = src[to];
          }
        }
      }
    }
    if (Wants(sw)) {
      MapRow(sw->EnsureGrad().data(), cin, rows).noalias() +=
          ConstMapRow(xm->data(), cin, cols_n) * dc.transpose();
    }
    if (Wants(sx)) {
      RowMatrix dxm(cin, cols_n);
      dxm.noalias() = ConstMapRow(sw->data.data(), cin, rows) * dc;
      auto gx = sx->EnsureGrad();
      for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          double* dst = gx.data() + (b * cin + ci) * len;
          const double* src = dxm.data() + ci * cols_n + b * len;
          for (std::int64_t ti = 0; ti < len; ++ti) dst[ti] += src[ti];
        }
      }
    }
  });
  return result;
}

Tensor GroupNorm(const Tensor& x, int groups, const Tensor& gamma,
                 const Tensor& beta, double eps) {
  const OpKind kind = OpKind::kGroupNorm;
  if (x.rank() < 2) RankError(kind, x.shape(), "input [B, C, ...]");
  const std::int64_t batch = x.dim(0), channels = x.dim(1);
  if (groups <= 0 || channels % groups != 0) {
    throw std::invalid_argument("group-normalization: channels " +
                                std::to_string(channels) +
                                " not divisible by groups " +
                                std::to_string(groups));
  }
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    ShapeError(kind, x.shape(), gamma.shape(), "affine parameters");
  }
  const std::int64_t spatial = x.numel() / (batch * channels);
  const std::int64_t per_group = channels / groups;
  const std::int64_t group_size = per_group * spatial;
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(batch * groups);
  const double* xd = x.data().data();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t g = 0; g < groups; ++g) {
      const std::int64_t off = (b * channels + g * per_group) * spatial;
      double mean = 0.0;
      for (std::int64_t i = 0; i < group_size; ++i) mean += xd[off + i];
      mean /= static_cast<double>(group_size);
      double var = 0.0;
      for (std::int64_t i = 0; i < group_size; ++i) {
        const double d = xd[off + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(group_size);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[b * groups + g] = is;
      for (std::int64_t i = 0; i < group_size; ++i) {
        (*xhat)[off + i] = (xd[off + i] - mean) * is;
      }
    }
  }
  std::vector<double> out(x.numel());
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const std::int64_t off = (b * channels + c) * spatial;
      const double ga = gamma.at(c), be = beta.at(c);
      for (std::int64_t s = 0; s < spatial; ++s) {
        out[off + s] = (*xhat)[off + s] * ga + be;
      }
    }
  }
  Tensor result(x.shape(), std::move(out));
  StoragePtr sx = x.shared_storage(), sg = gamma.shared_storage();
  StoragePtr sb = beta.shared_storage(), so = result.shared_storage();
  Record(kind, {x, gamma, beta}, result, [=]() {
    if (so->grad.empty()) return;
    const double* dy = so->grad.data();
    if (Wants(sg) || Wants(sb)) {
      for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t c = 0; c < channels; ++c) {
          const std::int64_t off = (b * channels + c) * spatial;
          double dg = 0.0, db = 0.0;
          for (std::int64_t s = 0; s < spatial; ++s) {
            dg += dy[off + s] * (*xhat)[off + s];
            db += dy[off + s];
          }
          if (Wants(sg)) sg->EnsureGrad()[c] += dg;
          if (Wants(sb)) sb->EnsureGrad()[c] += db;
        }
      }
    }
    if (!Wants(sx)) return;
    auto gx = sx->EnsureGrad();
    std::vector<double> dxhat(group_size);
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t g = 0; g < groups; ++g) {
        const std::int64_t off = (b * channels + g * per_group) * spatial;
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::int64_t i = 0; i < group_size; ++i) {
          const std::int64_t c = g * per_group + i / spatial;
          dxhat[i] = dy[off + i] * sg->data[c];
          mean_d += dxhat[i];
          mean_dx += dxhat[i] * (*xhat)[off + i];
        }
        mean_d /= static_cast<double>(group_size);
        mean_dx /= static_cast<double>(group_size);
        const double is = (*inv_std)[b * groups + g];
        for (std::int64_t i = 0; i < group_size; ++i) {
          gx[off + i] +=
              is * (dxhat[i] - mean_d - (*xhat)[off + i] * mean_dx);
        }
      }
    }
  });
  return result;
}

Tensor Mish(const Tensor& x) {
  const std::int64_t n = x.numel();
  using Array = Eigen::Array<double, Eigen::Dynamic, 1>;
  Eigen::Map<const Array> xv(x.data().data(), n);
  // With e = exp(x): tanh(softplus(x)) = (e^2 + 2e) / (e^2 + 2e + 2). Above
  // the cutoff softplus(x) = x and the ratio is 1 in double precision.
  auto e = std::make_shared<Array>(xv.min(20.0).exp());
  Array num = e->square() + 2.0 * (*e);
  Array th = (xv > 20.0).select(Array::Ones(n), num / (num + 2.0));
  std::vector<double> out(n);
  Eigen::Map<Array>(out.data(), n) = xv * th;
  Tensor result(x.shape(), std::move(out));
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(OpKind::kMish, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    Eigen::Map<const Array> v(sx->data.data(), n);
    Eigen::Map<const Array> dy(so->grad.data(), n);
    const Array num2 = e->square() + 2.0 * (*e);
    const Array t = (v > 20.0).select(Array::Ones(n), num2 / (num2 + 2.0));
    const Array sig = *e / (1.0 + *e);
    Eigen::Map<Array>(sx->EnsureGrad().data(), n) +=
        dy * (t + v * (1.0 - t.square()) * sig);
  });
  return result;
}

Tensor Softmax(const Tensor& x, int axis) {
  axis = NormalizeAxis(OpKind::kSoftmax, axis, x.rank());
  const AxisSplit sp = SplitAt(x.shape(), axis);
  std::vector<double> out(x.numel());
  const double* xd = x.data().data();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.extent * sp.inner + in;
      double mx = -INFINITY;
      for (std::int64_t j = 0; j < sp.extent; ++j) {
        mx = std::max(mx, xd[base + j * sp.inner]);
      }
      double z = 0.0;
      for (std::int64_t j = 0; j < sp.extent; ++j) {
        const double e = std::exp(xd[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        z += e;
      }
      for (std::int64_t j = 0; j < sp.extent; ++j) out[base + j * sp.inner] /= z;
    }
  }
  Tensor result(x.shape(), std::move(out));
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(OpKind::kSoftmax, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto gx = sx->EnsureGrad();
    const double* y = so->data.data();
    const double* dy = so->grad.data();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      for (std::int64_t in = 0; in < sp.inner; ++in) {
        const std::int64_t base = o * sp.extent * sp.inner + in;
        double dot = 0.0;
        for (std::int64_t j = 0; j < sp.extent; ++j) {
          dot += y[base + j * sp.inner] * dy[base + j * sp.inner];
        }
        for (std::int64_t j = 0; j < sp.extent; ++j) {
          const std::int64_t i = base + j * sp.inner;
          gx[i] += y[i] * (dy[i] - dot);
        }
      }
    }
  });
  return result;
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const OpKind kind = OpKind::kLinear;
  if (x.rank() < 1 || weight.rank() != 2) {
    ShapeError(kind, x.shape(), weight.shape(), "need [..., in] and [out, in]");
  }
  const std::int64_t in = x.dim(-1), out_f = weight.dim(0);
  if (weight.dim(1) != in) ShapeError(kind, x.shape(), weight.shape(), "features");
  if (bias.defined() && bias.shape() != Shape{out_f}) {
    ShapeError(kind, weight.shape(), bias.shape(), "bias");
  }
  const std::int64_t rows = x.numel() / std::max<std::int64_t>(in, 1);
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  std::vector<double> out(rows * out_f);
  MapRow y(out.data(), rows, out_f);
  y.noalias() = ConstMapRow(x.data().data(), rows, in) *
                ConstMapRow(weight.data().data(), out_f, in).transpose();
  if (bias.defined()) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out_f);
  }
  Tensor result(out_shape, std::move(out));
  StoragePtr sx = x.shared_storage(), sw = weight.shared_storage();
  StoragePtr sb = bias.defined() ? bias.shared_storage() : nullptr;
  StoragePtr so = result.shared_storage();
  Tensor inputs_bias = bias.defined() ? bias : Tensor::Zeros({0});
  Record(kind, {x, weight, inputs_bias}, result, [=]() {
    if (so->grad.empty()) return;
    ConstMapRow dy(so->grad.data(), rows, out_f);
    if (Wants(sx)) {
      MapRow(sx->EnsureGrad().data(), rows, in).noalias() +=
          dy * ConstMapRow(sw->data.data(), out_f, in);
    }
    if (Wants(sw)) {
      MapRow(sw->EnsureGrad().data(), out_f, in).noalias() +=
          dy.transpose() * ConstMapRow(sx->data.data(), rows, in);
    }
    if (Wants(sb)) {
      // Fixed row order; Eigen's column reduction depends on buffer alignment.
      auto gb = sb->EnsureGrad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = so->grad.data() + r * out_f;
        for (std::int64_t o = 0; o < out_f; ++o) gb[o] += row[o];
      }
    }
  });
  return result;
}

Tensor Concat(std::span<const Tensor> inputs, int axis) {
  const OpKind kind = OpKind::kConcat;
  if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = inputs[0].shape();
  axis = NormalizeAxis(kind, axis, static_cast<int>(first.size()));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : inputs) {
    if (t.rank() != static_cast<int>(first.size())) {
      ShapeError(kind, first, t.shape(), "rank");
    }
    for (int i = 0; i < t.rank(); ++i) {
      if (i != axis && t.shape()[i] != first[i]) ShapeError(kind, first, t.shape());
    }
    out_shape[axis] += t.shape()[axis];
  }
  const AxisSplit osp = SplitAt(out_shape, axis);
  std::vector<double> out(NumElements(out_shape));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const Tensor& t : inputs) {
    offsets.push_back(offset);
    const std::int64_t chunk = t.shape()[axis] * osp.inner;
    const double* src = t.data().data();
    for (std::int64_t o = 0; o < osp.outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk,
                out.data() + o * osp.extent * osp.inner + offset * osp.inner);
    }
    offset += t.shape()[axis];
  }
  Tensor result(out_shape, std::move(out));
  std::vector<StoragePtr> ins;
  for (const Tensor& t : inputs) ins.push_back(t.shared_storage());
  StoragePtr so = result.shared_storage();
  Tape::Current().Record(kind, inputs, result, [=]() {
    if (so->grad.empty()) return;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!Wants(ins[k])) continue;
      auto g = ins[k]->EnsureGrad();
      const std::int64_t chunk = ins[k]->shape[axis] * osp.inner;
      for (std::int64_t o = 0; o < osp.outer; ++o) {
        const double* src =
            so->grad.data() + o * osp.extent * osp.inner + offsets[k] * osp.inner;
        for (std::int64_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
      }
    }
  });
  return result;
}

Tensor Slice(const Tensor& x, int axis, std::int64_t start,
             std::int64_t length) {
  const OpKind kind = OpKind::kSlice;
  axis = NormalizeAxis(kind, axis, x.rank());
  if (start < 0 || length < 0 || start + length > x.dim(axis)) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) +
                                ", " + std::to_string(start + length) +
                                ") outside axis of shape " +
                                ShapeString(x.shape()));
  }
  const AxisSplit sp = SplitAt(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(NumElements(out_shape));
  const std::int64_t chunk = length * sp.inner;
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    const double* src = x.data().data() + (o * sp.extent + start) * sp.inner;
    std::copy(src, src + chunk, out.data() + o * chunk);
  }
  Tensor result(out_shape, std::move(out));
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(kind, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto g = sx->EnsureGrad();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      double* dst = g.data() + (o * sp.extent + start) * sp.inner;
      for (std::int64_t i = 0; i < chunk; ++i) dst[i] += so->grad[o * chunk + i];
    }
  });
  return result;
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    ShapeError(OpKind::kReshape, x.shape(), shape, "element count");
  }
  Tensor result(std::move(shape), x.values());
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(OpKind::kReshape, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto g = sx->EnsureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i];
  });
  return result;
}

Tensor Permute(const Tensor& x, std::vector<int> perm) {
  const OpKind kind = OpKind::kPermute;
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) {
    RankError(kind, x.shape(), "permutation of matching rank");
  }
  std::vector<bool> seen(r, false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[p]) RankError(kind, x.shape(), "valid permutation");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = x.shape()[perm[i]];
  std::vector<std::int64_t> in_strides(r, 1);
  for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * x.shape()[i + 1];
  // Stride in the input for each output axis.
  std::vector<std::int64_t> src_stride(r);
  for (int i = 0; i < r; ++i) src_stride[i] = in_strides[perm[i]];
  const std::int64_t n = x.numel();
  // map[out_flat] = in_flat
  auto map = std::make_shared<std::vector<std::int64_t>>(n);
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < n; ++o) {
    (*map)[o] = src;
    for (int a = r - 1; a >= 0; --a) {
      ++idx[a];
      src += src_stride[a];
      if (idx[a] < out_shape[a]) break;
      src -= src_stride[a] * idx[a];
      idx[a] = 0;
    }
  }
  std::vector<double> out(n);
  const double* xd = x.data().data();
  for (std::int64_t o = 0; o < n; ++o) out[o] = xd[(*map)[o]];
  Tensor result(out_shape, std::move(out));
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(kind, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto g = sx->EnsureGrad();
    for (std::int64_t o = 0; o < n; ++o) g[(*map)[o]] += so->grad[o];
  });
  return result;
}

Tensor Expand(const Tensor& x, int axis, std::int64_t n) {
  const OpKind kind = OpKind::kExpand;
  if (axis < 0) axis += x.rank() + 1;
  if (axis < 0 || axis > x.rank() || n < 0) {
    RankError(kind, x.shape(), "axis within [0, rank] and n >= 0");
  }
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + axis, n);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis; i < x.rank(); ++i) inner *= x.shape()[i];
  std::vector<double> out(outer * n * inner);
  const double* xd = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t j = 0; j < n; ++j) {
      std::copy(xd + o * inner, xd + (o + 1) * inner,
                out.data() + (o * n + j) * inner);
    }
  }
  Tensor result(out_shape, std::move(out));
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(kind, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto g = sx->EnsureGrad();
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t j = 0; j < n; ++j) {
        const double* src = so->grad.data() + (o * n + j) * inner;
        for (std::int64_t i = 0; i < inner; ++i) g[o * inner + i] += src[i];
      }
    }
  });
  return result;
}

Tensor Mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) ShapeError(OpKind::kMse, a.shape(), b.shape());
  const std::int64_t n = a.numel();
  if (n == 0) throw std::invalid_argument("mse: empty tensors");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = a.at(i) - b.at(i);
    acc += d * d;
  }
  Tensor result = Tensor::Scalar(acc / static_cast<double>(n));
  StoragePtr sa = a.shared_storage(), sb = b.shared_storage();
  StoragePtr so = result.shared_storage();
  Record(OpKind::kMse, {a, b}, result, [=]() {
    if (so->grad.empty()) return;
    const double s = 2.0 * so->grad[0] / static_cast<double>(n);
    if (Wants(sa)) {
      auto g = sa->EnsureGrad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += s * (sa->data[i] - sb->data[i]);
    }
    if (Wants(sb)) {
      auto g = sb->EnsureGrad();
      for (std::int64_t i = 0; i < n; ++i) g[i] -= s * (sa->data[i] - sb->data[i]);
    }
  });
  return result;
}

namespace {

Tensor Reduce(const Tensor& x, bool mean) {
  const std::int64_t n = x.numel();
  double acc = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  const double scale = mean ? 1.0 / static_cast<double>(std::max<std::int64_t>(n, 1)) : 1.0;
  Tensor result = Tensor::Scalar(acc * scale);
  StoragePtr sx = x.shared_storage(), so = result.shared_storage();
  Record(mean ? OpKind::kMean : OpKind::kSum, {x}, result, [=]() {
    if (so->grad.empty() || !Wants(sx)) return;
    auto g = sx->EnsureGrad();
    const double d = so->grad[0] * scale;
    for (double& v : g) v += d;
  });
  return result;
}

}  // namespace

Tensor Sum(const Tensor& x) { return Reduce(x, false); }
Tensor Mean(const Tensor& x) { return Reduce(x, true); }

Tensor TimeEmbedding(const Tensor& t, int dim, double scale) {
  const OpKind kind = OpKind::kTimeEmbedding;
  if (t.rank() != 1) RankError(kind, t.shape(), "times [B]");
  if (dim < 4 || dim % 2 != 0) {
    throw std::invalid_argument(
        "sinusoidal-time-embedding: dim must be even and >= 4");
  }
  const std::int64_t batch = t.dim(0);
  const int half = dim / 2;
  auto freq = std::make_shared<std::vector<double>>(half);
  for (int k = 0; k < half; ++k) {
    (*freq)[k] = scale * std::exp(-std::log(10000.0) * k / (half - 1));
  }
  std::vector<double> out(batch * dim);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (int k = 0; k < half; ++k) {
      const double a = t.at(b) * (*freq)[k];
      out[b * dim + k] = std::sin(a);
      out[b * dim + half + k] = std::cos(a);
    }
  }
  Tensor result({batch, dim}, std::move(out));
  StoragePtr st = t.shared_storage(), so = result.shared_storage();
  Record(kind, {t}, result, [=]() {
    if (so->grad.empty() || !Wants(st)) return;
    auto g = st->EnsureGrad();
    for (std::int64_t b = 0; b < batch; ++b) {
      double acc = 0.0;
      for (int k = 0; k < half; ++k) {
        const double f = (*freq)[k];
        const double a = st->data[b] * f;
        acc += so->grad[b * dim + k] * f * std::cos(a) -
               so->grad[b * dim + half + k] * f * std::sin(a);
      }
      g[b] += acc;
    }
  });
  return result;
}

Tensor MultiHeadAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                          int heads, std::vector<double>* weights) {
  const OpKind kind = OpKind::kAttention;
  if (q.rank() != 3) RankError(kind, q.shape(), "queries [G, N, F]");
  if (k.shape() != q.shape()) ShapeError(kind, q.shape(), k.shape(), "keys");
  if (v.shape() != q.shape()) ShapeError(kind, q.shape(), v.shape(), "values");
  const std::int64_t groups = q.dim(0), n = q.dim(1), width = q.dim(2);
  if (heads <= 0 || width % heads != 0) {
    throw std::invalid_argument("multi-head-attention: width " +
                                std::to_string(width) +
                                " not divisible by heads " +
                                std::to_string(heads));
  }
  const std::int64_t dk = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  auto probs = std::make_shared<std::vector<double>>(groups * heads * n * n);
  std::vector<double> out(q.numel(), 0.0);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (std::int64_t g = 0; g < groups; ++g) {
    const std::int64_t base = g * n * width;
    for (std::int64_t h = 0; h < heads; ++h) {
      double* p = probs->data() + (g * heads + h) * n * n;
      for (std::int64_t i = 0; i < n; ++i) {
        const double* qi = qd + base + i * width + h * dk;
        double mx = -INFINITY;
        for (std::int64_t j = 0; j < n; ++j) {
          const double* kj = kd + base + j * width + h * dk;
          double s = 0.0;
          for (std::int64_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
          p[i * n + j] = s * scale;
          mx = std::max(mx, p[i * n + j]);
        }
        double z = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
          p[i * n + j] = std::exp(p[i * n + j] - mx);
          z += p[i * n + j];
        }
        double* oi = out.data() + base + i * width + h * dk;
        for (std::int64_t j = 0; j < n; ++j) {
          p[i * n + j] /= z;
          const double* vj = vd + base + j * width + h * dk;
          for (std::int64_t c = 0; c < dk; ++c) oi[c] += p[i * n + j] * vj[c];
        }
      }
    }
  }
  if (weights != nullptr) *weights = *probs;
  Tensor result(q.shape(), std::move(out));
  StoragePtr sq = q.shared_storage(), sk = k.shared_storage();
  StoragePtr sv = v.shared_storage(), so = result.shared_storage();
  Record(kind, {q, k, v}, result, [=]() {
    if (so->grad.empty()) return;
    double* gq = Wants(sq) ? sq->EnsureGrad().data() : nullptr;
    double* gk = Wants(sk) ? sk->EnsureGrad().data() : nullptr;
    double* gv = Wants(sv) ? sv->EnsureGrad().data() : nullptr;
    const double* dy = so->grad.data();
    std::vector<double> dp(n * n);
    for (std::int64_t g = 0; g < groups; ++g) {
      const std::int64_t base = g * n * width;
      for (std::int64_t h = 0; h < heads; ++h) {
        const double* p = probs->data() + (g * heads + h) * n * n;
        // dV = P^T dO and dP = dO V^T.
        for (std::int64_t i = 0; i < n; ++i) {
          const double* dyi = dy + base + i * width + h * dk;
          for (std::int64_t j = 0; j < n; ++j) {
            const double* vj = sv->data.data() + base + j * width + h * dk;
            double acc = 0.0;
            for (std::int64_t c = 0; c < dk; ++c) acc += dyi[c] * vj[c];
            dp[i * n + j] = acc;
            if (gv) {
              double* gvj = gv + base + j * width + h * dk;
              for (std::int64_t c = 0; c < dk; ++c) gvj[c] += p[i * n + j] * dyi[c];
            }
          }
        }
        // dS = P * (dP - rowsum(P * dP)), then through the scaled products.
        for (std::int64_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::int64_t j = 0; j < n; ++j) dot += p[i * n + j] * dp[i * n + j];
          const double* qi = sq->data.data() + base + i * width + h * dk;
          for (std::int64_t j = 0; j < n; ++j) {
            const double ds = p[i * n + j] * (dp[i * n + j] - dot) * scale;
            const double* kj = sk->data.data() + base + j * width + h * dk;
            if (gq) {
              double* gqi = gq + base + i * width + h * dk;
              for (std::int64_t c = 0; c < dk; ++c) gqi[c] += ds * kj[c];
            }
            if (gk) {
              double* gkj = gk + base + j * width + h * dk;
              for (std::int64_t c = 0; c < dk; ++c) gkj[c] += ds * qi[c];
            }
          }
        }
      }
    }
  });
  return result;
}

Tensor StopGradient(const Tensor& x) {
  Tensor result(x.shape(), x.values());
  Record(OpKind::kStopGradient, {x}, result, []() {});
  auto* s = result.storage();
  s->requires_grad = false;
  s->node = -1;
  return result;
}

}  // namespace coflow::ops
