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

#include "support/op_suite.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "coflow/gradcheck.h"
#include "coflow/ops.h"
#include "coflow/random.h"

namespace coflow::testing {
namespace {

using Inputs = std::vector<Tensor>;

// Contracts the output with fixed random weights so every component of the
// output gradient is distinct.
Tensor Contract(const Tensor& out, const Tensor& weights) {
  return ops::Sum(ops::Mul(out, weights));
}

struct Case {
  ScalarFunction f;
  Inputs inputs;
};

std::int64_t Int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return rng.UniformInt(lo, hi);
}

Case MakeCase(OpKind kind, Rng& rng) {
  auto normal = [&](const Shape& s) { return RandomNormal(s, rng, 1.0, true); };
  auto weights = [&](const Shape& s) { return RandomNormal(s, rng); };
  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      Shape s{Int(rng, 1, 4), Int(rng, 1, 5)};
      // Every third trial exercises scalar broadcast on one side.
      const bool scalar_b = rng.Bernoulli(0.34);
      Tensor a = normal(s), b = scalar_b ? normal({}) : normal(s);
      Tensor w = weights(s);
      auto op = kind == OpKind::kAdd   ? ops::Add
                : kind == OpKind::kSub ? ops::Sub
                                       : ops::Mul;
      return {[=](const Inputs& in) { return Contract(op(in[0], in[1]), w); },
              {a, b}};
    }
    case OpKind::kScalarMul: {
      Shape s{Int(rng, 1, 6), Int(rng, 1, 3)};
      const double c = rng.Uniform(-2.0, 2.0);
      Tensor w = weights(s);
      return {[=](const Inputs& in) {
                return Contract(ops::ScalarMul(in[0], c), w);
              },
              {normal(s)}};
    }
    case OpKind::kMatmul: {
      const std::int64_t m = Int(rng, 1, 4), k = Int(rng, 1, 4),
                         n = Int(rng, 1, 4);
      if (rng.Bernoulli(0.5)) {
        const std::int64_t g = Int(rng, 1, 3);
        Tensor w = weights({g, m, n});
        return {[=](const Inputs& in) {
                  return Contract(ops::Matmul(in[0], in[1]), w);
                },
                {normal({g, m, k}), normal({g, k, n})}};
      }
      Tensor w = weights({m, n});
      return {[=](const Inputs& in) {
                return Contract(ops::Matmul(in[0], in[1]), w);
              },
              {normal({m, k}), normal({k, n})}};
    }
    case OpKind::kConv1d:
    case OpKind::kStridedConv1d: {
      const std::int64_t b = Int(rng, 1, 2), cin = Int(rng, 1, 3),
                         cout = Int(rng, 1, 3), t = Int(rng, 6, 10);
      const int ksize = kind == OpKind::kConv1d ? 5 : 3;
      const int stride = kind == OpKind::kConv1d ? 1 : 2;
      const int pad = kind == OpKind::kConv1d ? 2 : 1;
      const std::int64_t tout = (t + 2 * pad - ksize) / stride + 1;
      Tensor w = weights({b, cout, tout});
      return {[=](const Inputs& in) {
                return Contract(ops::Conv1d(in[0], in[1], in[2], stride, pad),
                                w);
              },
              {normal({b, cin, t}), normal({cout, cin, ksize}),
               normal({cout})}};
    }
    case OpKind::kTransposedConv1d: {
      const std::int64_t b = Int(rng, 1, 2), cin = Int(rng, 1, 3),
                         cout = Int(rng, 1, 3), t = Int(rng, 2, 6);
      const std::int64_t tout = (t - 1) * 2 - 2 + 4;
      Tensor w = weights({b, cout, tout});
      return {[=](const Inputs& in) {
                return Contract(
                    ops::TransposedConv1d(in[0], in[1], in[2], 2, 1), w);
              },
              {normal({b, cin, t}), normal({cin, cout, 4}), normal({cout})}};
    }
    case OpKind::kGroupNorm: {
      const int groups = static_cast<int>(Int(rng, 1, 3));
      const std::int64_t c = groups * Int(rng, 1, 3), b = Int(rng, 1, 2),
                         t = Int(rng, 2, 5);
      Tensor w = weights({b, c, t});
      return {[=](const Inputs& in) {
                return Contract(ops::GroupNorm(in[0], groups, in[1], in[2]),
                                w);
              },
              {normal({b, c, t}), normal({c}), normal({c})}};
    }
    case OpKind::kMish: {
      Shape s{Int(rng, 1, 4), Int(rng, 1, 6)};
      Tensor x = RandomNormal(s, rng, 3.0, true);
      Tensor w = weights(s);
      return {[=](const Inputs& in) { return Contract(ops::Mish(in[0]), w); },
              {x}};
    }
    case OpKind::kSoftmax: {
      Shape s{Int(rng, 1, 3), Int(rng, 1, 4), Int(rng, 1, 3)};
      const int axis = static_cast<int>(Int(rng, 0, 2));
      Tensor w = weights(s);
      return {[=](const Inputs& in) {
                return Contract(ops::Softmax(in[0], axis), w);
              },
              {normal(s)}};
    }
    case OpKind::kLinear: {
      const std::int64_t rows = Int(rng, 1, 3), extra = Int(rng, 1, 2),
                         in_f = Int(rng, 1, 5), out_f = Int(rng, 1, 4);
      Tensor w = weights({rows, extra, out_f});
      return {[=](const Inputs& in) {
                return Contract(ops::Linear(in[0], in[1], in[2]), w);
              },
              {normal({rows, extra, in_f}), normal({out_f, in_f}),
               normal({out_f})}};
    }
    case OpKind::kConcat: {
      const std::int64_t a0 = Int(rng, 1, 3), a1 = Int(rng, 1, 3);
      const int axis = static_cast<int>(Int(rng, 0, 1));
      Shape s1{a0, a1}, s2{a0, a1};
      s2[axis] = Int(rng, 1, 3);
      Shape so = s1;
      so[axis] += s2[axis];
      Tensor w = weights(so);
      return {[=](const Inputs& in) {
                const Tensor parts[] = {in[0], in[1]};
                return Contract(ops::Concat(parts, axis), w);
              },
              {normal(s1), normal(s2)}};
    }
    case OpKind::kSlice: {
      Shape s{Int(rng, 1, 3), Int(rng, 2, 6)};
      const int axis = 1;
      const std::int64_t start = Int(rng, 0, s[1] - 1);
      const std::int64_t len = Int(rng, 1, s[1] - start);
      Tensor w = weights({s[0], len});
      return {[=](const Inputs& in) {
                return Contract(ops::Slice(in[0], axis, start, len), w);
              },
              {normal(s)}};
    }
    case OpKind::kReshape: {
      const std::int64_t a = Int(rng, 1, 4), b = Int(rng, 1, 4);
      Tensor w = weights({b, a});
      return {[=](const Inputs& in) {
                return Contract(ops::Reshape(in[0], {b, a}), w);
              },
              {normal({a, b})}};
    }
    case OpKind::kPermute: {
      Shape s{Int(rng, 1, 3), Int(rng, 1, 3), Int(rng, 1, 3)};
      std::vector<int> perm{0, 1, 2};
      std::shuffle(perm.begin(), perm.end(), rng.engine());
      Shape so{s[perm[0]], s[perm[1]], s[perm[2]]};
      Tensor w = weights(so);
      return {[=](const Inputs& in) {
                return Contract(ops::Permute(in[0], perm), w);
              },
              {normal(s)}};
    }
    case OpKind::kExpand: {
      Shape s{Int(rng, 1, 3), Int(rng, 1, 3)};
      const int axis = static_cast<int>(Int(rng, 0, 2));
      const std::int64_t n = Int(rng, 1, 3);
      Shape so = s;
      so.insert(so.begin() + axis, n);
      Tensor w = weights(so);
      return {[=](const Inputs& in) {
                return Contract(ops::Expand(in[0], axis, n), w);
              },
              {normal(s)}};
    }
    case OpKind::kMse: {
      Shape s{Int(rng, 1, 4), Int(rng, 1, 4)};
      return {[](const Inputs& in) { return ops::Mse(in[0], in[1]); },
              {normal(s), normal(s)}};
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      Shape s{Int(rng, 1, 4), Int(rng, 1, 4)};
      // Square first so the gradient depends on the input.
      auto reduce = kind == OpKind::kSum ? ops::Sum : ops::Mean;
      return {[=](const Inputs& in) { return reduce(ops::Mul(in[0], in[0])); },
              {normal(s)}};
    }
    case OpKind::kTimeEmbedding: {
      const std::int64_t b = Int(rng, 1, 4);
      const int dim = 2 * static_cast<int>(Int(rng, 2, 6));
      const double scale = rng.Uniform(1.0, 50.0);
      Tensor w = weights({b, dim});
      return {[=](const Inputs& in) {
                return Contract(ops::TimeEmbedding(in[0], dim, scale), w);
              },
              {RandomUniform({b}, rng, 0.0, 1.0, true)}};
    }
    case OpKind::kAttention: {
      const int heads = static_cast<int>(Int(rng, 1, 3));
      const std::int64_t g = Int(rng, 1, 3), n = Int(rng, 1, 4),
                         f = heads * Int(rng, 1, 3);
      Tensor w = weights({g, n, f});
      return {[=](const Inputs& in) {
                return Contract(
                    ops::MultiHeadAttention(in[0], in[1], in[2], heads), w);
              },
              {normal({g, n, f}), normal({g, n, f}), normal({g, n, f})}};
    }
    default:
      throw std::invalid_argument(std::string("no gradcheck case for ") +
                                  OpKindName(kind));
  }
}

// Stop-gradient is checked against its contract: the branch through it adds
// exactly zero to the input gradient.
bool StopGradientTrial(Rng& rng, std::string* detail) {
  Shape s{rng.UniformInt(1, 4), rng.UniformInt(1, 4)};
  Tensor x = RandomNormal(s, rng, 1.0, true);
  Tensor w = RandomNormal(s, rng), v = RandomNormal(s, rng);
  Tape::Current().Reset();
  Tensor sg = ops::StopGradient(x);
  if (sg.values() != x.values()) {
    *detail = "forward value differs from input";
    return false;
  }
  Tensor loss = ops::Add(Contract(sg, w), Contract(x, v));
  Backward(loss);
  if (x.grad() != v.values()) {
    *detail = "gradient leaked through stop-gradient";
    return false;
  }
  return true;
}

}  // namespace

std::vector<OpKind> SuiteKinds() {
  return {OpKind::kAdd,           OpKind::kSub,
          OpKind::kScalarMul,     OpKind::kMul,
          OpKind::kMatmul,        OpKind::kConv1d,
          OpKind::kStridedConv1d, OpKind::kTransposedConv1d,
          OpKind::kGroupNorm,     OpKind::kMish,
          OpKind::kSoftmax,       OpKind::kLinear,
          OpKind::kConcat,        OpKind::kSlice,
          OpKind::kReshape,       OpKind::kPermute,
          OpKind::kExpand,        OpKind::kMse,
          OpKind::kSum,           OpKind::kMean,
          OpKind::kTimeEmbedding, OpKind::kStopGradient,
          OpKind::kAttention};
}

OpSuiteResult RunOpSuite(OpKind kind, int trials, std::uint64_t seed,
                         double tol) {
  OpSuiteResult result;
  result.kind = kind;
  for (int i = 0; i < trials; ++i) {
    Rng rng(seed + static_cast<std::uint64_t>(i));
    ++result.trials;
    if (kind == OpKind::kStopGradient) {
      std::string detail;
      if (!StopGradientTrial(rng, &detail)) {
        ++result.failures;
        if (result.first_failure.empty()) {
          result.first_failure = "seed " + std::to_string(seed + i) + ": " + detail;
        }
      }
      continue;
    }
    Case c = MakeCase(kind, rng);
    GradCheckReport r = GradCheck(c.f, c.inputs, 1e-5, tol);
    if (!(r.max_rel_error <= result.max_rel_error)) {
      result.max_rel_error = r.max_rel_error;
    }
    if (!r.pass) {
      ++result.failures;
      if (result.first_failure.empty()) {
        result.first_failure = "seed " + std::to_string(seed + i) + ": " +
                               r.message + " at input " +
                               std::to_string(r.worst_input) + "[" +
                               std::to_string(r.worst_index) + "]";
      }
    }
  }
  return result;
}

}  // namespace coflow::testing
