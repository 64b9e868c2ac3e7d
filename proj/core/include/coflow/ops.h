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

// Differentiable tensor operations. Every function records a backward rule
// on the thread's tape when an input requires grad. Only scalar-with-tensor
// broadcasting is supported; other alignment goes through Reshape, Permute,
// Expand and Concat.

#ifndef COFLOW_OPS_H_
#define COFLOW_OPS_H_

#include <span>
#include <vector>

#include "coflow/tensor.h"

namespace coflow::ops {

// Elementwise; either operand may be a single-element tensor.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor ScalarMul(const Tensor& a, double scale);

// [m,k] x [k,n] -> [m,n], or batched [g,m,k] x [g,k,n] -> [g,m,n].
Tensor Matmul(const Tensor& a, const Tensor& b);

// x: [B, Cin, T], weight: [Cout, Cin, K], bias: [Cout] or undefined.
// Stride 1 records conv1d; stride > 1 records strided-conv1d.
Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// x: [B, Cin, T], weight: [Cin, Cout, K], bias: [Cout] or undefined.
// Output length (T - 1) * stride - 2 * padding + K.
Tensor TransposedConv1d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, int stride, int padding);

// x: [B, C, ...]; statistics per (batch, group) over C/groups channels and
// all trailing positions. gamma, beta: [C].
Tensor GroupNorm(const Tensor& x, int groups, const Tensor& gamma,
                 const Tensor& beta, double eps = 1e-5);

Tensor Mish(const Tensor& x);
Tensor Softmax(const Tensor& x, int axis);

// x: [..., in], weight: [out, in], bias: [out] or undefined.
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor Concat(std::span<const Tensor> inputs, int axis);
Tensor Slice(const Tensor& x, int axis, std::int64_t start,
             std::int64_t length);
Tensor Reshape(const Tensor& x, Shape shape);
Tensor Permute(const Tensor& x, std::vector<int> perm);
// Inserts a new axis of extent n at `axis`, repeating the input along it.
Tensor Expand(const Tensor& x, int axis, std::int64_t n);

// Mean squared error over all elements.
Tensor Mse(const Tensor& a, const Tensor& b);
Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);

// t: [B] -> [B, dim] with [sin(t f_k), cos(t f_k)], f_k geometric from
// `scale` down to scale / 10000.
Tensor TimeEmbedding(const Tensor& t, int dim, double scale);

// Scaled dot-product attention within each group. q, k, v: [G, N, F] with
// F split into `heads` contiguous slices; returns [G, N, F]. When `weights`
// is non-null it receives the softmax weights laid out [G, heads, N, N].
Tensor MultiHeadAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                          int heads, std::vector<double>* weights = nullptr);

// Forward identity; contributes zero gradient to its input.
Tensor StopGradient(const Tensor& x);

double Softplus(double x);

}  // namespace coflow::ops

#endif  // COFLOW_OPS_H_
