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


#ifndef COFLOW_VELOCITY_MODEL_H_
#define COFLOW_VELOCITY_MODEL_H_

#include <cstdint>
#include <vector>

#include "coflow/nn.h"
#include "coflow/tensor.h"

namespace coflow {

// Batched conditioning for a joint velocity field. B is the batch size and
// N the agent count. Every field is optional.
struct Conditioning {
  // [B, N] normalized return-to-go in [0, 1].
  Tensor returns;
  // [B] 1 for an unconditional pass: the return embedding becomes the
  // learned null embedding.
  std::vector<std::uint8_t> drop;
  // [B, N, W, d] observation window per agent, oldest first. The window
  // occupies trajectory steps 0..W-1, so the current observation is at W-1.
  Tensor obs;
  // [B, N] 1 where the agent's observations are visible, 0 where masked.
  // Undefined means all visible.
  Tensor visible;

  std::int64_t batch() const;
  // Items [start, start + count) of every field.
  Conditioning Slice(std::int64_t start, std::int64_t count) const;
  // Same conditioning with drop set on every item.
  Conditioning Unconditional() const;
  bool Visible(std::int64_t b, std::int64_t agent) const;
};

// Concatenates two conditionings along the batch axis. Fields must be
// present in both or neither.
Conditioning ConcatBatch(const Conditioning& a, const Conditioning& b);

// Per-forward diagnostics.
struct ForwardDiagnostics {
  // Per CVA layer: N x N attention averaged over heads, tokens and batch.
  std::vector<std::vector<double>> attention;
  std::vector<double> gates;
  // Encoder skip shapes [B * N, F_l, T_l].
  std::vector<Shape> skip_shapes;
};

// u(z, r, t | cond). z: [B, N, H, d], r and t: [B]. Output has z's shape.
class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  virtual Tensor Forward(const Tensor& z, const Tensor& r, const Tensor& t,
                         const Conditioning& cond, double alpha_scale = 1.0,
                         ForwardDiagnostics* diag = nullptr) const = 0;
  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;
};

}  // namespace coflow

#endif  // COFLOW_VELOCITY_MODEL_H_
