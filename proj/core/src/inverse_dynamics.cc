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


#include "coflow/inverse_dynamics.h"

#include <array>
#include <stdexcept>

#include "coflow/ops.h"

namespace coflow {

InverseDynamics::InverseDynamics(std::int64_t obs_dim, std::int64_t hidden,
                                 std::int64_t action_dim, std::uint64_t seed)
    : obs_dim_(obs_dim), hidden_(hidden), action_dim_(action_dim) {
  if (obs_dim <= 0 || hidden <= 0 || action_dim <= 0) {
    throw std::invalid_argument("inverse dynamics: widths must be positive");
  }
  Rng rng(seed);
  l1_ = LinearLayer(params_, "l1", 2 * obs_dim, hidden, rng);
  l2_ = LinearLayer(params_, "l2", hidden, hidden, rng);
  l3_ = LinearLayer(params_, "l3", hidden, action_dim, rng);
}

Tensor InverseDynamics::operator()(const Tensor& o_now, const Tensor& o_next) const {
  if (o_now.rank() != 2 || o_now.shape() != o_next.shape() || o_now.dim(1) != obs_dim_) {
    throw std::invalid_argument("inverse dynamics: expected two [M, " +
                                std::to_string(obs_dim_) + "] inputs, got " +
                                ShapeString(o_now.shape()) + " and " +
                                ShapeString(o_next.shape()));
  }
  const std::array<Tensor, 2> pair{o_now, o_next};
  Tensor h = ops::Mish(l1_(ops::Concat(pair, 1)));
  h = ops::Mish(l2_(h));
  return l3_(h);
}

Tensor InverseDynamicsLoss(const InverseDynamics& head, const Tensor& o_now,
                           const Tensor& o_next, const Tensor& actions) {
  if (o_now.rank() != 2 || o_now.dim(0) == 0) {
    throw std::invalid_argument("inverse dynamics loss: needs at least one transition (horizon >= 2)");
  }
  return ops::Mse(head(o_now, o_next), actions);
}

}  // namespace coflow
