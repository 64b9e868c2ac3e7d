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


// Shared inverse-dynamics head: (o_t, o_{t+1}) -> a_t for every agent.

#ifndef COFLOW_INVERSE_DYNAMICS_H_
#define COFLOW_INVERSE_DYNAMICS_H_

#include <cstdint>

#include "coflow/nn.h"
#include "coflow/random.h"
#include "coflow/tensor.h"

namespace coflow {

// Three linear layers with mish between them. One parameter set serves all
// agents; rows of the input batch may come from any agent.
class InverseDynamics {
 public:
  InverseDynamics(std::int64_t obs_dim, std::int64_t hidden,
                  std::int64_t action_dim, std::uint64_t seed);

  // o_now, o_next: [M, obs_dim] -> [M, action_dim].
  Tensor operator()(const Tensor& o_now, const Tensor& o_next) const;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::int64_t obs_dim() const { return obs_dim_; }
  std::int64_t hidden() const { return hidden_; }
  std::int64_t action_dim() const { return action_dim_; }

 private:
  ParameterSet params_;
  LinearLayer l1_, l2_, l3_;
  std::int64_t obs_dim_, hidden_, action_dim_;
};

// Element-mean squared error between actions [M, action_dim] and the head's
// predictions. With equal transition counts per agent this equals the
// agent-averaged per-agent loss.
Tensor InverseDynamicsLoss(const InverseDynamics& head, const Tensor& o_now,
                           const Tensor& o_next, const Tensor& actions);

}  // namespace coflow

#endif  // COFLOW_INVERSE_DYNAMICS_H_
