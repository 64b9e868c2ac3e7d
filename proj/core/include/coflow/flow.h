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


#ifndef COFLOW_FLOW_H_
#define COFLOW_FLOW_H_

#include <vector>

#include "coflow/random.h"
#include "coflow/tensor.h"
#include "coflow/velocity_model.h"

namespace coflow {

struct TimePair {
  double r = 0.0;
  double t = 0.0;
};

struct FlowConfig {
  double flow_ratio = 0.5;  // probability of collapsing r to t
  double logit_normal_mu = 0.0;
  double logit_normal_sigma = 1.0;

  void Validate() const;
};

// Two logit-normal draws sorted so r <= t, then r = t with probability
// flow_ratio.
TimePair SampleTimePair(const FlowConfig& cfg, Rng& rng);

struct InterpolantSample {
  Tensor tau0;
  Tensor z1;
  std::vector<double> t;  // one per leading-axis item
  Tensor z_t;             // (1 - t) tau0 + t z1
  Tensor v_cond;          // z1 - tau0
};

// Single time for the whole tensor.
InterpolantSample Interpolate(const Tensor& tau0, const Tensor& z1, double t);
// One time per item of the leading axis.
InterpolantSample Interpolate(const Tensor& tau0, const Tensor& z1,
                              const std::vector<double>& t);

// V = u(z_t, 0, r) + (t - r) * sg[u(z_t, 0, t) - u(z_t, 0, r)], per item.
// Parameter gradients flow only through the u(z_t, 0, r) evaluation. Items
// with r == t reduce to u(z_t, 0, t).
Tensor FdSurrogate(const VelocityModel& net, const Tensor& z_t,
                   const std::vector<TimePair>& pairs,
                   const Conditioning& cond);

// Element-mean squared error.
Tensor VelocityLoss(const Tensor& v, const Tensor& v_cond);

// Regression of u(z_t, 0, t) directly on v_cond.
Tensor PlainFlowLoss(const VelocityModel& net, const InterpolantSample& sample,
                     const Conditioning& cond);

// [B] tensor of the given values.
Tensor TimeTensor(const std::vector<double>& values);

}  // namespace coflow

#endif  // COFLOW_FLOW_H_
