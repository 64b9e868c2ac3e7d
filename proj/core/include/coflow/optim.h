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


// Adam optimizer, parameter EMA and gradient norms over a ParameterSet.

#ifndef COFLOW_OPTIM_H_
#define COFLOW_OPTIM_H_

#include <vector>

#include "coflow/nn.h"

namespace coflow {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParameterSet* params, const AdamConfig& config);
  // One bias-corrected update from the accumulated gradients. Entries
  // without a gradient are treated as zero-gradient.
  void Step();
  long steps() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  ParameterSet* params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long steps_ = 0;
};

// shadow <- decay * shadow + (1 - decay) * live, per parameter. Layouts must
// match.
void EmaUpdate(ParameterSet& shadow, const ParameterSet& live, double decay);

// L2 norm of every accumulated gradient.
double GlobalGradNorm(const ParameterSet& params);

// View that aliases the entries of several sets under name prefixes.
ParameterSet MergeParameters(
    const std::vector<std::pair<std::string, const ParameterSet*>>& parts);

}  // namespace coflow

#endif  // COFLOW_OPTIM_H_
