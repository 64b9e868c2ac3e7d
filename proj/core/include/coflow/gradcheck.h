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

#ifndef COFLOW_GRADCHECK_H_
#define COFLOW_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coflow/tensor.h"

namespace coflow {

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  // Location of the worst component.
  int worst_input = -1;
  std::int64_t worst_index = -1;
  std::string message;
};

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares reverse-mode gradients of f with respect to every requires-grad
// input against central differences of step eps. The relative error of a
// component is |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Inputs are perturbed in place and restored.
GradCheckReport GradCheck(const ScalarFunction& f, std::vector<Tensor> inputs,
                          double eps = 1e-5, double tol = 1e-4,
                          double floor = 1e-3);

}  // namespace coflow

#endif  // COFLOW_GRADCHECK_H_
