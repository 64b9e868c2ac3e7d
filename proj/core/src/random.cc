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

#include "coflow/random.h"

#include <vector>

namespace coflow {

Tensor RandomNormal(const Shape& shape, Rng& rng, double scale,
                    bool requires_grad) {
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = scale * rng.Normal();
  return Tensor(shape, std::move(v), requires_grad);
}

Tensor RandomUniform(const Shape& shape, Rng& rng, double lo, double hi,
                     bool requires_grad) {
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = rng.Uniform(lo, hi);
  return Tensor(shape, std::move(v), requires_grad);
}

}  // namespace coflow
