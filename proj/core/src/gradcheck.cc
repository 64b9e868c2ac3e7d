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

#include "coflow/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coflow {

GradCheckReport GradCheck(const ScalarFunction& f, std::vector<Tensor> inputs,
                          double eps, double tol, double floor) {
  if (eps <= 0.0) throw std::invalid_argument("gradcheck: eps must be > 0");
  GradCheckReport report;
  for (Tensor& t : inputs) t.ZeroGrad();
  Tape::Current().Reset();
  Tensor loss = f(inputs);
  Backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) analytic.push_back(t.grad());

  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double plus = f(inputs).item();
      data[i] = saved - eps;
      const double minus = f(inputs).item();
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[k][i];
      if (std::isnan(numeric) || std::isnan(a)) {
        report.pass = false;
        report.worst_input = static_cast<int>(k);
        report.worst_index = static_cast<std::int64_t>(i);
        report.max_rel_error = NAN;
        report.message = "NaN gradient estimate at input " +
                         std::to_string(k) + " component " + std::to_string(i);
        return report;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error || report.worst_input < 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_input = static_cast<int>(k);
        report.worst_index = static_cast<std::int64_t>(i);
      }
    }
  }
  report.pass = report.max_rel_error < tol;
  report.message = "max relative error " + std::to_string(report.max_rel_error);
  return report;
}

}  // namespace coflow
