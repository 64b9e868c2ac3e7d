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


#include "coflow/optim.h"

#include <cmath>
#include <stdexcept>

namespace coflow {

Adam::Adam(ParameterSet* params, const AdamConfig& config)
    : params_(params), config_(config) {
  if (!(config.lr > 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.eps > 0.0)) {
    throw std::invalid_argument("adam: invalid hyperparameters");
  }
  for (const auto& e : params_->entries()) {
    m_.emplace_back(e.value.numel(), 0.0);
    v_.emplace_back(e.value.numel(), 0.0);
  }
}

void Adam::Step() {
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const auto& entries = params_->entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor value = entries[p].value;
    if (!value.has_grad()) continue;
    const std::vector<double>& g = value.storage()->grad;
    std::span<double> x = value.mutable_data();
    std::vector<double>& m = m_[p];
    std::vector<double>& v = v_[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      x[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void EmaUpdate(ParameterSet& shadow, const ParameterSet& live, double decay) {
  if (!(decay > 0.0 && decay < 1.0)) {
    throw std::invalid_argument("ema decay must lie in (0, 1)");
  }
  const auto& s = shadow.entries();
  const auto& l = live.entries();
  if (s.size() != l.size()) throw std::invalid_argument("ema: parameter layouts differ");
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (s[p].value.shape() != l[p].value.shape()) {
      throw std::invalid_argument("ema: shape mismatch for " + s[p].name);
    }
    Tensor target = s[p].value;
    std::span<double> x = target.mutable_data();
    std::span<const double> y = l[p].value.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = decay * x[i] + (1.0 - decay) * y[i];
  }
}

double GlobalGradNorm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& e : params.entries()) {
    if (!e.value.has_grad()) continue;
    for (double g : e.value.storage()->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

ParameterSet MergeParameters(
    const std::vector<std::pair<std::string, const ParameterSet*>>& parts) {
  ParameterSet merged;
  for (const auto& [prefix, set] : parts) {
    for (const auto& e : set->entries()) merged.Add(prefix + e.name, e.value);
  }
  return merged;
}

}  // namespace coflow
