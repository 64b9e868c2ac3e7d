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


#include "coflow/flow.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coflow/ops.h"

namespace coflow {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Broadcasts one value per leading-axis item over the remaining elements.
Tensor PerItem(const Shape& shape, const std::vector<double>& values) {
  const std::int64_t items = shape.empty() ? 1 : shape[0];
  if (static_cast<std::int64_t>(values.size()) != items) {
    throw std::invalid_argument("per-item values: got " +
                                std::to_string(values.size()) +
                                " for leading extent " + std::to_string(items));
  }
  std::vector<double> out(NumElements(shape));
  const std::int64_t inner = items == 0 ? 0 : NumElements(shape) / items;
  for (std::int64_t b = 0; b < items; ++b) {
    std::fill(out.begin() + b * inner, out.begin() + (b + 1) * inner, values[b]);
  }
  return Tensor(shape, std::move(out));
}

}  // namespace

void FlowConfig::Validate() const {
  if (!(flow_ratio >= 0.0 && flow_ratio <= 1.0)) {
    throw std::invalid_argument("flow_ratio must lie in [0, 1]");
  }
  if (!(logit_normal_sigma > 0.0)) {
    throw std::invalid_argument("logit_normal_sigma must be positive");
  }
}

TimePair SampleTimePair(const FlowConfig& cfg, Rng& rng) {
  const double mu = cfg.logit_normal_mu, sigma = cfg.logit_normal_sigma;
  double a = Sigmoid(mu + sigma * rng.Normal());
  double b = Sigmoid(mu + sigma * rng.Normal());
  // Extreme draws would round onto the closed endpoints.
  a = std::clamp(a, 1e-9, 1.0 - 1e-9);
  b = std::clamp(b, 1e-9, 1.0 - 1e-9);
  TimePair pair{std::min(a, b), std::max(a, b)};
  if (rng.Bernoulli(cfg.flow_ratio)) pair.r = pair.t;
  return pair;
}

InterpolantSample Interpolate(const Tensor& tau0, const Tensor& z1, double t) {
  const std::int64_t items = tau0.rank() == 0 ? 1 : tau0.dim(0);
  return Interpolate(tau0, z1, std::vector<double>(items, t));
}

InterpolantSample Interpolate(const Tensor& tau0, const Tensor& z1,
                              const std::vector<double>& t) {
  if (tau0.shape() != z1.shape()) {
    throw std::invalid_argument("interpolate: shape mismatch " +
                                ShapeString(tau0.shape()) + " vs " +
                                ShapeString(z1.shape()));
  }
  for (double v : t) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("interpolate: t outside [0, 1]");
    }
  }
  Tensor tt = PerItem(tau0.shape(), t);
  std::vector<double> zt(tau0.numel()), v(tau0.numel());
  for (std::int64_t i = 0; i < tau0.numel(); ++i) {
    const double s = tt.at(i);
    zt[i] = (1.0 - s) * tau0.at(i) + s * z1.at(i);
    v[i] = z1.at(i) - tau0.at(i);
  }
  InterpolantSample out;
  out.tau0 = tau0;
  out.z1 = z1;
  out.t = t;
  out.z_t = Tensor(tau0.shape(), std::move(zt));
  out.v_cond = Tensor(tau0.shape(), std::move(v));
  return out;
}

Tensor TimeTensor(const std::vector<double>& values) {
  return Tensor({static_cast<std::int64_t>(values.size())}, values);
}

Tensor FdSurrogate(const VelocityModel& net, const Tensor& z_t,
                   const std::vector<TimePair>& pairs,
                   const Conditioning& cond) {
  const std::size_t batch = pairs.size();
  std::vector<double> r(batch), t(batch), h(batch);
  bool any_gap = false;
  for (std::size_t b = 0; b < batch; ++b) {
    if (pairs[b].r > pairs[b].t) {
      throw std::invalid_argument("fd surrogate: r > t");
    }
    r[b] = pairs[b].r;
    t[b] = pairs[b].t;
    h[b] = pairs[b].t - pairs[b].r;
    any_gap = any_gap || h[b] > 0.0;
  }
  Tensor zeros = TimeTensor(std::vector<double>(batch, 0.0));
  Tensor u_r = net.Forward(z_t, zeros, TimeTensor(r), cond);
  if (!any_gap) return u_r;
  Tensor u_t;
  {
    NoGradGuard no_grad;
    u_t = net.Forward(z_t, zeros, TimeTensor(t), cond);
  }
  Tensor diff = ops::StopGradient(ops::Sub(u_t, u_r));
  return ops::Add(u_r, ops::Mul(diff, PerItem(z_t.shape(), h)));
}

Tensor VelocityLoss(const Tensor& v, const Tensor& v_cond) {
  return ops::Mse(v, v_cond);
}

Tensor PlainFlowLoss(const VelocityModel& net, const InterpolantSample& sample,
                     const Conditioning& cond) {
  Tensor zeros = TimeTensor(std::vector<double>(sample.t.size(), 0.0));
  Tensor u = net.Forward(sample.z_t, zeros, TimeTensor(sample.t), cond);
  return VelocityLoss(u, sample.v_cond);
}

}  // namespace coflow
