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


#include "coflow/nn.h"

#include <cmath>
#include <stdexcept>

#include "coflow/ops.h"

namespace coflow {

Tensor ParameterSet::Add(const std::string& name, Tensor value) {
  if (Find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  value.set_requires_grad(true);
  entries_.push_back({name, value});
  return value;
}

std::int64_t ParameterSet::NumScalars() const {
  std::int64_t n = 0;
  for (const Entry& e : entries_) n += e.value.numel();
  return n;
}

const Tensor* ParameterSet::Find(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

void ParameterSet::ZeroGrad() {
  for (Entry& e : entries_) e.value.ZeroGrad();
}

std::vector<std::vector<double>> ParameterSet::Snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.value.values());
  return out;
}

void ParameterSet::Restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != entries_.size()) {
    throw std::invalid_argument("parameter snapshot has " +
                                std::to_string(values.size()) +
                                " entries, expected " +
                                std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].value.mutable_data();
    if (values[i].size() != dst.size()) {
      throw std::invalid_argument("parameter " + entries_[i].name +
                                  ": snapshot size mismatch");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void ParameterSet::CopyFrom(const ParameterSet& other) {
  if (other.size() != size()) {
    throw std::invalid_argument("parameter layouts differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].value.shape() != other.entries_[i].value.shape()) {
      throw std::invalid_argument("parameter layouts differ at " +
                                  entries_[i].name);
    }
  }
  Restore(other.Snapshot());
}

Tensor UniformInit(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return RandomUniform(shape, rng, -bound, bound);
}

LinearLayer::LinearLayer(ParameterSet& params, const std::string& name,
                         std::int64_t in, std::int64_t out, Rng& rng,
                         bool bias) {
  weight_ = params.Add(name + ".weight", UniformInit({out, in}, in, rng));
  if (bias) bias_ = params.Add(name + ".bias", UniformInit({out}, in, rng));
}

Tensor LinearLayer::operator()(const Tensor& x) const {
  return ops::Linear(x, weight_, bias_);
}

Conv1dLayer::Conv1dLayer(ParameterSet& params, const std::string& name,
                         std::int64_t in, std::int64_t out, int kernel,
                         int stride, int padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  const std::int64_t fan_in = in * kernel;
  weight_ = params.Add(name + ".weight", UniformInit({out, in, kernel}, fan_in, rng));
  bias_ = params.Add(name + ".bias", UniformInit({out}, fan_in, rng));
}

Tensor Conv1dLayer::operator()(const Tensor& x) const {
  return ops::Conv1d(x, weight_, bias_, stride_, padding_);
}

TransposedConv1dLayer::TransposedConv1dLayer(ParameterSet& params,
                                             const std::string& name,
                                             std::int64_t in, std::int64_t out,
                                             int kernel, int stride,
                                             int padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  const std::int64_t fan_in = out * kernel;
  weight_ = params.Add(name + ".weight", UniformInit({in, out, kernel}, fan_in, rng));
  bias_ = params.Add(name + ".bias", UniformInit({out}, fan_in, rng));
}

Tensor TransposedConv1dLayer::operator()(const Tensor& x) const {
  return ops::TransposedConv1d(x, weight_, bias_, stride_, padding_);
}

GroupNormLayer::GroupNormLayer(ParameterSet& params, const std::string& name,
                               std::int64_t channels, int groups)
    : groups_(groups) {
  gamma_ = params.Add(name + ".gamma", Tensor::Full({channels}, 1.0));
  beta_ = params.Add(name + ".beta", Tensor::Zeros({channels}));
}

Tensor GroupNormLayer::operator()(const Tensor& x) const {
  return ops::GroupNorm(x, groups_, gamma_, beta_);
}

}  // namespace coflow
