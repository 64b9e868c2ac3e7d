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


#ifndef COFLOW_NN_H_
#define COFLOW_NN_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coflow/random.h"
#include "coflow/tensor.h"

namespace coflow {

// Ordered, named collection of trainable tensors. Layers keep handles that
// alias the stored tensors, so writing values here updates the model.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  // Registers a leaf with requires_grad set. Names must be unique.
  Tensor Add(const std::string& name, Tensor value);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t NumScalars() const;
  const Tensor* Find(const std::string& name) const;

  void ZeroGrad();
  // Flat copies of every value, in registration order.
  std::vector<std::vector<double>> Snapshot() const;
  // Overwrites values from a snapshot; sizes must match.
  void Restore(const std::vector<std::vector<double>>& values);
  // Copies values from another set with identical layout.
  void CopyFrom(const ParameterSet& other);

 private:
  std::vector<Entry> entries_;
};

// PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Tensor UniformInit(const Shape& shape, std::int64_t fan_in, Rng& rng);

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ParameterSet& params, const std::string& name, std::int64_t in,
              std::int64_t out, Rng& rng, bool bias = true);
  Tensor operator()(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_, bias_;
};

class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(ParameterSet& params, const std::string& name, std::int64_t in,
              std::int64_t out, int kernel, int stride, int padding, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor weight_, bias_;
  int stride_ = 1, padding_ = 0;
};

class TransposedConv1dLayer {
 public:
  TransposedConv1dLayer() = default;
  TransposedConv1dLayer(ParameterSet& params, const std::string& name,
                        std::int64_t in, std::int64_t out, int kernel,
                        int stride, int padding, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor weight_, bias_;
  int stride_ = 2, padding_ = 1;
};

class GroupNormLayer {
 public:
  GroupNormLayer() = default;
  GroupNormLayer(ParameterSet& params, const std::string& name,
                 std::int64_t channels, int groups);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor gamma_, beta_;
  int groups_ = 1;
};

}  // namespace coflow

#endif  // COFLOW_NN_H_
