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

#ifndef COFLOW_RANDOM_H_
#define COFLOW_RANDOM_H_

#include <cstdint>
#include <random>

#include "coflow/tensor.h"

namespace coflow {

// Seeded 64-bit Mersenne Twister with the few draws the library needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double Normal() { return normal_(engine_); }
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi_inclusive) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi_inclusive)(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }
  // Seed for an independent child stream.
  std::uint64_t Fork() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Tensor RandomNormal(const Shape& shape, Rng& rng, double scale = 1.0,
                    bool requires_grad = false);
Tensor RandomUniform(const Shape& shape, Rng& rng, double lo, double hi,
                     bool requires_grad = false);

}  // namespace coflow

#endif  // COFLOW_RANDOM_H_
