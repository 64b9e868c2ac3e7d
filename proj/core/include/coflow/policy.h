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


// A trained policy bundle: velocity net, inverse-dynamics head, and the
// normalization that maps environment observations into model space.

#ifndef COFLOW_POLICY_H_
#define COFLOW_POLICY_H_

#include <memory>
#include <string>

#include "coflow/backbone.h"
#include "coflow/dataset.h"
#include "coflow/inverse_dynamics.h"
#include "coflow/velocity_model.h"

namespace coflow {

// coflow trains on the finite-difference surrogate, coflow-base on the plain
// flow loss; C conditions on every agent, D on the acting agent only.
struct Variant {
  bool base = false;
  bool decentralized = false;

  std::string Name() const;  // "coflow-c", "coflow-base-d", ...
  // Accepts the names above, case-insensitive.
  static Variant Parse(const std::string& name);
  bool operator==(const Variant&) const = default;
};

// Per-dimension affine map of the corpus range onto [-1, 1].
class ObsCodec {
 public:
  ObsCodec() = default;
  explicit ObsCodec(NormStats stats) : stats_(std::move(stats)) {}

  double Encode(int dim, double x) const { return 2.0 * stats_.NormalizeObs(dim, x) - 1.0; }
  double Decode(int dim, double y) const { return stats_.DenormalizeObs(dim, 0.5 * (y + 1.0)); }
  double EncodeReturn(double rtg) const { return stats_.NormalizeReturn(rtg); }
  const NormStats& stats() const { return stats_; }

 private:
  NormStats stats_;
};

// Overwrites z[b, i, 0:W, :] with cond.obs[b, i] for every visible agent.
// z: [B, N, H, d], cond.obs: [B, N, W, d].
void InpaintObservations(Tensor& z, const Conditioning& cond);
// Zeroes the slots InpaintObservations would overwrite.
void ZeroInpaintedSlots(Tensor& v, const Conditioning& cond);

struct Policy {
  BackboneConfig backbone;
  Variant variant;
  EnvConfig env;
  NormStats stats;
  std::int64_t id_hidden = 64;
  std::unique_ptr<VelocityNet> net;
  std::unique_ptr<InverseDynamics> inverse;

  // Fresh networks for the configuration fields above.
  static Policy Create(const BackboneConfig& backbone, Variant variant,
                       const EnvConfig& env, const NormStats& stats,
                       std::int64_t id_hidden, std::uint64_t seed);
  ObsCodec codec() const { return ObsCodec(stats); }
  // Aliasing view: "net/..." then "id/...".
  ParameterSet Parameters() const;
};

// Checkpoint with the configuration in the manifest metadata.
void SavePolicy(const Policy& policy, const std::string& path);
Policy LoadPolicy(const std::string& path);

}  // namespace coflow

#endif  // COFLOW_POLICY_H_
