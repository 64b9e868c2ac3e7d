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


// One- and k-step trajectory generation with classifier-free guidance,
// action extraction, and batched environment rollouts.

#ifndef COFLOW_SAMPLER_H_
#define COFLOW_SAMPLER_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "coflow/env.h"
#include "coflow/inverse_dynamics.h"
#include "coflow/policy.h"
#include "coflow/random.h"
#include "coflow/velocity_model.h"

namespace coflow {

struct SampleConfig {
  int steps = 1;
  double guidance = 1.2;
  double alpha_scale = 1.0;
  bool decentralized = false;
  // Agent whose view is kept in decentralized Sample calls; rollouts cycle
  // through every agent.
  int acting_agent = 0;

  void Validate() const;
  std::string ModeName() const { return decentralized ? "decentralized" : "centralized"; }
};

// Counts batched guided-velocity evaluations.
struct SampleStats {
  long model_calls = 0;
};

// u_uncond + omega * (u_cond - u_uncond). omega == 1 and omega == 0 run a
// single pass and return it unchanged; otherwise both passes share one
// batched forward.
Tensor CfgVelocity(const VelocityModel& net, const Tensor& z, const Tensor& r, const Tensor& t,
                   const Conditioning& cond, double omega, double alpha_scale = 1.0);

// Starts from z1 and applies k updates z <- z - (1/k) u(z, 0, t_m) with
// t_m = 1 - m/k, re-inpainting the conditioned slots after each update.
// k = 1 gives z1 - u(z1, 0, 1). Runs without recording a graph.
Tensor Sample(const VelocityModel& net, const Tensor& z1, const Conditioning& cond,
              const SampleConfig& cfg, SampleStats* stats = nullptr);

// Draws z1 of shape [B, N, H, d] from rng then samples.
Tensor Sample(const VelocityModel& net, const Conditioning& cond, const SampleConfig& cfg,
              const Shape& shape, Rng& rng, SampleStats* stats = nullptr);

// o_now: [B, N, d] model-space current observations; traj: [B, N, H, d]
// with the next observation at step `next_slot`. Returns [B, N, 2] raw
// actions, or [B, 1, 2] for `only_agent` >= 0.
Tensor ExtractActions(const InverseDynamics& head, const Tensor& o_now, const Tensor& traj,
                      int next_slot, int only_agent = -1);

struct RolloutOptions {
  int episodes = 50;
  std::uint64_t seed = 0;
  // Normalized return-to-go the planner is conditioned on.
  double target_return = 0.9;
  // Episodes advanced together in one batched model call.
  int lockstep = 50;
  // Leading decisions per rollout excluded from latency samples.
  int warmup = 3;
  // Worker threads over lockstep groups; 0 reads COFLOW_THREADS.
  int threads = 0;
  // Plans with this model instead of policy.net when set.
  const VelocityModel* planner = nullptr;
};

struct EpisodeResult {
  int episode = 0;
  double ret = 0.0;  // undiscounted team reward sum
  double coverage_mean = 0.0;
  double coverage_final = 0.0;
  double model_ms_per_decision = 0.0;
  std::vector<double> coverage;
};

struct RolloutReport {
  std::vector<EpisodeResult> episodes;
  // Wall-clock ms of model work per decision, warm-up excluded.
  std::vector<double> latency_ms;
  long model_calls = 0;
  long decisions = 0;

  double MeanReturn() const;
  double StderrReturn() const;
  double MeanCoverage() const;
  double MedianLatencyMs() const;
};

// Plans with policy.net (or options.planner) at every env step, executes the
// extracted actions, and records returns, coverage and model latency. Only
// model forwards (velocity net and inverse dynamics) are timed.
RolloutReport Rollout(const Policy& policy, const SampleConfig& cfg,
                      const RolloutOptions& options);

// Header and rows: episode,return,coverage_mean,model_ms_per_decision,k,omega,alpha_scale,mode
void WriteRolloutCsv(std::ostream& os, const RolloutReport& report, const SampleConfig& cfg,
                     bool header = true);

// Threads granted by COFLOW_THREADS (default 1, minimum 1).
int ThreadBudget();

}  // namespace coflow

#endif  // COFLOW_SAMPLER_H_
