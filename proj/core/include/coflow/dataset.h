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


// Offline trajectory corpus collected from scripted policies, with returns,
// min-max normalization statistics and a self-describing file format.

#ifndef COFLOW_DATASET_H_
#define COFLOW_DATASET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coflow/env.h"

namespace coflow {

// One joint episode. Observation rows are [agent][step][dim].
struct JointTrajectory {
  std::vector<double> obs;        // [N, H, d]
  std::vector<double> actions;    // [N, H-1, 2]
  std::vector<double> rewards;    // [H-1]
  std::vector<double> landmarks;  // [L, 2]
  double discounted_return = 0.0;
};

struct NormStats {
  std::vector<double> obs_min, obs_max;  // [d]
  std::vector<double> act_min, act_max;  // [2]
  double rtg_min = 0.0, rtg_max = 0.0;

  // Per-dimension map of the corpus range onto [0, 1]; degenerate
  // dimensions map to 0.
  double NormalizeObs(int dim, double x) const;
  double DenormalizeObs(int dim, double x) const;
  double NormalizeReturn(double rtg) const;
  double NormalizeAction(int dim, double a) const;
};

struct OfflineDataset {
  EnvConfig env;
  Tier tier = Tier::kExpert;
  std::uint64_t seed = 0;
  double gamma = 0.99;
  std::vector<JointTrajectory> trajectories;
  NormStats stats;

  int n_agents() const { return env.n_agents; }
  int horizon() const { return env.horizon; }
  int obs_dim() const { return env.ObsDim(); }
  double ObsAt(int episode, int agent, int step, int dim) const;
  double ActionAt(int episode, int agent, int step, int dim) const;
  // Return-to-go from `step`; see ReturnsToGo.
  double ReturnToGo(int episode, int step) const;
};

double DiscountedReturn(std::span<const double> rewards, double gamma);

// Return-to-go for every decision step 0..H-2, each summing H-1 discounted
// terms with the final reward repeated past the episode end, so values from
// early and late windows share one scale.
std::vector<double> ReturnsToGo(std::span<const double> rewards, double gamma);

NormStats ComputeStats(const OfflineDataset& dataset);

// Rolls out `episodes` episodes of the scripted policy. Rewards are rounded
// to float32 at collection so the in-memory corpus equals its file image.
OfflineDataset GenerateDataset(const EnvConfig& env, Tier tier, int episodes,
                               std::uint64_t seed, double gamma = 0.99);

void WriteDataset(const OfflineDataset& dataset, const std::string& path);
OfflineDataset ReadDataset(const std::string& path);

// Max abs deviation between stored obs[1..] and a re-simulation from obs[0]
// with the stored actions.
double ResimulationError(const OfflineDataset& dataset, int episode);

// World positioned at a stored episode's first observation.
ParticleWorld InitialWorld(const OfflineDataset& dataset, int episode);

}  // namespace coflow

#endif  // COFLOW_DATASET_H_
