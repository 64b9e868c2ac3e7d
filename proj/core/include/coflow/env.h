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


// Mini-Spread: N agents with double-integrator dynamics in the unit square
// cover N fixed landmarks without colliding.

#ifndef COFLOW_ENV_H_
#define COFLOW_ENV_H_

#include <array>
#include <string>
#include <vector>

#include "coflow/random.h"

namespace coflow {

using Vec2 = std::array<double, 2>;

struct EnvConfig {
  int n_agents = 3;
  int n_landmarks = 3;
  int horizon = 24;  // observations per episode
  double dt = 0.1;
  double v_max = 1.0;
  double collision_radius = 0.08;
  double collision_penalty = 1.0;
  double coverage_threshold = 0.1;

  void Validate() const;
  // Observation width: own position, own velocity, landmark offsets.
  int ObsDim() const { return 4 + 2 * n_landmarks; }
};

struct ParticleWorld {
  EnvConfig config;
  std::vector<Vec2> pos, vel, landmarks;
  int step = 0;
};

struct StepResult {
  double reward = 0.0;
  double coverage = 0.0;
};

// State values live on a 2^-20 grid so float32 storage is exact.
double Quantize(double x);

ParticleWorld ResetWorld(const EnvConfig& config, Rng& rng);
// World with explicit state; values are quantized.
ParticleWorld MakeWorld(const EnvConfig& config, std::vector<Vec2> pos,
                        std::vector<Vec2> vel, std::vector<Vec2> landmarks);

// Clips actions to [-1, 1], then pos += dt * vel (clamped to the square) and
// vel += dt * a (speed capped at v_max). Throws on a NaN action.
StepResult EnvStep(ParticleWorld& world, const std::vector<Vec2>& actions);

// -sum over landmarks of the nearest agent distance, minus the penalty per
// agent pair closer than the collision radius.
double Reward(const ParticleWorld& world);
double CoverageRate(const ParticleWorld& world, double threshold);
int CollidingPairs(const ParticleWorld& world);

// Row-major [N, ObsDim] observations.
std::vector<double> Observe(const ParticleWorld& world);

enum class Tier { kExpert, kMedium, kRandom };
std::string TierName(Tier tier);
Tier ParseTier(const std::string& name);

// Landmark index per agent minimizing total distance; exhaustive over
// permutations for N <= 4, greedy nearest pairs otherwise.
std::vector<int> ExpertAssignment(const ParticleWorld& world);

std::vector<Vec2> ScriptedPolicy(Tier tier, const ParticleWorld& world,
                                 Rng& rng);

// Exact inverse of the velocity update: the action that moves vel_now to
// vel_next when the speed cap is inactive.
Vec2 InverseVelocityAction(const Vec2& vel_now, const Vec2& vel_next, double dt);

}  // namespace coflow

#endif  // COFLOW_ENV_H_
