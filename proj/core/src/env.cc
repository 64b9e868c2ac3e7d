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


#include "coflow/env.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace coflow {
namespace {

constexpr double kGrid = 1048576.0;  // 2^20
constexpr double kGain = 6.0;
constexpr double kDamping = 4.0;
constexpr double kMediumNoise = 0.3;
constexpr double kMediumRandomFraction = 0.2;

double Dist(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

Vec2 Clip(const Vec2& a) {
  return {std::clamp(a[0], -1.0, 1.0), std::clamp(a[1], -1.0, 1.0)};
}

}  // namespace

void EnvConfig::Validate() const {
  if (n_agents <= 0 || n_landmarks <= 0 || horizon < 2) {
    throw std::invalid_argument("env config: agents, landmarks >= 1 and horizon >= 2");
  }
  if (!(dt > 0.0 && v_max > 0.0 && collision_radius >= 0.0 &&
        coverage_threshold > 0.0)) {
    throw std::invalid_argument("env config: non-positive constant");
  }
}

double Quantize(double x) { return std::round(x * kGrid) / kGrid; }

ParticleWorld MakeWorld(const EnvConfig& config, std::vector<Vec2> pos,
                        std::vector<Vec2> vel, std::vector<Vec2> landmarks) {
  config.Validate();
  if (static_cast<int>(pos.size()) != config.n_agents ||
      static_cast<int>(vel.size()) != config.n_agents ||
      static_cast<int>(landmarks.size()) != config.n_landmarks) {
    throw std::invalid_argument("world state does not match env config");
  }
  ParticleWorld w;
  w.config = config;
  auto q = [](std::vector<Vec2>& v) {
    for (Vec2& p : v) p = {Quantize(p[0]), Quantize(p[1])};
  };
  q(pos);
  q(vel);
  q(landmarks);
  w.pos = std::move(pos);
  w.vel = std::move(vel);
  w.landmarks = std::move(landmarks);
  return w;
}

ParticleWorld ResetWorld(const EnvConfig& config, Rng& rng) {
  std::vector<Vec2> pos(config.n_agents), vel(config.n_agents, Vec2{0.0, 0.0});
  std::vector<Vec2> landmarks(config.n_landmarks);
  for (Vec2& p : pos) p = {rng.Uniform(), rng.Uniform()};
  for (Vec2& l : landmarks) l = {rng.Uniform(0.1, 0.9), rng.Uniform(0.1, 0.9)};
  return MakeWorld(config, std::move(pos), std::move(vel), std::move(landmarks));
}

StepResult EnvStep(ParticleWorld& world, const std::vector<Vec2>& actions) {
  const EnvConfig& c = world.config;
  if (static_cast<int>(actions.size()) != c.n_agents) {
    throw std::invalid_argument("env step: expected " +
                                std::to_string(c.n_agents) + " actions");
  }
  for (int i = 0; i < c.n_agents; ++i) {
    if (std::isnan(actions[i][0]) || std::isnan(actions[i][1])) {
      throw std::invalid_argument("env step: NaN action for agent " +
                                  std::to_string(i));
    }
    const Vec2 a = Clip(actions[i]);
    for (int k = 0; k < 2; ++k) {
      world.pos[i][k] =
          Quantize(std::clamp(world.pos[i][k] + c.dt * world.vel[i][k], 0.0, 1.0));
    }
    Vec2 v{world.vel[i][0] + c.dt * a[0], world.vel[i][1] + c.dt * a[1]};
    const double speed = std::hypot(v[0], v[1]);
    if (speed > c.v_max) {
      v[0] *= c.v_max / speed;
      v[1] *= c.v_max / speed;
    }
    world.vel[i] = {Quantize(v[0]), Quantize(v[1])};
  }
  ++world.step;
  return {Reward(world), CoverageRate(world, c.coverage_threshold)};
}

int CollidingPairs(const ParticleWorld& world) {
  int pairs = 0;
  const int n = world.config.n_agents;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      pairs += Dist(world.pos[i], world.pos[j]) < world.config.collision_radius;
    }
  }
  return pairs;
}

double Reward(const ParticleWorld& world) {
  double total = 0.0;
  for (const Vec2& l : world.landmarks) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& p : world.pos) best = std::min(best, Dist(l, p));
    total -= best;
  }
  return total - world.config.collision_penalty * CollidingPairs(world);
}

double CoverageRate(const ParticleWorld& world, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("coverage threshold must be > 0");
  int covered = 0;
  for (const Vec2& l : world.landmarks) {
    for (const Vec2& p : world.pos) {
      if (Dist(l, p) <= threshold) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(world.landmarks.size());
}

std::vector<double> Observe(const ParticleWorld& world) {
  const int d = world.config.ObsDim();
  std::vector<double> obs(world.config.n_agents * d);
  for (int i = 0; i < world.config.n_agents; ++i) {
    double* o = obs.data() + i * d;
    o[0] = world.pos[i][0];
    o[1] = world.pos[i][1];
    o[2] = world.vel[i][0];
    o[3] = world.vel[i][1];
    for (int l = 0; l < world.config.n_landmarks; ++l) {
      o[4 + 2 * l] = world.landmarks[l][0] - world.pos[i][0];
      o[5 + 2 * l] = world.landmarks[l][1] - world.pos[i][1];
    }
  }
  return obs;
}

std::string TierName(Tier tier) {
  switch (tier) {
    case Tier::kExpert: return "expert";
    case Tier::kMedium: return "medium";
    case Tier::kRandom: return "random";
  }
  return "unknown";
}

Tier ParseTier(const std::string& name) {
  if (name == "expert") return Tier::kExpert;
  if (name == "medium") return Tier::kMedium;
  if (name == "random") return Tier::kRandom;
  throw std::invalid_argument("unknown tier: " + name);
}

std::vector<int> ExpertAssignment(const ParticleWorld& world) {
  const int n = world.config.n_agents, m = world.config.n_landmarks;
  std::vector<int> best(n, -1);
  if (n <= 4 && n <= m) {
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (int i = 0; i < n; ++i) cost += Dist(world.pos[i], world.landmarks[perm[i]]);
      if (cost < best_cost) {
        best_cost = cost;
        best.assign(perm.begin(), perm.begin() + n);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  // Greedy: repeatedly take the globally closest free (agent, landmark) pair;
  // agents beyond the landmark count reuse landmarks.
  std::vector<bool> agent_done(n, false), lm_used(m, false);
  for (int round = 0; round < n; ++round) {
    double bd = std::numeric_limits<double>::infinity();
    int ba = -1, bl = -1;
    const bool all_used = std::all_of(lm_used.begin(), lm_used.end(), [](bool b) { return b; });
    for (int i = 0; i < n; ++i) {
      if (agent_done[i]) continue;
      for (int l = 0; l < m; ++l) {
        if (lm_used[l] && !all_used) continue;
        const double dd = Dist(world.pos[i], world.landmarks[l]);
        if (dd < bd) {
          bd = dd;
          ba = i;
          bl = l;
        }
      }
    }
    agent_done[ba] = true;
    lm_used[bl] = true;
    best[ba] = bl;
  }
  return best;
}

std::vector<Vec2> ScriptedPolicy(Tier tier, const ParticleWorld& world,
                                 Rng& rng) {
  const int n = world.config.n_agents;
  std::vector<Vec2> actions(n);
  if (tier == Tier::kRandom) {
    for (Vec2& a : actions) a = {rng.Uniform(-1.0, 1.0), rng.Uniform(-1.0, 1.0)};
    return actions;
  }
  const std::vector<int> assign = ExpertAssignment(world);
  for (int i = 0; i < n; ++i) {
    const Vec2& target = world.landmarks[assign[i]];
    Vec2 a;
    for (int k = 0; k < 2; ++k) {
      a[k] = kGain * (target[k] - world.pos[i][k]) - kDamping * world.vel[i][k];
    }
    actions[i] = Clip(a);
  }
  if (tier == Tier::kMedium) {
    const bool random_step = rng.Bernoulli(kMediumRandomFraction);
    for (Vec2& a : actions) {
      if (random_step) {
        a = {rng.Uniform(-1.0, 1.0), rng.Uniform(-1.0, 1.0)};
      } else {
        a = Clip({a[0] + kMediumNoise * rng.Normal(), a[1] + kMediumNoise * rng.Normal()});
      }
    }
  }
  for (Vec2& a : actions) a = {Quantize(a[0]), Quantize(a[1])};
  return actions;
}

Vec2 InverseVelocityAction(const Vec2& vel_now, const Vec2& vel_next, double dt) {
  return {(vel_next[0] - vel_now[0]) / dt, (vel_next[1] - vel_now[1]) / dt};
}

}  // namespace coflow
