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


#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "coflow/backbone.h"
#include "coflow/ops.h"
#include "coflow/sampler.h"
#include "probe_nets.h"

namespace coflow {
namespace {

BackboneConfig TinyBackbone(int agents, const EnvConfig& env) {
  BackboneConfig c;
  c.base_dim = 8;
  c.dim_mults = {1, 2};
  c.groups = 4;
  c.attn_heads = 2;
  c.n_agents = agents;
  c.per_agent_dim = env.ObsDim();
  c.horizon = env.horizon;
  return c;
}

NormStats UnitStats(const EnvConfig& env) {
  NormStats s;
  s.obs_min.assign(env.ObsDim(), -1.0);
  s.obs_max.assign(env.ObsDim(), 1.0);
  s.act_min = {-1, -1};
  s.act_max = {1, 1};
  s.rtg_min = -30;
  s.rtg_max = 0;
  return s;
}

Policy RandomPolicy(const EnvConfig& env, std::uint64_t seed) {
  Policy p = Policy::Create(TinyBackbone(env.n_agents, env), Variant{}, env, UnitStats(env), 16,
                            seed);
  // Open the gates so cross-agent terms are live.
  for (CvaLayer& layer : p.net->cva_layers()) layer.mutable_gamma().mutable_data()[0] = 0.3;
  return p;
}

TEST(CfgTest, GuidanceInterpolatesBetweenPasses) {
  const Tensor cond_v({1, 1, 2}, {2.0, 0.0}), uncond_v({1, 1, 2}, {1.0, 0.0});
  testing::DropProbeNet net(cond_v, uncond_v);
  const Tensor z = Tensor::Zeros({1, 1, 1, 2}), zero = Tensor::Zeros({1}), one = Tensor::Full({1}, 1.0);
  Conditioning cond;
  cond.returns = Tensor({1, 1}, {0.5});
  const Tensor g = CfgVelocity(net, z, zero, one, cond, 1.2);
  EXPECT_NEAR(g.at(0), 2.2, 1e-15);
  EXPECT_EQ(g.at(1), 0.0);
  EXPECT_EQ(CfgVelocity(net, z, zero, one, cond, 1.0).values(), (std::vector<double>{2.0, 0.0}));
  EXPECT_EQ(CfgVelocity(net, z, zero, one, cond, 0.0).values(), (std::vector<double>{1.0, 0.0}));
}

TEST(SampleTest, ConstantFieldTelescopesForEveryK) {
  Rng rng(3);
  const Tensor c = RandomNormal({2, 4, 3}, rng);
  testing::ConstantNet net(c);
  const Tensor z1 = RandomNormal({5, 2, 4, 3}, rng);
  for (int k : {1, 2, 3, 7, 10}) {
    SampleConfig cfg;
    cfg.steps = k;
    cfg.guidance = 1.0;
    SampleStats stats;
    const Tensor out = Sample(net, z1, Conditioning{}, cfg, &stats);
    EXPECT_EQ(stats.model_calls, k);
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      EXPECT_NEAR(out.at(i), z1.at(i) - c.at(i % c.numel()), 1e-12) << "k=" << k;
    }
  }
  SampleConfig bad;
  bad.steps = 0;
  EXPECT_THROW(Sample(net, z1, Conditioning{}, bad), std::invalid_argument);
}

TEST(SampleTest, OneStepUnguidedIsTheShortcutBitExactly) {
  EnvConfig env;
  Policy p = RandomPolicy(env, 2);
  Rng rng(4);
  const Shape shape{3, env.n_agents, env.horizon, env.ObsDim()};
  const Tensor z1 = RandomNormal(shape, rng);
  Conditioning cond;
  cond.returns = RandomUniform({3, env.n_agents}, rng, 0, 1);
  SampleConfig cfg;
  cfg.steps = 1;
  cfg.guidance = 1.0;
  const Tensor out = Sample(*p.net, z1, cond, cfg);
  const Tensor u = p.net->Forward(z1, Tensor::Zeros({3}), Tensor::Full({3}, 1.0), cond);
  for (std::int64_t i = 0; i < out.numel(); ++i) ASSERT_EQ(out.at(i), z1.at(i) - u.at(i));
}

TEST(SampleTest, ConditionedSlotsAreInpaintedExactly) {
  EnvConfig env;
  env.horizon = 8;
  BackboneConfig bb = TinyBackbone(env.n_agents, env);
  bb.history = 2;
  Policy p = Policy::Create(bb, Variant{}, env, UnitStats(env), 16, 5);
  Rng rng(6);
  Conditioning cond;
  cond.returns = RandomUniform({2, env.n_agents}, rng, 0, 1);
  cond.obs = RandomUniform({2, env.n_agents, 3, env.ObsDim()}, rng, -1, 1);
  cond = ApplyCtdeMask(cond, std::vector<int>{-1, 1});
  for (int k : {1, 4}) {
    SampleConfig cfg;
    cfg.steps = k;
    const Tensor z = Sample(*p.net, cond, cfg, {2, env.n_agents, env.horizon, env.ObsDim()}, rng);
    const int d = env.ObsDim(), h = env.horizon, n = env.n_agents;
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < n; ++i) {
        if (!cond.Visible(b, i)) continue;
        for (int j = 0; j < 3; ++j) {
          for (int q = 0; q < d; ++q) {
            EXPECT_EQ(z.at(((b * n + i) * h + j) * d + q), cond.obs.at(((b * n + i) * 3 + j) * d + q));
          }
        }
      }
    }
  }
}

TEST(ExtractActionsTest, ShapesPerMode) {
  EnvConfig env;
  Policy p = RandomPolicy(env, 1);
  Rng rng(2);
  const Tensor traj = RandomNormal({4, 3, env.horizon, env.ObsDim()}, rng);
  const Tensor now = RandomNormal({4, 3, env.ObsDim()}, rng);
  EXPECT_EQ(ExtractActions(*p.inverse, now, traj, 1).shape(), (Shape{4, 3, 2}));
  EXPECT_EQ(ExtractActions(*p.inverse, now, traj, 1, 2).shape(), (Shape{4, 1, 2}));
  EXPECT_THROW(ExtractActions(*p.inverse, now, traj, env.horizon), std::invalid_argument);
}

// The exact inverse of the velocity update reproduces the next observation.
TEST(ExtractActionsTest, ExactInverseReproducesNextObservation) {
  EnvConfig env;
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    ParticleWorld w = ResetWorld(env, rng);
    for (int s = 0; s < 5; ++s) {
      std::vector<Vec2> a(env.n_agents);
      for (Vec2& ai : a) ai = {rng.Uniform(-1, 1), rng.Uniform(-1, 1)};
      ParticleWorld target = w;
      EnvStep(target, a);
      std::vector<Vec2> inv(env.n_agents);
      for (int i = 0; i < env.n_agents; ++i) inv[i] = InverseVelocityAction(w.vel[i], target.vel[i], env.dt);
      ParticleWorld replay = w;
      EnvStep(replay, inv);
      const std::vector<double> o1 = Observe(target), o2 = Observe(replay);
      for (std::size_t q = 0; q < o1.size(); ++q) EXPECT_NEAR(o1[q], o2[q], 1e-6);
      w = target;
    }
  }
}

TEST(RolloutTest, DeterministicAndCallAccounting) {
  EnvConfig env;
  Policy p = RandomPolicy(env, 3);
  RolloutOptions opt;
  opt.episodes = 4;
  opt.lockstep = 2;
  opt.seed = 17;
  SampleConfig one;
  one.steps = 1;
  const RolloutReport a = Rollout(p, one, opt), b = Rollout(p, one, opt);
  ASSERT_EQ(a.episodes.size(), 4u);
  for (int e = 0; e < 4; ++e) {
    EXPECT_EQ(a.episodes[e].ret, b.episodes[e].ret);
    EXPECT_EQ(a.episodes[e].coverage, b.episodes[e].coverage);
  }
  SampleConfig fifteen = one;
  fifteen.steps = 15;
  const RolloutReport c = Rollout(p, fifteen, opt);
  EXPECT_EQ(a.decisions, c.decisions);
  EXPECT_EQ(c.model_calls, 15 * a.model_calls);
  EXPECT_EQ(a.latency_ms.size(), static_cast<std::size_t>(4 * (env.horizon - 1 - opt.warmup)));

  std::ostringstream csv;
  WriteRolloutCsv(csv, a, one);
  EXPECT_EQ(csv.str().rfind("episode,return,coverage_mean,model_ms_per_decision,k,omega,alpha_scale,mode\n", 0), 0u);
}

TEST(RolloutTest, LockstepGroupingDoesNotChangeOutcomes) {
  EnvConfig env;
  Policy p = RandomPolicy(env, 3);
  RolloutOptions opt;
  opt.episodes = 4;
  opt.seed = 5;
  SampleConfig cfg;
  opt.lockstep = 1;
  const RolloutReport a = Rollout(p, cfg, opt);
  opt.lockstep = 4;
  const RolloutReport b = Rollout(p, cfg, opt);
  for (int e = 0; e < 4; ++e) EXPECT_NEAR(a.episodes[e].ret, b.episodes[e].ret, 1e-6);
}

TEST(RolloutTest, SingleAgentModesAgree) {
  EnvConfig env;
  env.n_agents = 1;
  env.n_landmarks = 1;
  Policy p = Policy::Create(TinyBackbone(1, env), Variant{}, env, UnitStats(env), 16, 9);
  RolloutOptions opt;
  opt.episodes = 3;
  opt.seed = 2;
  SampleConfig c, d;
  d.decentralized = true;
  const RolloutReport rc = Rollout(p, c, opt), rd = Rollout(p, d, opt);
  for (int e = 0; e < 3; ++e) EXPECT_EQ(rc.episodes[e].ret, rd.episodes[e].ret);
}

TEST(RolloutTest, AlphaZeroEqualsClosedGates) {
  EnvConfig env;
  Policy p = RandomPolicy(env, 4);
  Policy closed = RandomPolicy(env, 4);
  for (CvaLayer& layer : closed.net->cva_layers()) layer.mutable_gamma().mutable_data()[0] = 0.0;
  RolloutOptions opt;
  opt.episodes = 3;
  opt.seed = 6;
  SampleConfig zero;
  zero.alpha_scale = 0.0;
  const RolloutReport a = Rollout(p, zero, opt), b = Rollout(closed, SampleConfig{}, opt);
  for (int e = 0; e < 3; ++e) EXPECT_EQ(a.episodes[e].ret, b.episodes[e].ret);
  const RolloutReport on = Rollout(p, SampleConfig{}, opt);
  bool any_diff = false;
  for (int e = 0; e < 3; ++e) any_diff = any_diff || on.episodes[e].ret != a.episodes[e].ret;
  EXPECT_TRUE(any_diff);
}

}  // namespace
}  // namespace coflow
