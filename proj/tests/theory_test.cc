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


#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "coflow/backbone.h"
#include "coflow/flow.h"
#include "coflow/random.h"
#include "coflow/theory.h"
#include "json.hpp"
#include "probe_nets.h"

namespace coflow {
namespace {

double BruteForceCost(const std::vector<double>& cost, int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost[i * n + perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<double> Normals(int count, Rng& rng, double scale = 1.0) {
  std::vector<double> v(count);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

TEST(DecompositionBoundTest, ClosedFormValues) {
  EXPECT_EQ(DecompositionBound(3, 2, 0.0, 1.0).exact, 0.0);
  EXPECT_EQ(DecompositionBound(3, 2, 0.1, 0.0).exact, 0.0);
  const DecompositionBoundValue v = DecompositionBound(3, 2, 0.1, 1.0);
  EXPECT_NEAR(v.exact, std::sqrt(3.0) / 3.0 * 0.69, 1e-15);
  EXPECT_NEAR(v.exact, 0.398371, 1e-6);
  EXPECT_NEAR(v.small_gating, std::sqrt(3.0) * 0.2, 1e-15);
  EXPECT_THROW(DecompositionBound(3, 2, -0.1, 1.0), std::invalid_argument);
}

TEST(DecompositionBoundTest, MonotoneInEveryArgument) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.UniformInt(1, 10));
    const int l = static_cast<int>(rng.UniformInt(0, 5));
    const double s = rng.Uniform(0.0, 0.5), d = rng.Uniform(0.0, 3.0);
    const double base = DecompositionBound(n, l, s, d).exact;
    EXPECT_LE(base, DecompositionBound(n + 1, l, s, d).exact);
    EXPECT_LE(base, DecompositionBound(n, l + 1, s, d).exact);
    EXPECT_LE(base, DecompositionBound(n, l, s + 0.01, d).exact);
    EXPECT_LE(base, DecompositionBound(n, l, s, d + 0.1).exact);
  }
}

TEST(BoundReportTest, HoldsAndJson) {
  EXPECT_TRUE(BoundReport::Holds(1.0, 1.0));
  EXPECT_TRUE(BoundReport::Holds(1.0 + 1e-10, 1.0));
  EXPECT_FALSE(BoundReport::Holds(1.0 + 1e-6, 1.0));
  EXPECT_FALSE(BoundReport::Holds(1e-9, 0.0));
  BoundReport r;
  r.name = "x";
  r.measured = 0.5;
  r.bound = 1.0;
  r.margin = 0.5;
  r.trials = 3;
  r.pass = true;
  const auto j = nlohmann::json::parse(r.ToJson());
  EXPECT_EQ(j["name"], "x");
  EXPECT_EQ(j["trials"], 3);
  EXPECT_EQ(j["pass"], true);
  EXPECT_DOUBLE_EQ(j["margin"].get<double>(), 0.5);
  EXPECT_NE(FormatReportTable({r}).find("PASS"), std::string::npos);
}

TEST(GatedAttentionStackTest, ZeroGatesGiveZeroCorrection) {
  GatedAttentionStack stack(3, 8, 1, 2);
  stack.SetGates({0.0, 0.0, 0.0});
  Rng rng(4);
  BoundReport r = CheckDecomposition(stack, 3, 10, rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.measured, 0.0);
  EXPECT_EQ(r.bound, 0.0);
  EXPECT_EQ(r.margin, 0.0);
}

TEST(GatedAttentionStackTest, IdenticalAgentsHaveNoCrossCorrection) {
  GatedAttentionStack stack(2, 8, 1, 3);
  stack.SetGates({0.15, -0.12});
  Rng rng(6);
  const std::vector<double> one = Normals(8, rng, 2.0);
  std::vector<double> c;
  for (int i = 0; i < 4; ++i) c.insert(c.end(), one.begin(), one.end());
  EXPECT_EQ(FeatureDiversity(c, 4, 8), 0.0);
  const std::vector<double> joint = stack.Forward(c, 4), iso = stack.Isolated(c, 4);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(joint[i], iso[i], 1e-14);
}

TEST(GatedAttentionStackTest, SingleAgentIsExactlyIsolated) {
  GatedAttentionStack stack(3, 8, 1, 7);
  stack.SetGates({0.1, 0.1, -0.1});
  Rng rng(1);
  const std::vector<double> c = Normals(8, rng);
  EXPECT_EQ(stack.Forward(c, 1), stack.Isolated(c, 1));
}

TEST(GatedAttentionStackTest, RandomizedSuiteHasNoViolations) {
  BoundReport r = DecompositionSuite(270, 11);
  EXPECT_EQ(r.trials, 270);
  EXPECT_EQ(r.violations, 0) << r.detail;
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.measured, 0.0);
  // The bound should not be vacuous by orders of magnitude on the tightest trial.
  EXPECT_GT(r.measured / r.bound, 0.05);
}

TEST(GatedAttentionStackTest, UnderstatedSigmaIsCaught) {
  GatedAttentionStack stack(2, 16, 1, 9);
  stack.SetGates({0.15, 0.15});
  Rng rng(12);
  DecompositionOptions options;
  options.feature_scale = 2.0;
  options.sigma_bar_override = 0.05 * stack.SigmaBar();
  BoundReport r = CheckDecomposition(stack, 3, 20, rng, options);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.violations, 0);
  EXPECT_NE(r.failing_seed, 0u);

  BoundReport inflated = DecompositionSuite(30, 3, 0.15, 40.0);
  EXPECT_FALSE(inflated.pass);
}

TEST(GatedAttentionStackTest, DiversityRecurrenceHolds) {
  GatedAttentionStack stack(3, 12, 1, 21);
  stack.SetGates({0.15, -0.15, 0.15});
  const double sigma = stack.SigmaBar();
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> c = Normals(5 * 12, rng, 3.0);
    std::vector<std::vector<double>> per_layer;
    stack.Forward(c, 5, &per_layer);
    ASSERT_EQ(per_layer.size(), 4u);
    const double d0 = FeatureDiversity(per_layer[0], 5, 12);
    for (int l = 1; l <= 3; ++l) {
      EXPECT_LE(FeatureDiversity(per_layer[l], 5, 12), std::pow(1 + 3 * sigma, l) * d0);
    }
  }
}

TEST(TaylorControlTest, CoincidentTimesGiveZero) {
  Rng rng(3);
  testing::LinearTimeNet net({2, 4, 3}, rng);
  TaylorProbe probe;
  probe.z = RandomNormal({2, 2, 4, 3}, rng);
  probe.pairs = {{0.3, 0.3}, {0.7, 0.7}};
  BoundReport r = CheckTaylorControl(net, probe, 100);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.measured, 0.0);
  EXPECT_EQ(r.bound, 0.0);
  EXPECT_THROW(CheckTaylorControl(net, probe, 99), std::invalid_argument);
}

TEST(TaylorControlTest, LinearNetHitsTheFirstOrderTerm) {
  Rng rng(8);
  testing::LinearTimeNet net({2, 4, 3}, rng);
  double b_norm = 0.0;
  for (double v : net.b().values()) b_norm += v * v;
  b_norm = std::sqrt(b_norm);
  TaylorProbe probe;
  probe.z = RandomNormal({1, 2, 4, 3}, rng);
  probe.pairs = {{0.2, 0.6}};
  BoundReport r = CheckTaylorControl(net, probe, 100);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.measured, 0.16 * b_norm, 1e-12);
  // M2 = 0, M1 = 1.05 ||b||.
  EXPECT_NEAR(r.bound, 0.16 * 1.05 * b_norm, 1e-6);
}

TEST(TaylorControlTest, RandomBackboneOnRandomPairs) {
  BackboneConfig cfg;
  cfg.base_dim = 8;
  cfg.groups = 4;
  cfg.attn_heads = 2;
  cfg.n_agents = 2;
  cfg.horizon = 8;
  cfg.per_agent_dim = 3;
  VelocityNet net(cfg, 5);
  for (CvaLayer& layer : net.cva_layers()) layer.mutable_gamma().mutable_data()[0] = 0.1;
  Rng rng(10);
  TaylorProbe probe;
  const int items = 4;
  probe.pairs_per_item = 25;
  probe.z = RandomNormal({items, 2, 8, 3}, rng);
  probe.cond.returns = RandomUniform({items, 2}, rng, 0.0, 1.0);
  probe.cond.drop.assign(items, 0);
  probe.cond.obs = RandomNormal({items, 2, 1, 3}, rng);
  for (int i = 0; i < items * probe.pairs_per_item; ++i) {
    double r = rng.Uniform(), t = rng.Uniform();
    if (r > t) std::swap(r, t);
    probe.pairs.push_back({r, t});
  }
  BoundReport report = CheckTaylorControl(net, probe, 200);
  EXPECT_EQ(report.trials, 100);
  EXPECT_EQ(report.violations, 0) << report.detail;
}

TEST(EmpiricalW2Test, ClosedFormCases) {
  Rng rng(1);
  const std::vector<double> x = Normals(20, rng);
  EXPECT_EQ(EmpiricalW2(x, x, 10, 2), 0.0);
  EXPECT_NEAR(EmpiricalW2({1.0, 2.0}, {4.0, 6.0}, 1, 2), 5.0, 1e-15);
  EXPECT_NEAR(EmpiricalW2({0.0, 1.0}, {0.0, 2.0}, 2, 1), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(EmpiricalW2({0.0, 1.0}, {0.0}, 2, 1), std::invalid_argument);
  EXPECT_THROW(EmpiricalW2(std::vector<double>(257), std::vector<double>(257), 257, 1),
               std::invalid_argument);
}

TEST(EmpiricalW2Test, HungarianMatchesBruteForce) {
  Rng rng(17);
  for (int inst = 0; inst < 100; ++inst) {
    const int n = static_cast<int>(rng.UniformInt(1, 6));
    std::vector<double> cost(n * n);
    for (double& c : cost) c = rng.Uniform(0.0, 10.0);
    const std::vector<int> match = HungarianAssignment(cost, n);
    std::vector<int> sorted = match;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost[i * n + match[i]];
    EXPECT_DOUBLE_EQ(s, BruteForceCost(cost, n));
  }
}

TEST(EmpiricalW2Test, MetricAxioms) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12, d = 3;
    const auto a = Normals(n * d, rng), b = Normals(n * d, rng, 2.0), c = Normals(n * d, rng);
    const double ab = EmpiricalW2(a, b, n, d), ba = EmpiricalW2(b, a, n, d);
    const double ac = EmpiricalW2(a, c, n, d), cb = EmpiricalW2(c, b, n, d);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, ac + cb + 1e-9);
  }
}

TEST(W2BoundTest, OracleFieldRecoversRegressionGap) {
  GaussianToy toy{{0.5, -1.0}, 0.5};
  GaussianOracleField oracle(toy.mu);
  BoundReport r = CheckW2Bound(oracle, toy, 256, 5, 3);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_NE(r.detail.find("eps_train=0 "), std::string::npos) << r.detail;
  const double kappa = 0.5 * std::sqrt(2.0);
  EXPECT_NEAR(r.measured, kappa, 0.1 * kappa);
}

TEST(W2BoundTest, PointMassIsDegenerate) {
  GaussianToy toy{{0.25, 0.75}, 0.0};
  GaussianOracleField oracle(toy.mu);
  BoundReport r = CheckW2Bound(oracle, toy, 32, 3, 4);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.measured, 1e-15);
  EXPECT_LT(r.bound, 1e-15);
}

TEST(W2BoundTest, TrainedToyNetSatisfiesBound) {
  GaussianToy toy{{0.5, -0.5}, 0.5};
  ToyVelocityMlp net(2, 64, 1, toy.sigma);
  FlowConfig flow;
  TrainGaussianToy(net, toy, flow, 8000, 128, 1e-3, 2);
  BoundReport r = CheckW2Bound(net, toy, 256, 20, 9);
  EXPECT_EQ(r.trials, 20);
  EXPECT_EQ(r.violations, 0) << r.detail;

  // One-step samples land on the conditional mean, averaged over 1000 draws.
  Rng rng(33);
  Tensor x = OneStepSamples(net, 1000, 2, rng);
  double mean_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    mean_err += std::hypot(x.at(2 * i) - 0.5, x.at(2 * i + 1) + 0.5) / 1000;
  }
  EXPECT_LT(mean_err, 0.1 * toy.sigma);
}

TEST(ScalingProbeTest, NormalizedCorrectionIsFlat) {
  GatedAttentionStack stack(2, 16, 1, 4);
  stack.SetGates({0.15, 0.1});
  const auto rows = ScalingProbe({1, 2, 4, 8}, stack, 2.0, 10, 5);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].raw, 0.0);
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    lo = std::min(lo, rows[i].normalized);
    hi = std::max(hi, rows[i].normalized);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LE(hi / lo, 2.0);
  EXPECT_GT(rows[3].raw, rows[1].raw);

  stack.SetGates({0.0, 0.0});
  for (const ScalingRow& row : ScalingProbe({2, 4, 8}, stack, 2.0, 3, 5)) {
    EXPECT_EQ(row.raw, 0.0);
  }
}

TEST(BackboneDiagnosticTest, ReportsMeasuredCorrection) {
  BackboneConfig cfg;
  cfg.base_dim = 8;
  cfg.groups = 4;
  cfg.attn_heads = 2;
  cfg.n_agents = 3;
  cfg.horizon = 8;
  cfg.per_agent_dim = 4;
  VelocityNet net(cfg, 2);
  for (CvaLayer& layer : net.cva_layers()) layer.mutable_gamma().mutable_data()[0] = 0.1;
  Rng rng(3);
  Tensor z = RandomNormal({2, 3, 8, 4}, rng);
  Conditioning cond;
  cond.returns = Tensor::Full({2, 3}, 0.5);
  cond.drop.assign(2, 0);
  cond.obs = RandomNormal({2, 3, 1, 4}, rng);
  BoundReport r = DiagnoseBackboneDecomposition(net, z, 0.7, cond, 4, rng);
  EXPECT_GT(r.measured, 0.0);
  EXPECT_GT(r.bound, 0.0);
  EXPECT_NE(r.detail.find("not certified"), std::string::npos);
}

}  // namespace
}  // namespace coflow
