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


// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are pinned below. Usage: acceptance [--only 1,2,...] [--work DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coflow/backbone.h"
#include "coflow/dataset.h"
#include "coflow/flow.h"
#include "coflow/harness.h"
#include "coflow/ops.h"
#include "coflow/sampler.h"
#include "coflow/theory.h"
#include "coflow/trainer.h"
#include "support/op_suite.h"
#include "support/oracles.h"

namespace fs = std::filesystem;

namespace coflow {
namespace {

// Criterion 1.
constexpr int kGradTrials = 20;
constexpr double kGradTol = 1e-4;
// Criterion 2.
constexpr double kFrozenCopyTol = 1e-10;
constexpr int kTaylorItems = 20, kTaylorPairsPerItem = 25, kTaylorGrid = 200;
// Criterion 4.
constexpr int kDecompositionTrials = 1000;
constexpr double kMaxGate = 0.15;
// Criterion 5.
constexpr int kW2Trials = 20, kW2Samples = 256, kToySteps = 8000;
constexpr double kOracleRelTol = 0.10;
// Criterion 6.
constexpr int kHungarianInstances = 100;
constexpr double kHungarianTol = 1e-12;  // relative; summation order differs
// Criteria 7 and 8: desk experiment at reduced scale.
constexpr int kDatasetEpisodes = 1000;
constexpr std::uint64_t kDatasetSeed = 7;
constexpr int kTrainSteps = 4000;
constexpr int kBaseDim = 16;
constexpr double kTrainLr = 1e-3;
constexpr int kEvalEpisodes = 50, kEvalSeeds = 3;
constexpr double kStderrMultiple = 1.5;
// Criterion 9.
constexpr int kTimingEpisodes = 8;
constexpr double kMinLatencyRatio = 10.0;
constexpr double kRepeatSpread = 0.20;

struct Outcome {
  bool pass = false;
  std::string summary;
};

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

BackboneConfig SmallBackbone(int agents, int horizon, int dim) {
  BackboneConfig cfg;
  cfg.base_dim = 8;
  cfg.groups = 4;
  cfg.attn_heads = 2;
  cfg.n_agents = agents;
  cfg.horizon = horizon;
  cfg.per_agent_dim = dim;
  return cfg;
}

void OpenGates(VelocityNet& net, double gate) {
  for (CvaLayer& layer : net.cva_layers()) layer.mutable_gamma().mutable_data()[0] = gate;
}

Conditioning RandomCond(int batch, int agents, int dim, Rng& rng) {
  Conditioning cond;
  cond.returns = RandomUniform({batch, agents}, rng, 0.0, 1.0);
  cond.obs = RandomNormal({batch, agents, 1, dim}, rng);
  return cond;
}

Outcome GradientCorrectness() {
  int kinds = 0, failures = 0;
  double worst = 0.0;
  std::string first;
  for (OpKind kind : testing::SuiteKinds()) {
    const testing::OpSuiteResult r = testing::RunOpSuite(kind, kGradTrials, 1000, kGradTol);
    ++kinds;
    failures += r.failures;
    worst = std::max(worst, r.max_rel_error);
    if (r.failures && first.empty()) first = std::string(OpKindName(kind)) + ": " + r.first_failure;
  }
  Outcome o;
  o.pass = failures == 0 && kinds > 0;
  o.summary = std::to_string(kinds) + " op kinds x " + std::to_string(kGradTrials) +
              " trials, max rel err " + Fmt("%.2e", worst) + ", failures " +
              std::to_string(failures) + (first.empty() ? "" : " (" + first + ")");
  return o;
}

Outcome FdSurrogateContract() {
  const int n = 2, h = 8, d = 3;
  VelocityNet net(SmallBackbone(n, h, d), 6);
  OpenGates(net, 0.1);
  Rng rng(21);
  const Tensor z = RandomNormal({3, n, h, d}, rng);
  const Conditioning cond = RandomCond(3, n, d, rng);

  // (a) r = t collapse.
  bool collapse = true;
  {
    NoGradGuard guard;
    const std::vector<TimePair> pairs{{0.3, 0.3}, {0.7, 0.7}, {0.95, 0.95}};
    const Tensor v = FdSurrogate(net, z, pairs, cond);
    const Tensor u = net.Forward(z, TimeTensor({0, 0, 0}), TimeTensor({0.3, 0.7, 0.95}), cond);
    collapse = v.values() == u.values();
  }

  // (b) gradient only through u_r: compare with a frozen numeric copy.
  const Tensor y = RandomNormal(z.shape(), rng);
  const std::vector<TimePair> pairs{{0.2, 0.6}, {0.1, 0.9}, {0.5, 0.55}};
  net.parameters().ZeroGrad();
  Backward(VelocityLoss(FdSurrogate(net, z, pairs, cond), y));
  std::vector<std::vector<double>> live;
  for (const auto& e : net.parameters().entries()) live.push_back(e.value.grad());
  Tensor frozen;
  const Tensor r_times = TimeTensor({0.2, 0.1, 0.5}), zeros = TimeTensor({0, 0, 0});
  {
    NoGradGuard guard;
    const Tensor u_t = net.Forward(z, zeros, TimeTensor({0.6, 0.9, 0.55}), cond);
    const Tensor u_r = net.Forward(z, zeros, r_times, cond);
    std::vector<double> f(u_t.numel());
    const std::int64_t inner = u_t.numel() / 3;
    for (std::int64_t i = 0; i < u_t.numel(); ++i) {
      const TimePair& p = pairs[i / inner];
      f[i] = (p.t - p.r) * (u_t.at(i) - u_r.at(i));
    }
    frozen = Tensor(u_t.shape(), f);
  }
  net.parameters().ZeroGrad();
  Backward(VelocityLoss(ops::Add(net.Forward(z, zeros, r_times, cond), frozen), y));
  double max_diff = 0.0;
  for (std::size_t k = 0; k < live.size(); ++k) {
    const std::vector<double> g = net.parameters().entries()[k].value.grad();
    for (std::size_t i = 0; i < g.size(); ++i) max_diff = std::max(max_diff, std::abs(g[i] - live[k][i]));
  }
  net.parameters().ZeroGrad();

  // (c) Taylor control on randomized (z, r, t).
  TaylorProbe probe;
  probe.pairs_per_item = kTaylorPairsPerItem;
  probe.z = RandomNormal({kTaylorItems, n, h, d}, rng);
  probe.cond = RandomCond(kTaylorItems, n, d, rng);
  for (int i = 0; i < kTaylorItems * kTaylorPairsPerItem; ++i) {
    double r = rng.Uniform(), t = rng.Uniform();
    if (r > t) std::swap(r, t);
    probe.pairs.push_back({r, t});
  }
  const BoundReport taylor = CheckTaylorControl(net, probe, kTaylorGrid);

  Outcome o;
  o.pass = collapse && max_diff < kFrozenCopyTol && taylor.trials == 500 &&
           taylor.violations == 0 && taylor.pass;
  o.summary = std::string("(a) collapse ") + (collapse ? "bit-exact" : "MISMATCH") +
              ", (b) frozen-copy grad diff " + Fmt("%.2e", max_diff) + ", (c) " +
              std::to_string(taylor.trials) + " pairs, " + std::to_string(taylor.violations) +
              " violations, tightest " + Fmt("%.3g <= %.3g", taylor.measured, taylor.bound);
  return o;
}

Outcome ZeroGateIndependence() {
  int cases = 0, mismatches = 0, leaks = 0;
  for (int agents : {2, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const int h = 8, d = 4;
      VelocityNet net(SmallBackbone(agents, h, d), 40 + seed);
      Rng rng(50 + seed);
      const Tensor z = RandomNormal({2, agents, h, d}, rng);
      const Conditioning cond = RandomCond(2, agents, d, rng);
      const Tensor r = Tensor::Zeros({2}), t = RandomUniform({2}, rng, 0.0, 1.0);
      NoGradGuard guard;
      const Tensor joint = net.Forward(z, r, t, cond);
      mismatches += joint.values() != net.PerAgentForward(z, r, t, cond).values();
      // Perturb every teammate of agent 0 in both items.
      Tensor z2 = z.Clone();
      const std::int64_t block = h * d;
      for (int b = 0; b < 2; ++b) {
        for (std::int64_t i = block; i < agents * block; ++i) {
          z2.mutable_data()[b * agents * block + i] += rng.Normal();
        }
      }
      const Tensor moved = net.Forward(z2, r, t, cond);
      for (int b = 0; b < 2; ++b) {
        for (std::int64_t i = 0; i < block; ++i) {
          leaks += moved.at(b * agents * block + i) != joint.at(b * agents * block + i);
        }
      }
      ++cases;
    }
  }
  Outcome o;
  o.pass = mismatches == 0 && leaks == 0;
  o.summary = std::to_string(cases) + " nets (N in {2,3,5}): joint != per-agent in " +
              std::to_string(mismatches) + ", teammate leakage in " + std::to_string(leaks) +
              " outputs";
  return o;
}

Outcome DecompositionCertification() {
  const BoundReport r = DecompositionSuite(kDecompositionTrials, 4242, kMaxGate);
  Outcome o;
  o.pass = r.pass && r.violations == 0 && r.trials == kDecompositionTrials;
  o.summary = std::to_string(r.trials) + " trials, " + std::to_string(r.violations) +
              " violations (bound and diversity recurrence), tightest " +
              Fmt("%.4g <= %.4g", r.measured, r.bound) + "; " + r.detail;
  return o;
}

Outcome WassersteinBound() {
  const GaussianToy toy{{0.5, -0.5}, 0.5};
  ToyVelocityMlp net(2, 64, 11, toy.sigma);
  TrainGaussianToy(net, toy, FlowConfig{}, kToySteps, 128, 1e-3, 12);
  const BoundReport trained = CheckW2Bound(net, toy, kW2Samples, kW2Trials, 13);
  GaussianOracleField oracle(toy.mu);
  const BoundReport ora = CheckW2Bound(oracle, toy, kW2Samples, kW2Trials, 14);
  const double kappa = toy.sigma * std::sqrt(2.0);
  const double rel = std::abs(ora.measured - kappa) / kappa;
  Outcome o;
  o.pass = trained.pass && trained.violations == 0 && trained.trials == kW2Trials &&
           rel <= kOracleRelTol && ora.violations == 0;
  o.summary = std::to_string(trained.trials) + " trials n=" + std::to_string(kW2Samples) + ", " +
              std::to_string(trained.violations) + " violations, tightest " +
              Fmt("W2 %.4f <= %.4f", trained.measured, trained.bound) + " [" + trained.detail +
              "]; oracle W2 " + Fmt("%.4f vs kappa %.4f (rel %.3f)", ora.measured, kappa, rel);
  return o;
}

Outcome HungarianOracle() {
  Rng rng(77);
  int checked = 0, mismatches = 0;
  double worst = 0.0;
  for (int i = 0; i < kHungarianInstances; ++i) {
    const int n = 1 + i % 6, dim = 1 + (i / 6) % 3;
    std::vector<double> x(n * dim), y(n * dim);
    for (double& v : x) v = rng.Normal();
    for (double& v : y) v = rng.Normal();
    const double fast = EmpiricalW2(x, y, n, dim);
    const double brute = testing::BruteForceW2(x, y, n, dim);
    const double rel = std::abs(fast - brute) / std::max(1.0, brute);
    worst = std::max(worst, rel);
    mismatches += rel > kHungarianTol;
    ++checked;
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.summary = std::to_string(checked) + " instances n<=6, max rel diff " + Fmt("%.2e", worst) +
              ", mismatches " + std::to_string(mismatches);
  return o;
}

// Trained desk-scale models shared by criteria 7 and 8.
class DeskExperiment {
 public:
  explicit DeskExperiment(fs::path work) : work_(std::move(work)) {
    cfg_ = ProfileConfig("desk");
    cfg_.backbone.base_dim = kBaseDim;
    cfg_.backbone.groups = 8;
    cfg_.backbone.attn_heads = 4;
    cfg_.train.steps = kTrainSteps;
    cfg_.train.lr = kTrainLr;
    cfg_.train.grad_accum = 1;
    cfg_.eval_episodes = kEvalEpisodes;
    cfg_.eval_seeds = kEvalSeeds;
    cfg_.seed = 1;
    cfg_.Validate();
  }

  const RunConfig& config() const { return cfg_; }

  const Policy& Get(const std::string& variant) {
    std::unique_ptr<Policy>& slot = policies_[variant];
    if (slot) return *slot;
    if (!dataset_) {
      dataset_ = std::make_unique<OfflineDataset>(
          GenerateDataset(cfg_.env, Tier::kExpert, kDatasetEpisodes, kDatasetSeed));
    }
    const fs::path dir = work_ / variant;
    const auto t0 = std::chrono::steady_clock::now();
    Trainer trainer(cfg_.backbone, cfg_.flow, cfg_.train, Variant::Parse(variant), *dataset_,
                    cfg_.seed);
    std::ofstream log(dir.string() + ".train_log.csv");
    log << Trainer::LogHeader() << "\n";
    fs::create_directories(dir);
    trainer.Train(kTrainSteps, &log, dir.string());
    std::printf("  trained %s for %d steps in %.0fs\n", variant.c_str(), kTrainSteps,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::fflush(stdout);
    slot = std::make_unique<Policy>(LoadPolicy((dir / "ema.ckpt").string()));
    return *slot;
  }

  CellStats Cell(const Policy& policy, int k, double alpha, const VelocityModel* planner = nullptr) {
    SampleConfig s = cfg_.sample;
    s.steps = k;
    s.alpha_scale = alpha;
    s.decentralized = policy.variant.decentralized;
    CellStats c = EvaluateCell(policy, s, cfg_, planner);
    std::printf("  %-14s k=%-2d alpha=%.2f%s reward %8.3f +- %.3f  coverage %.3f\n",
                c.variant.c_str(), k, alpha, planner ? " per-agent" : "", c.mean_return,
                c.stderr_return, c.mean_coverage);
    std::fflush(stdout);
    return c;
  }

 private:
  fs::path work_;
  RunConfig cfg_;
  std::unique_ptr<OfflineDataset> dataset_;
  std::map<std::string, std::unique_ptr<Policy>> policies_;
};

double PooledStderr(const CellStats& a, const CellStats& b) {
  return std::sqrt(0.5 * (a.stderr_return * a.stderr_return + b.stderr_return * b.stderr_return));
}

Outcome FewStepPattern(DeskExperiment& x) {
  const Policy& coflow = x.Get("coflow-c");
  std::vector<CellStats> cells;
  for (int k = 1; k <= 10; ++k) cells.push_back(x.Cell(coflow, k, 1.0));
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].mean_return > cells[best].mean_return) best = i;
  }
  const double se_c = PooledStderr(cells[0], cells[best]);
  const double gap_c = cells[best].mean_return - cells[0].mean_return;
  const bool coflow_ok = gap_c <= kStderrMultiple * se_c;

  const Policy& base = x.Get("coflow-base-c");
  const CellStats b1 = x.Cell(base, 1, 1.0), b5 = x.Cell(base, 5, 1.0);
  const double se_b = PooledStderr(b1, b5);
  const double gap_b = b5.mean_return - b1.mean_return;
  const bool base_ok = gap_b >= kStderrMultiple * se_b;

  Outcome o;
  o.pass = coflow_ok && base_ok;
  o.summary = "coflow: R(1) " + Fmt("%.3f, best k=", cells[0].mean_return) +
              std::to_string(best + 1) + Fmt(" R %.3f, gap %.3f vs 1.5se %.3f", cells[best].mean_return,
                                             gap_c, kStderrMultiple * se_c) +
              (coflow_ok ? " ok" : " FAIL") + "; coflow-base: " +
              Fmt("R(5)-R(1) %.3f vs 1.5se %.3f", gap_b, kStderrMultiple * se_b) +
              (base_ok ? " ok" : " FAIL");
  return o;
}

Outcome DoseResponse(DeskExperiment& x) {
  const Policy& coflow = x.Get("coflow-c");
  const CellStats on = x.Cell(coflow, 1, 1.0), off = x.Cell(coflow, 1, 0.0);
  PerAgentPlanner planner(*coflow.net);
  const CellStats per_agent = x.Cell(coflow, 1, 1.0, &planner);
  const double se = PooledStderr(on, off);
  const double gap = on.mean_return - off.mean_return;
  const bool exact = off.returns == per_agent.returns && off.coverages == per_agent.coverages;
  Outcome o;
  o.pass = gap >= kStderrMultiple * se && on.mean_coverage > off.mean_coverage && exact;
  o.summary = Fmt("R(1)-R(0) %.3f vs 1.5se %.3f; coverage %.4f vs %.4f; ", gap,
                  kStderrMultiple * se, on.mean_coverage, off.mean_coverage) +
              "alpha=0 vs per-agent " + (exact ? "identical" : "DIFFERENT");
  return o;
}

Outcome TimingMethodology(const fs::path& work) {
  RunConfig cfg = ProfileConfig("desk");
  const OfflineDataset data = GenerateDataset(cfg.env, Tier::kExpert, 20, 3);
  const fs::path ckpt = work / "timing.ckpt";
  SavePolicy(Policy::Create(cfg.backbone, cfg.variant, cfg.env, data.stats, cfg.train.id_hidden, 9),
             ckpt.string());
  const Policy policy = LoadPolicy(ckpt.string());
  RolloutOptions defaults;
  const TimingReport a = BenchTiming(policy, cfg, 1, 15, kTimingEpisodes);
  const TimingReport b = BenchTiming(policy, cfg, 1, 15, kTimingEpisodes);
  const double spread = std::abs(a.latency_ratio - b.latency_ratio) /
                        std::min(a.latency_ratio, b.latency_ratio);
  Outcome o;
  o.pass = a.latency_ratio >= kMinLatencyRatio && b.latency_ratio >= kMinLatencyRatio &&
           spread <= kRepeatSpread && a.call_ratio == 15.0 && b.call_ratio == 15.0 &&
           defaults.warmup > 0;
  o.summary = Fmt("latency ratio %.2f / %.2f (spread %.1f%%), call ratio %.0f, ", a.latency_ratio,
                  b.latency_ratio, 100 * spread, a.call_ratio) +
              Fmt("k=1 %.2f ms/decision, k=15 %.2f ms/decision, warm-up %.0f decisions excluded",
                  a.small.per_decision_ms, a.large.per_decision_ms, defaults.warmup);
  return o;
}

std::string Bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome Determinism(const fs::path& work) {
  EnvConfig env;
  env.horizon = 8;
  const OfflineDataset d1 = GenerateDataset(env, Tier::kMedium, 30, 5);
  const OfflineDataset d2 = GenerateDataset(env, Tier::kMedium, 30, 5);
  WriteDataset(d1, (work / "d1.bin").string());
  WriteDataset(d2, (work / "d2.bin").string());
  const bool data_same = Bytes(work / "d1.bin") == Bytes(work / "d2.bin");
  const OfflineDataset back = ReadDataset((work / "d1.bin").string());
  bool data_round = back.trajectories.size() == d1.trajectories.size() && back.tier == d1.tier;
  for (std::size_t e = 0; data_round && e < d1.trajectories.size(); ++e) {
    const JointTrajectory &p = d1.trajectories[e], &q = back.trajectories[e];
    data_round = p.obs == q.obs && p.actions == q.actions && p.rewards == q.rewards &&
                 p.landmarks == q.landmarks && p.discounted_return == q.discounted_return;
  }
  WriteDataset(back, (work / "d3.bin").string());
  data_round = data_round && Bytes(work / "d3.bin") == Bytes(work / "d1.bin");

  BackboneConfig bb = SmallBackbone(env.n_agents, env.horizon, env.ObsDim());
  TrainConfig tc;
  tc.grad_accum = 1;
  tc.batch = 8;
  auto train_log = [&](const std::string& dir) {
    Trainer trainer(bb, FlowConfig{}, tc, Variant{}, d1, 17);
    std::ostringstream log;
    trainer.Train(15, &log, (work / dir).string());
    return log.str();
  };
  const std::string log1 = train_log("run1");
  // Shift the heap so the second run sees different buffer addresses.
  std::vector<std::unique_ptr<char[]>> shift;
  for (int i = 0; i < 64; ++i) shift.emplace_back(new char[8 * i + 24]);
  const std::string log2 = train_log("run2");
  const bool logs_same = log1 == log2 && !log1.empty();
  const bool ckpt_same = Bytes(work / "run1/ema.ckpt") == Bytes(work / "run2/ema.ckpt") &&
                         Bytes(work / "run1/live.ckpt") == Bytes(work / "run2/live.ckpt");
  const Policy loaded = LoadPolicy((work / "run1/live.ckpt").string());
  SavePolicy(loaded, (work / "resaved.ckpt").string());
  const bool ckpt_round = Bytes(work / "resaved.ckpt") == Bytes(work / "run1/live.ckpt");

  Outcome o;
  o.pass = data_same && data_round && logs_same && ckpt_same && ckpt_round;
  auto flag = [](bool b) { return b ? "ok" : "FAIL"; };
  o.summary = std::string("dataset files identical ") + flag(data_same) + ", dataset round-trip " +
              flag(data_round) + ", training logs identical " + flag(logs_same) +
              ", checkpoints identical " + flag(ckpt_same) + ", checkpoint round-trip " +
              flag(ckpt_round);
  return o;
}

}  // namespace
}  // namespace coflow

int main(int argc, char** argv) {
  using namespace coflow;
  std::vector<int> only;
  fs::path work = fs::temp_directory_path() / "coflow_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.push_back(std::stoi(tok));
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...] [--work DIR]\n", argv[0]);
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);
  DeskExperiment desk(work / "desk");

  struct Entry {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria = {
      {1, "gradient correctness", GradientCorrectness},
      {2, "fd-surrogate contract", FdSurrogateContract},
      {3, "zero-gate independence", ZeroGateIndependence},
      {4, "decomposition certification", DecompositionCertification},
      {5, "wasserstein bound", WassersteinBound},
      {6, "w2 oracle correctness", HungarianOracle},
      {7, "few-step pattern", [&] { return FewStepPattern(desk); }},
      {8, "dose-response pattern", [&] { return DoseResponse(desk); }},
      {9, "timing methodology", [&] { return TimingMethodology(work); }},
      {10, "determinism and serialization", [&] { return Determinism(work); }},
  };
  int failed = 0, ran = 0;
  for (const Entry& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s [%.1fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.title,
                o.summary.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
    ++ran;
  }
  std::printf("acceptance: %d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
