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


// coflow: dataset generation, training, sweeps, theory checks and timing.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coflow/harness.h"

namespace fs = std::filesystem;
using namespace coflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitBadInput = 2;

// Raised for conditions the caller can fix: bad flags, files, configs.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::string config_path;
  std::string profile = "desk";
  std::string variant;
  std::string out;
  std::int64_t seed = -1;
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InputError("cannot write " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

RunConfig LoadConfig(const GlobalFlags& g) {
  try {
    RunConfig cfg = ProfileConfig(g.profile);
    if (!g.config_path.empty()) MergeRunConfigJson(Slurp(g.config_path), &cfg);
    if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
    if (!g.variant.empty()) cfg.variant = Variant::Parse(g.variant);
    if (!g.out.empty()) cfg.out_dir = g.out;
    cfg.Validate();
    return cfg;
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

OfflineDataset LoadDataset(const std::string& path) {
  try {
    return ReadDataset(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

Policy LoadCheckpoint(const std::string& path) {
  if (!fs::exists(path)) throw InputError("missing checkpoint " + path);
  try {
    return LoadPolicy(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

// Evaluation settings of `cfg` applied to a loaded policy. The sampling mode
// follows the checkpoint's variant.
SampleConfig SampleFor(const RunConfig& cfg, const Policy& policy) {
  SampleConfig s = cfg.sample;
  s.decentralized = policy.variant.decentralized;
  return s;
}

int CmdGenData(const GlobalFlags& g, const std::string& tier_name, int episodes,
               const std::string& output) {
  RunConfig cfg = LoadConfig(g);
  if (!tier_name.empty()) cfg.tier = ParseTier(tier_name);
  if (episodes > 0) cfg.dataset_episodes = episodes;
  const fs::path path =
      output.empty() ? fs::path(cfg.out_dir) / ("dataset_" + TierName(cfg.tier) + ".bin")
                     : fs::path(output);
  const OfflineDataset data = GenerateDataset(cfg.env, cfg.tier, cfg.dataset_episodes, cfg.seed);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriteDataset(data, path.string());
  std::cout << CorpusStatsTable(data) << "wrote " << path.string() << "\n";
  return kExitOk;
}

int CmdTrain(const GlobalFlags& g, const std::string& data_path, int steps) {
  RunConfig cfg = LoadConfig(g);
  const OfflineDataset data = LoadDataset(data_path);
  if (data.env.n_agents != cfg.env.n_agents || data.env.horizon != cfg.env.horizon ||
      data.env.ObsDim() != cfg.env.ObsDim()) {
    throw InputError("dataset " + data_path + " (agents " + std::to_string(data.env.n_agents) +
                     ", horizon " + std::to_string(data.env.horizon) +
                     ") does not match the run config");
  }
  if (steps >= 0) cfg.train.steps = steps;
  const fs::path dir = fs::path(cfg.out_dir) / cfg.variant.Name();
  fs::create_directories(dir);
  WriteText(dir / "config.json", RunConfigToJson(cfg));
  Trainer trainer(cfg.backbone, cfg.flow, cfg.train, cfg.variant, data, cfg.seed);
  std::ofstream log(dir / "train_log.csv");
  log << Trainer::LogHeader() << "\n";
  const int every = std::max(1, cfg.train.steps / 20);
  trainer.Train(cfg.train.steps, &log, dir.string(), [&](const LossReport& r) {
    if ((r.step + 1) % every == 0 || r.step + 1 == cfg.train.steps) {
      std::printf("step %ld  L_vel %.5f  L_act %.6f  |g| %.3f\n", r.step + 1, r.l_vel, r.l_act,
                  r.grad_norm);
      std::fflush(stdout);
    }
  });
  std::cout << "wrote " << (dir / "train_log.csv").string() << ", live.ckpt, ema.ckpt\n";
  return kExitOk;
}

int CmdSweepSteps(const GlobalFlags& g, const std::vector<std::string>& checkpoints) {
  RunConfig cfg = LoadConfig(g);
  std::vector<Policy> policies;
  for (const std::string& path : checkpoints) policies.push_back(LoadCheckpoint(path));
  std::ostringstream csv;
  csv << CellCsvHeader() << "\n";
  std::vector<SvgSeries> series;
  for (const Policy& policy : policies) {
    SvgSeries s{policy.variant.Name(), {}, {}, {}};
    for (int k : cfg.steps_grid) {
      SampleConfig sample = SampleFor(cfg, policy);
      sample.steps = k;
      const CellStats cell = EvaluateCell(policy, sample, cfg);
      csv << CellCsvRow(cell) << "\n";
      std::printf("%-14s k=%-2d reward %8.3f +- %.3f  coverage %.3f\n", cell.variant.c_str(), k,
                  cell.mean_return, cell.stderr_return, cell.mean_coverage);
      std::fflush(stdout);
      s.x.push_back(k);
      s.y.push_back(cell.mean_return);
      s.err.push_back(cell.stderr_return);
    }
    series.push_back(std::move(s));
  }
  const fs::path dir(cfg.out_dir);
  WriteText(dir / "sweep_steps.csv", csv.str());
  WriteText(dir / "sweep_steps.svg",
            SvgLineChart("Reward vs denoising steps", "steps k", "episode reward", series));
  return kExitOk;
}

int CmdSweepAlpha(const GlobalFlags& g, const std::string& checkpoint) {
  RunConfig cfg = LoadConfig(g);
  const Policy policy = LoadCheckpoint(checkpoint);
  std::ostringstream csv;
  csv << CellCsvHeader() << "\n";
  SvgSeries reward{"reward", {}, {}, {}}, coverage{"coverage", {}, {}, {}};
  for (double a : cfg.alpha_grid) {
    SampleConfig sample = SampleFor(cfg, policy);
    sample.alpha_scale = a;
    const CellStats cell = EvaluateCell(policy, sample, cfg);
    csv << CellCsvRow(cell) << "\n";
    std::printf("alpha=%.2f reward %8.3f +- %.3f  coverage %.3f +- %.3f\n", a, cell.mean_return,
                cell.stderr_return, cell.mean_coverage, cell.stderr_coverage);
    std::fflush(stdout);
    reward.x.push_back(a);
    reward.y.push_back(cell.mean_return);
    reward.err.push_back(cell.stderr_return);
    coverage.x.push_back(a);
    coverage.y.push_back(cell.mean_coverage);
    coverage.err.push_back(cell.stderr_coverage);
  }
  const fs::path dir(cfg.out_dir);
  WriteText(dir / "sweep_alpha.csv", csv.str());
  WriteText(dir / "sweep_alpha_reward.svg",
            SvgLineChart("Reward vs gating factor", "alpha", "episode reward", {reward}));
  WriteText(dir / "sweep_alpha_coverage.svg",
            SvgLineChart("Coverage vs gating factor", "alpha", "coverage rate", {coverage}));
  WriteText(dir / "gates.json", GateJson(*policy.net));
  return kExitOk;
}

int CmdVerifyTheory(const GlobalFlags& g, bool sabotage, int trials, int toy_steps,
                    const std::string& checkpoint) {
  RunConfig cfg = LoadConfig(g);
  TheoryOptions options;
  options.seed = cfg.seed;
  if (trials > 0) options.decomposition_trials = trials;
  if (toy_steps > 0) options.toy_steps = toy_steps;
  if (sabotage) options.gate_inflation = 100.0;
  Policy policy;
  if (!checkpoint.empty()) {
    policy = LoadCheckpoint(checkpoint);
    options.net = policy.net.get();
  }
  const std::vector<BoundReport> reports = RunTheorySuites(options);
  std::cout << FormatReportTable(reports);
  WriteText(fs::path(cfg.out_dir) / "theory.json", ReportsToJson(reports));
  const bool ok = AllCertified(reports);
  std::cout << (ok ? "all certified suites pass\n" : "certification FAILED\n");
  return ok ? kExitOk : kExitFailed;
}

int CmdBenchTiming(const GlobalFlags& g, const std::string& checkpoint, int episodes) {
  RunConfig cfg = LoadConfig(g);
  const Policy policy = LoadCheckpoint(checkpoint);
  cfg.sample = SampleFor(cfg, policy);
  std::ostringstream csv;
  csv << TimingCsvHeader() << "\n";
  TimingReport first;
  for (int repeat = 0; repeat < 2; ++repeat) {
    const TimingReport r = BenchTiming(policy, cfg, 1, 15, episodes);
    if (repeat == 0) first = r;
    csv << TimingCsvRows(r, repeat);
    std::printf("repeat %d: k=1 %.3f ms/decision, k=15 %.3f ms/decision, ratio %.2f (calls %.0f)\n",
                repeat, r.small.per_decision_ms, r.large.per_decision_ms, r.latency_ratio,
                r.call_ratio);
  }
  WriteText(fs::path(cfg.out_dir) / "timing.csv", csv.str());
  return kExitOk;
}

int CmdDiagAttn(const GlobalFlags& g, const std::string& checkpoint, const std::string& data_path,
                int batch) {
  RunConfig cfg = LoadConfig(g);
  const Policy policy = LoadCheckpoint(checkpoint);
  const OfflineDataset data = LoadDataset(data_path);
  WriteText(fs::path(cfg.out_dir) / "attention.json",
            AttentionJson(policy, data, batch, cfg.seed));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coflow: few-step multi-agent flow planner"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config_path, "JSON run config overlay");
  app.add_option("--profile", g.profile, "Base profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", g.seed, "Run seed")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--variant", g.variant, "coflow-c, coflow-d, coflow-base-c or coflow-base-d");

  std::string tier, output, data_path, checkpoint;
  int episodes = 0, steps = -1, trials = 0, toy_steps = 0, batch = 16, bench_episodes = 20;
  bool sabotage = false;
  std::vector<std::string> checkpoints;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  gen->add_option("--tier", tier, "expert, medium or random");
  gen->add_option("--episodes", episodes, "Episode count");
  gen->add_option("--output", output, "Dataset path");

  CLI::App* train = app.add_subcommand("train", "Train a policy");
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--steps", steps, "Optimizer steps (overrides config)");

  CLI::App* sweep_k = app.add_subcommand("sweep-steps", "Reward vs denoising steps");
  sweep_k->add_option("--checkpoint", checkpoints, "Checkpoint(s), one per variant")->required();

  CLI::App* sweep_a = app.add_subcommand("sweep-alpha", "Reward and coverage vs gating factor");
  sweep_a->add_option("--checkpoint", checkpoint, "Checkpoint")->required();

  CLI::App* theory = app.add_subcommand("verify-theory", "Run the bound certification suites");
  theory->add_flag("--sabotage", sabotage, "Inflate stack gates 100x past the certified bound");
  theory->add_option("--trials", trials, "Decomposition trials");
  theory->add_option("--toy-steps", toy_steps, "Gaussian toy training steps");
  theory->add_option("--checkpoint", checkpoint, "Backbone for the Taylor and diagnostic checks");

  CLI::App* bench = app.add_subcommand("bench-timing", "Latency of k=1 vs k=15 planning");
  bench->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  bench->add_option("--episodes", bench_episodes, "Episodes per measurement");

  CLI::App* diag = app.add_subcommand("diag-attn", "Dump attention matrices and gates");
  diag->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  diag->add_option("--data", data_path, "Dataset file")->required();
  diag->add_option("--batch", batch, "Windows to average over");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*gen) return CmdGenData(g, tier, episodes, output);
    if (*train) return CmdTrain(g, data_path, steps);
    if (*sweep_k) return CmdSweepSteps(g, checkpoints);
    if (*sweep_a) return CmdSweepAlpha(g, checkpoint);
    if (*theory) return CmdVerifyTheory(g, sabotage, trials, toy_steps, checkpoint);
    if (*bench) return CmdBenchTiming(g, checkpoint, bench_episodes);
    if (*diag) return CmdDiagAttn(g, checkpoint, data_path, batch);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitBadInput;
}
