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


// Experiment plumbing shared by the command-line tool and the acceptance
// suite: run configuration, evaluation cells, sweeps, timing, chart output
// and the theory certification bundle.

#ifndef COFLOW_HARNESS_H_
#define COFLOW_HARNESS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "coflow/backbone.h"
#include "coflow/dataset.h"
#include "coflow/env.h"
#include "coflow/flow.h"
#include "coflow/policy.h"
#include "coflow/sampler.h"
#include "coflow/theory.h"
#include "coflow/trainer.h"

namespace coflow {

struct RunConfig {
  std::string profile = "desk";
  EnvConfig env;
  BackboneConfig backbone;
  FlowConfig flow;
  TrainConfig train;
  SampleConfig sample;
  Variant variant;
  Tier tier = Tier::kExpert;
  int dataset_episodes = 1000;
  std::uint64_t seed = 0;
  std::string out_dir = "runs";
  // Episodes per evaluation seed, and evaluation seeds per cell.
  int eval_episodes = 50;
  int eval_seeds = 3;
  double target_return = 0.9;
  int lockstep = 50;
  std::vector<int> steps_grid{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> alpha_grid{0.0, 0.25, 0.5, 0.75, 1.0};

  // Checks every section plus cross-section agreement (agents, horizon,
  // observation width).
  void Validate() const;
};

// "desk" or "paper"; throws std::invalid_argument otherwise.
RunConfig ProfileConfig(const std::string& profile);
// Overlays a JSON document on `cfg`. Unknown keys at any level throw
// std::invalid_argument. A "profile" key is applied first.
void MergeRunConfigJson(const std::string& text, RunConfig* cfg);
std::string RunConfigToJson(const RunConfig& cfg);

// Quantiles of episode return and final coverage over the corpus.
std::string CorpusStatsTable(const OfflineDataset& dataset);

// Aggregate of eval_seeds x eval_episodes rollouts.
struct CellStats {
  std::string variant;
  int k = 1;
  double alpha = 1.0;
  double omega = 1.0;
  std::string mode;
  int episodes = 0;
  double mean_return = 0.0;
  double stderr_return = 0.0;
  double mean_coverage = 0.0;
  double stderr_coverage = 0.0;
  double median_latency_ms = 0.0;
  std::vector<double> returns;  // per episode, seed-major
  std::vector<double> coverages;
};

// Evaluation seed s of a cell; identical across cells so sweeps compare
// the same episodes.
std::uint64_t EvalSeed(std::uint64_t run_seed, int s);

CellStats EvaluateCell(const Policy& policy, const SampleConfig& sample, const RunConfig& cfg,
                       const VelocityModel* planner = nullptr);

std::string CellCsvHeader();
std::string CellCsvRow(const CellStats& cell);

// The backbone evaluated through its per-agent path only.
class PerAgentPlanner : public VelocityModel {
 public:
  explicit PerAgentPlanner(const VelocityNet& net) : net_(net) {}
  Tensor Forward(const Tensor& z, const Tensor& r, const Tensor& t, const Conditioning& cond,
                 double alpha_scale = 1.0, ForwardDiagnostics* diag = nullptr) const override;
  ParameterSet& parameters() override { return empty_; }
  const ParameterSet& parameters() const override { return net_.parameters(); }

 private:
  const VelocityNet& net_;
  ParameterSet empty_;
};

struct SvgSeries {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> err;  // optional error bars
};
// Standalone SVG line chart with axes, ticks and a legend.
std::string SvgLineChart(const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<SvgSeries>& series);

struct TimingRow {
  int k = 1;
  double calls_per_decision = 0.0;
  double per_call_ms = 0.0;
  double per_decision_ms = 0.0;
  // Per-decision latency times the number of decisions in an episode.
  double full_rollout_s = 0.0;
};

struct TimingReport {
  TimingRow small, large;
  double latency_ratio = 0.0;
  double call_ratio = 0.0;
};

TimingReport BenchTiming(const Policy& policy, const RunConfig& cfg, int k_small = 1,
                         int k_large = 15, int episodes = 20);
std::string TimingCsvHeader();
std::string TimingCsvRows(const TimingReport& report, int repeat);

// Per CVA layer: gamma, ||W_V||_2 and their product.
std::string GateJson(const VelocityNet& net);
// Head/token/batch-averaged attention per CVA layer on dataset windows
// evaluated at t = 1, plus the gates.
std::string AttentionJson(const Policy& policy, const OfflineDataset& dataset, int batch,
                          std::uint64_t seed);

struct TheoryOptions {
  std::uint64_t seed = 0;
  int decomposition_trials = 1000;
  int taylor_items = 20;
  int taylor_pairs_per_item = 25;
  int taylor_grid = 200;
  int w2_trials = 20;
  int w2_samples = 256;
  int toy_steps = 8000;
  // Scales every stack gate after sigma_bar is measured (harness sabotage).
  double gate_inflation = 1.0;
  // Net for the Taylor and backbone checks; a fresh small backbone with
  // nonzero gates when null.
  const VelocityNet* net = nullptr;
};

// Taylor control, decomposition suite, one-step W2 bound, scaling probe and
// the full-backbone diagnostic (last; excluded from AllCertified).
std::vector<BoundReport> RunTheorySuites(const TheoryOptions& options);
bool AllCertified(const std::vector<BoundReport>& reports);

}  // namespace coflow

#endif  // COFLOW_HARNESS_H_
