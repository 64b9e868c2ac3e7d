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


#include "coflow/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "coflow/ops.h"
#include "config_json.h"

namespace coflow {
namespace {

using config_json::FromJson;
using config_json::json;
using config_json::ToJson;

std::string Num(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

double StdErr(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1) / v.size());
}

double Quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

json ToJsonRun(const RunConfig& c) {
  return {{"profile", c.profile},
          {"env", ToJson(c.env)},
          {"backbone", ToJson(c.backbone)},
          {"flow", ToJson(c.flow)},
          {"train", ToJson(c.train)},
          {"sample", ToJson(c.sample)},
          {"variant", c.variant.Name()},
          {"tier", TierName(c.tier)},
          {"dataset_episodes", c.dataset_episodes},
          {"seed", c.seed},
          {"out_dir", c.out_dir},
          {"eval_episodes", c.eval_episodes},
          {"eval_seeds", c.eval_seeds},
          {"target_return", c.target_return},
          {"lockstep", c.lockstep},
          {"steps_grid", c.steps_grid},
          {"alpha_grid", c.alpha_grid}};
}

}  // namespace

void RunConfig::Validate() const {
  env.Validate();
  backbone.Validate();
  flow.Validate();
  train.Validate();
  sample.Validate();
  if (backbone.n_agents != env.n_agents || backbone.horizon != env.horizon ||
      backbone.per_agent_dim != env.ObsDim()) {
    throw std::invalid_argument(
        "run config: backbone (n_agents, horizon, per_agent_dim) must match the env (" +
        std::to_string(env.n_agents) + ", " + std::to_string(env.horizon) + ", " +
        std::to_string(env.ObsDim()) + ")");
  }
  if (dataset_episodes < 1 || eval_episodes < 1 || eval_seeds < 1 || lockstep < 1) {
    throw std::invalid_argument(
        "run config: dataset_episodes, eval_episodes, eval_seeds and lockstep must be >= 1");
  }
  if (!std::isfinite(target_return)) {
    throw std::invalid_argument("run config: target_return must be finite");
  }
  for (int k : steps_grid) {
    if (k < 1) throw std::invalid_argument("run config: steps_grid entries must be >= 1");
  }
  for (double a : alpha_grid) {
    if (!(a >= 0.0)) throw std::invalid_argument("run config: alpha_grid entries must be >= 0");
  }
}

RunConfig ProfileConfig(const std::string& profile) {
  RunConfig cfg;
  cfg.backbone.n_agents = cfg.env.n_agents;
  cfg.backbone.horizon = cfg.env.horizon;
  cfg.backbone.per_agent_dim = cfg.env.ObsDim();
  if (profile == "desk") {
    cfg.profile = "desk";
    cfg.backbone.base_dim = 32;
    cfg.backbone.dim_mults = {1, 2, 4};
  } else if (profile == "paper") {
    cfg.profile = "paper";
    cfg.backbone.base_dim = 128;
    cfg.backbone.dim_mults = {1, 4, 8};
  } else {
    throw std::invalid_argument("unknown profile '" + profile + "' (expected desk or paper)");
  }
  return cfg;
}

void MergeRunConfigJson(const std::string& text, RunConfig* cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  config_json::RejectUnknown(
      j, "run config",
      {"profile", "env", "backbone", "flow", "train", "sample", "variant", "tier",
       "dataset_episodes", "seed", "out_dir", "eval_episodes", "eval_seeds", "target_return",
       "lockstep", "steps_grid", "alpha_grid"});
  try {
    if (j.contains("profile")) *cfg = ProfileConfig(j.at("profile").get<std::string>());
    if (j.contains("env")) FromJson(j.at("env"), cfg->env);
    if (j.contains("backbone")) FromJson(j.at("backbone"), cfg->backbone);
    if (j.contains("flow")) FromJson(j.at("flow"), cfg->flow);
    if (j.contains("train")) FromJson(j.at("train"), cfg->train);
    if (j.contains("sample")) FromJson(j.at("sample"), cfg->sample);
    if (j.contains("variant")) cfg->variant = Variant::Parse(j.at("variant").get<std::string>());
    if (j.contains("tier")) cfg->tier = ParseTier(j.at("tier").get<std::string>());
    config_json::Read(j, "dataset_episodes", cfg->dataset_episodes);
    config_json::Read(j, "seed", cfg->seed);
    config_json::Read(j, "out_dir", cfg->out_dir);
    config_json::Read(j, "eval_episodes", cfg->eval_episodes);
    config_json::Read(j, "eval_seeds", cfg->eval_seeds);
    config_json::Read(j, "target_return", cfg->target_return);
    config_json::Read(j, "lockstep", cfg->lockstep);
    config_json::Read(j, "steps_grid", cfg->steps_grid);
    config_json::Read(j, "alpha_grid", cfg->alpha_grid);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
}

std::string RunConfigToJson(const RunConfig& cfg) { return ToJsonRun(cfg).dump(2); }

std::string CorpusStatsTable(const OfflineDataset& dataset) {
  const int n = dataset.env.n_agents, l = dataset.env.n_landmarks, h = dataset.env.horizon;
  std::vector<double> disc, total, coverage;
  for (int e = 0; e < static_cast<int>(dataset.trajectories.size()); ++e) {
    const JointTrajectory& tr = dataset.trajectories[e];
    disc.push_back(tr.discounted_return);
    double sum = 0.0;
    for (double r : tr.rewards) sum += r;
    total.push_back(sum);
    int covered = 0;
    for (int j = 0; j < l; ++j) {
      double best = INFINITY;
      for (int i = 0; i < n; ++i) {
        best = std::min(best, std::hypot(dataset.ObsAt(e, i, h - 1, 4 + 2 * j),
                                         dataset.ObsAt(e, i, h - 1, 5 + 2 * j)));
      }
      covered += best <= dataset.env.coverage_threshold;
    }
    coverage.push_back(static_cast<double>(covered) / l);
  }
  std::ostringstream os;
  os << "tier " << TierName(dataset.tier) << ", " << dataset.trajectories.size()
     << " episodes, seed " << dataset.seed << "\n";
  char line[200];
  std::snprintf(line, sizeof(line), "%-18s %9s %9s %9s %9s %9s %9s\n", "quantity", "min", "q25",
                "median", "q75", "max", "mean");
  os << line;
  auto row = [&](const char* name, const std::vector<double>& v) {
    std::snprintf(line, sizeof(line), "%-18s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", name,
                  Quantile(v, 0.0), Quantile(v, 0.25), Quantile(v, 0.5), Quantile(v, 0.75),
                  Quantile(v, 1.0), Mean(v));
    os << line;
  };
  row("discounted_return", disc);
  row("episode_return", total);
  row("final_coverage", coverage);
  return os.str();
}

std::uint64_t EvalSeed(std::uint64_t run_seed, int s) {
  return SplitMix(SplitMix(run_seed) + static_cast<std::uint64_t>(s));
}

CellStats EvaluateCell(const Policy& policy, const SampleConfig& sample, const RunConfig& cfg,
                       const VelocityModel* planner) {
  CellStats cell;
  cell.variant = policy.variant.Name();
  cell.k = sample.steps;
  cell.alpha = sample.alpha_scale;
  cell.omega = sample.guidance;
  cell.mode = sample.ModeName();
  std::vector<double> latency;
  for (int s = 0; s < cfg.eval_seeds; ++s) {
    RolloutOptions options;
    options.episodes = cfg.eval_episodes;
    options.seed = EvalSeed(cfg.seed, s);
    options.target_return = cfg.target_return;
    options.lockstep = cfg.lockstep;
    options.planner = planner;
    const RolloutReport report = Rollout(policy, sample, options);
    for (const EpisodeResult& e : report.episodes) {
      cell.returns.push_back(e.ret);
      cell.coverages.push_back(e.coverage_mean);
    }
    latency.insert(latency.end(), report.latency_ms.begin(), report.latency_ms.end());
  }
  cell.episodes = static_cast<int>(cell.returns.size());
  cell.mean_return = Mean(cell.returns);
  cell.stderr_return = StdErr(cell.returns);
  cell.mean_coverage = Mean(cell.coverages);
  cell.stderr_coverage = StdErr(cell.coverages);
  cell.median_latency_ms = Quantile(latency, 0.5);
  return cell;
}

std::string CellCsvHeader() {
  return "variant,k,alpha,omega,mode,episodes,mean_return,stderr_return,mean_coverage,"
         "stderr_coverage,median_latency_ms";
}

std::string CellCsvRow(const CellStats& c) {
  return c.variant + "," + std::to_string(c.k) + "," + Num(c.alpha) + "," + Num(c.omega) + "," +
         c.mode + "," + std::to_string(c.episodes) + "," + Num(c.mean_return) + "," +
         Num(c.stderr_return) + "," + Num(c.mean_coverage) + "," + Num(c.stderr_coverage) +
         "," + Num(c.median_latency_ms, "%.4f");
}

Tensor PerAgentPlanner::Forward(const Tensor& z, const Tensor& r, const Tensor& t,
                                const Conditioning& cond, double, ForwardDiagnostics*) const {
  return net_.PerAgentForward(z, r, t, cond);
}

std::string SvgLineChart(const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<SvgSeries>& series) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 160, kTop = 40, kBottom = 55;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const SvgSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - e);
      y1 = std::max(y1, s.y[i] + e);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << XmlEscape(title) << "</text>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
     << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kTop + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    os << "<line x1=\"" << px(xv) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(xv)
       << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
       << Num(xv, "%.3g") << "</text>\n"
       << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << kLeft
       << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
       << Num(yv, "%.3g") << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
     << XmlEscape(x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + ph / 2 << ")\">" << XmlEscape(y_label) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    const char* color = kColors[si % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << (i ? " " : "") << px(s.x[i]) << "," << py(s.y[i]);
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
      if (i < s.err.size() && s.err[i] > 0.0) {
        os << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(s.y[i] - s.err[i]) << "\" x2=\""
           << px(s.x[i]) << "\" y2=\"" << py(s.y[i] + s.err[i]) << "\" stroke=\"" << color
           << "\"/>\n";
      }
    }
    const double ly = kTop + 10 + 18 * si;
    os << "<line x1=\"" << kLeft + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 35
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly + 4 << "\">" << XmlEscape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

TimingReport BenchTiming(const Policy& policy, const RunConfig& cfg, int k_small, int k_large,
                         int episodes) {
  auto measure = [&](int k) {
    SampleConfig sample = cfg.sample;
    sample.steps = k;
    RolloutOptions options;
    options.episodes = episodes;
    options.seed = EvalSeed(cfg.seed, 0);
    options.target_return = cfg.target_return;
    // One lockstep group, so every batched call serves each episode once.
    options.lockstep = episodes;
    options.threads = 1;
    const RolloutReport report = Rollout(policy, sample, options);
    TimingRow row;
    row.k = k;
    row.calls_per_decision =
        static_cast<double>(report.model_calls) * episodes / report.decisions;
    row.per_decision_ms = report.MedianLatencyMs();
    row.per_call_ms = row.per_decision_ms / row.calls_per_decision;
    row.full_rollout_s = row.per_decision_ms * (policy.env.horizon - 1) / 1000.0;
    return row;
  };
  TimingReport report;
  report.small = measure(k_small);
  report.large = measure(k_large);
  report.latency_ratio = report.large.per_decision_ms / report.small.per_decision_ms;
  report.call_ratio = report.large.calls_per_decision / report.small.calls_per_decision;
  return report;
}

std::string TimingCsvHeader() {
  return "repeat,k,calls_per_decision,per_call_ms,per_decision_ms,full_rollout_s,latency_ratio,"
         "call_ratio";
}

std::string TimingCsvRows(const TimingReport& r, int repeat) {
  std::string out;
  for (const TimingRow* row : {&r.small, &r.large}) {
    out += std::to_string(repeat) + "," + std::to_string(row->k) + "," +
           Num(row->calls_per_decision) + "," + Num(row->per_call_ms, "%.4f") + "," +
           Num(row->per_decision_ms, "%.4f") + "," + Num(row->full_rollout_s, "%.4f") + "," +
           Num(r.latency_ratio, "%.4f") + "," + Num(r.call_ratio) + "\n";
  }
  return out;
}

std::string GateJson(const VelocityNet& net) {
  json layers = json::array();
  double sigma_bar = 0.0;
  for (std::size_t l = 0; l < net.cva_layers().size(); ++l) {
    const CvaLayer& layer = net.cva_layers()[l];
    const double gamma = layer.gamma().item();
    const double norm = SpectralNorm(layer.w_value());
    sigma_bar = std::max(sigma_bar, std::abs(gamma) * norm);
    layers.push_back({{"layer", l},
                      {"gamma", gamma},
                      {"w_value_spectral_norm", norm},
                      {"sigma", std::abs(gamma) * norm}});
  }
  return json({{"layers", layers}, {"sigma_bar", sigma_bar}}).dump(2);
}

std::string AttentionJson(const Policy& policy, const OfflineDataset& dataset, int batch,
                          std::uint64_t seed) {
  BatchSampler sampler(&dataset, policy.codec(), policy.backbone.history);
  Rng rng(seed);
  TrainingBatch b = sampler.Sample(batch, 0.0, 0.0, rng);
  Tensor z = RandomNormal(b.tau0.shape(), rng);
  InpaintObservations(z, b.cond);
  ForwardDiagnostics diag;
  {
    NoGradGuard no_grad;
    policy.net->Forward(z, TimeTensor(std::vector<double>(batch, 0.0)),
                        TimeTensor(std::vector<double>(batch, 1.0)), b.cond, 1.0, &diag);
  }
  const int n = policy.env.n_agents;
  json layers = json::array();
  for (std::size_t l = 0; l < diag.attention.size(); ++l) {
    json rows = json::array();
    for (int i = 0; i < n; ++i) {
      rows.push_back(std::vector<double>(diag.attention[l].begin() + i * n,
                                         diag.attention[l].begin() + (i + 1) * n));
    }
    layers.push_back({{"layer", l}, {"attention", rows}});
  }
  return json({{"variant", policy.variant.Name()},
               {"batch", batch},
               {"time", 1.0},
               {"layers", layers},
               {"gates", json::parse(GateJson(*policy.net))}})
      .dump(2);
}

std::vector<BoundReport> RunTheorySuites(const TheoryOptions& options) {
  std::vector<BoundReport> reports;
  std::unique_ptr<VelocityNet> own;
  const VelocityNet* net = options.net;
  if (net == nullptr) {
    BackboneConfig cfg;
    cfg.base_dim = 8;
    cfg.groups = 4;
    cfg.attn_heads = 2;
    own = std::make_unique<VelocityNet>(cfg, options.seed + 101);
    for (CvaLayer& layer : own->cva_layers()) layer.mutable_gamma().mutable_data()[0] = 0.1;
    net = own.get();
  }
  const BackboneConfig& bc = net->config();
  const int items = options.taylor_items, w = bc.history + 1;
  Rng rng(options.seed);

  TaylorProbe probe;
  probe.pairs_per_item = options.taylor_pairs_per_item;
  probe.z = RandomNormal({items, bc.n_agents, bc.horizon, bc.per_agent_dim}, rng);
  probe.cond.returns = RandomUniform({items, bc.n_agents}, rng, 0.0, 1.0);
  probe.cond.drop.assign(items, 0);
  probe.cond.obs = RandomNormal({items, bc.n_agents, w, bc.per_agent_dim}, rng);
  for (int i = 0; i < items * probe.pairs_per_item; ++i) {
    double r = rng.Uniform(), t = rng.Uniform();
    if (r > t) std::swap(r, t);
    probe.pairs.push_back({r, t});
  }
  reports.push_back(CheckTaylorControl(*net, probe, options.taylor_grid));

  reports.push_back(DecompositionSuite(options.decomposition_trials, options.seed + 1, 0.15,
                                       options.gate_inflation));

  GaussianToy toy{{0.5, -0.5}, 0.5};
  ToyVelocityMlp toy_net(2, 64, options.seed + 2, toy.sigma);
  TrainGaussianToy(toy_net, toy, FlowConfig{}, options.toy_steps, 128, 1e-3, options.seed + 3);
  reports.push_back(CheckW2Bound(toy_net, toy, options.w2_samples, options.w2_trials,
                                 options.seed + 4));

  // Oracle field: the measured W2 itself should sit at the regression gap.
  GaussianOracleField oracle(toy.mu);
  BoundReport oracle_w2 = CheckW2Bound(oracle, toy, options.w2_samples, 5, options.seed + 5);
  const double kappa = toy.sigma * std::sqrt(2.0);
  BoundReport gap;
  gap.name = "w2-oracle-gap";
  gap.trials = oracle_w2.trials;
  gap.measured = std::abs(oracle_w2.measured - kappa) / kappa;
  gap.bound = 0.1;
  gap.margin = gap.bound - gap.measured;
  gap.pass = gap.measured <= gap.bound;
  gap.violations = gap.pass ? 0 : 1;
  gap.detail = "relative |W2 - sigma sqrt(D)| / sigma sqrt(D) at n=" +
               std::to_string(options.w2_samples) + ", W2=" + Num(oracle_w2.measured, "%.5f");
  reports.push_back(gap);

  GatedAttentionStack stack(2, 16, 1, options.seed + 6);
  stack.SetGates({0.15, 0.1});
  const std::vector<ScalingRow> rows = ScalingProbe({1, 2, 4, 8}, stack, 2.0, 20, options.seed + 7);
  double lo = INFINITY, hi = 0.0;
  std::string detail = "normalized";
  for (const ScalingRow& row : rows) {
    detail += " N=" + std::to_string(row.n_agents) + ":" + Num(row.normalized, "%.4g");
    if (row.n_agents < 2) continue;
    lo = std::min(lo, row.normalized);
    hi = std::max(hi, row.normalized);
  }
  BoundReport scaling;
  scaling.name = "scaling-probe";
  scaling.trials = 20;
  scaling.measured = lo > 0.0 ? hi / lo : INFINITY;
  scaling.bound = 2.0;
  scaling.margin = scaling.bound - scaling.measured;
  scaling.pass = scaling.measured <= scaling.bound && rows.front().raw == 0.0;
  scaling.violations = scaling.pass ? 0 : 1;
  scaling.detail = detail + " (max/min over N>=2)";
  reports.push_back(scaling);

  Tensor z = RandomNormal({2, bc.n_agents, bc.horizon, bc.per_agent_dim}, rng);
  Conditioning cond = probe.cond.Slice(0, 2);
  reports.push_back(DiagnoseBackboneDecomposition(*net, z, 0.7, cond, 8, rng));
  return reports;
}

bool AllCertified(const std::vector<BoundReport>& reports) {
  for (const BoundReport& r : reports) {
    if (r.name.find("(diagnostic)") == std::string::npos && !r.pass) return false;
  }
  return true;
}

}  // namespace coflow
