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


#include "coflow/sampler.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "coflow/backbone.h"
#include "coflow/ops.h"

namespace coflow {

void SampleConfig::Validate() const {
  if (steps < 1) throw std::invalid_argument("sample config: steps must be >= 1");
  if (!(guidance >= 0.0)) throw std::invalid_argument("sample config: guidance must be >= 0");
  if (!(alpha_scale >= 0.0 && alpha_scale <= 1.0)) {
    throw std::invalid_argument("sample config: alpha_scale must lie in [0, 1]");
  }
}

Tensor CfgVelocity(const VelocityModel& net, const Tensor& z, const Tensor& r, const Tensor& t,
                   const Conditioning& cond, double omega, double alpha_scale) {
  if (omega == 1.0) return net.Forward(z, r, t, cond, alpha_scale);
  if (omega == 0.0) return net.Forward(z, r, t, cond.Unconditional(), alpha_scale);
  const std::int64_t b = z.dim(0);
  const std::array<Tensor, 2> zz{z, z}, rr{r, r}, tt{t, t};
  Tensor u = net.Forward(ops::Concat(zz, 0), ops::Concat(rr, 0), ops::Concat(tt, 0),
                         ConcatBatch(cond, cond.Unconditional()), alpha_scale);
  Tensor u_cond = ops::Slice(u, 0, 0, b), u_uncond = ops::Slice(u, 0, b, b);
  return ops::Add(u_uncond, ops::ScalarMul(ops::Sub(u_cond, u_uncond), omega));
}

Tensor Sample(const VelocityModel& net, const Tensor& z1, const Conditioning& cond,
              const SampleConfig& cfg, SampleStats* stats) {
  cfg.Validate();
  NoGradGuard no_grad;
  const std::int64_t b = z1.dim(0);
  const Tensor zeros = Tensor::Zeros({b});
  Tensor z = z1.Clone();
  InpaintObservations(z, cond);
  const double dt = 1.0 / cfg.steps;
  for (int m = 0; m < cfg.steps; ++m) {
    const Tensor t = Tensor::Full({b}, 1.0 - m * dt);
    const Tensor u = CfgVelocity(net, z, zeros, t, cond, cfg.guidance, cfg.alpha_scale);
    if (stats) ++stats->model_calls;
    // k = 1 stays exactly z1 - u.
    z = cfg.steps == 1 ? ops::Sub(z, u) : ops::Sub(z, ops::ScalarMul(u, dt));
    InpaintObservations(z, cond);
  }
  return z;
}

Tensor Sample(const VelocityModel& net, const Conditioning& cond, const SampleConfig& cfg,
              const Shape& shape, Rng& rng, SampleStats* stats) {
  return Sample(net, RandomNormal(shape, rng), cond, cfg, stats);
}

Tensor ExtractActions(const InverseDynamics& head, const Tensor& o_now, const Tensor& traj,
                      int next_slot, int only_agent) {
  if (traj.rank() != 4 || o_now.rank() != 3 || o_now.dim(0) != traj.dim(0) ||
      o_now.dim(1) != traj.dim(1) || o_now.dim(2) != traj.dim(3)) {
    throw std::invalid_argument("extract actions: o_now " + ShapeString(o_now.shape()) +
                                " does not match trajectory " + ShapeString(traj.shape()));
  }
  if (next_slot < 0 || next_slot >= traj.dim(2)) {
    throw std::invalid_argument("extract actions: trajectory has no step " +
                                std::to_string(next_slot));
  }
  NoGradGuard no_grad;
  const std::int64_t b = traj.dim(0), n = traj.dim(1), d = traj.dim(3);
  Tensor next = ops::Reshape(ops::Slice(traj, 2, next_slot, 1), {b, n, d});
  Tensor now = o_now;
  if (only_agent >= 0) {
    if (only_agent >= n) throw std::out_of_range("extract actions: agent out of range");
    next = ops::Slice(next, 1, only_agent, 1);
    now = ops::Slice(now, 1, only_agent, 1);
  }
  const std::int64_t agents = next.dim(1);
  Tensor a = head(ops::Reshape(now, {b * agents, d}), ops::Reshape(next, {b * agents, d}));
  return ops::Reshape(a, {b, agents, a.dim(1)});
}

double RolloutReport::MeanReturn() const {
  if (episodes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : episodes) s += e.ret;
  return s / episodes.size();
}

double RolloutReport::StderrReturn() const {
  const std::size_t n = episodes.size();
  if (n < 2) return 0.0;
  const double mean = MeanReturn();
  double ss = 0.0;
  for (const auto& e : episodes) ss += (e.ret - mean) * (e.ret - mean);
  return std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
}

double RolloutReport::MeanCoverage() const {
  if (episodes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : episodes) s += e.coverage_mean;
  return s / episodes.size();
}

double RolloutReport::MedianLatencyMs() const {
  if (latency_ms.empty()) return 0.0;
  std::vector<double> v = latency_ms;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  double hi = v[v.size() / 2];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + v.size() / 2));
}

int ThreadBudget() {
  const char* env = std::getenv("COFLOW_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return std::max(1, n);
}

namespace {

struct EpisodeSeeds {
  std::uint64_t world, noise;
};

struct GroupResult {
  std::vector<EpisodeResult> episodes;
  std::vector<double> latency_ms;
  long model_calls = 0;
  long decisions = 0;
};

GroupResult RunGroup(const Policy& policy, const SampleConfig& cfg,
                     const RolloutOptions& options, int first,
                     const std::vector<EpisodeSeeds>& seeds) {
  const EnvConfig& env = policy.env;
  const ObsCodec codec = policy.codec();
  const int g = static_cast<int>(seeds.size());
  const int n = env.n_agents, h = env.horizon, d = env.ObsDim();
  const int w = policy.backbone.history + 1;
  if (w >= h) throw std::invalid_argument("rollout: history window leaves no next step");
  const int per = cfg.decentralized ? n : 1;  // items per episode
  const int items = g * per;

  std::vector<ParticleWorld> worlds;
  std::vector<Rng> noise;
  std::vector<std::vector<std::vector<double>>> history(g);  // model-space obs per step
  GroupResult out;
  out.episodes.resize(g);
  for (int e = 0; e < g; ++e) {
    Rng wr(seeds[e].world);
    worlds.push_back(ResetWorld(env, wr));
    noise.emplace_back(seeds[e].noise);
    out.episodes[e].episode = first + e;
  }
  auto encode = [&](const ParticleWorld& world) {
    std::vector<double> o = Observe(world);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) o[i * d + k] = codec.Encode(k, o[i * d + k]);
    }
    return o;
  };
  for (int e = 0; e < g; ++e) history[e].push_back(encode(worlds[e]));

  std::vector<double> model_ms(g, 0.0);
  std::vector<int> acting(items, -1);
  if (cfg.decentralized) {
    for (int it = 0; it < items; ++it) acting[it] = it % n;
  }
  for (int s = 0; s + 1 < h; ++s) {
    std::vector<double> obs(static_cast<std::size_t>(items) * n * w * d);
    std::vector<double> now(static_cast<std::size_t>(items) * n * d);
    std::vector<double> z1(static_cast<std::size_t>(items) * n * h * d);
    for (int it = 0; it < items; ++it) {
      const int e = it / per;
      for (int j = 0; j < w; ++j) {
        const int step = std::max(0, s - (w - 1) + j);
        const std::vector<double>& o = history[e][step];
        for (int i = 0; i < n; ++i) {
          std::copy_n(o.begin() + i * d, d, obs.begin() + ((it * n + i) * w + j) * d);
        }
      }
      std::copy(history[e][s].begin(), history[e][s].end(), now.begin() + it * n * d);
      for (std::size_t q = 0; q < static_cast<std::size_t>(n) * h * d; ++q) {
        z1[it * n * h * d + q] = noise[e].Normal();
      }
    }
    Conditioning cond;
    cond.returns = Tensor::Full({items, n}, options.target_return);
    cond.obs = Tensor({items, n, w, d}, std::move(obs));
    cond = ApplyCtdeMask(cond, acting);

    SampleStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const VelocityModel& planner =
        options.planner != nullptr ? *options.planner : *policy.net;
    Tensor traj = Sample(planner, Tensor({items, n, h, d}, std::move(z1)), cond, cfg, &stats);
    Tensor actions = ExtractActions(*policy.inverse, Tensor({items, n, d}, std::move(now)), traj, w);
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / g;
    out.model_calls += stats.model_calls;
    out.decisions += g;
    if (s >= options.warmup) {
      for (int e = 0; e < g; ++e) out.latency_ms.push_back(ms);
    }

    for (int e = 0; e < g; ++e) {
      model_ms[e] += ms;
      std::vector<Vec2> a(n);
      for (int i = 0; i < n; ++i) {
        const int it = e * per + (cfg.decentralized ? i : 0);
        a[i] = {actions.at((it * n + i) * 2), actions.at((it * n + i) * 2 + 1)};
        for (double& v : a[i]) v = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
      }
      const StepResult r = EnvStep(worlds[e], a);
      out.episodes[e].ret += r.reward;
      out.episodes[e].coverage.push_back(r.coverage);
      history[e].push_back(encode(worlds[e]));
    }
  }
  for (int e = 0; e < g; ++e) {
    EpisodeResult& er = out.episodes[e];
    er.coverage_final = er.coverage.back();
    er.coverage_mean = std::accumulate(er.coverage.begin(), er.coverage.end(), 0.0) /
                       er.coverage.size();
    er.model_ms_per_decision = model_ms[e] / (h - 1);
  }
  return out;
}

}  // namespace

RolloutReport Rollout(const Policy& policy, const SampleConfig& cfg,
                      const RolloutOptions& options) {
  cfg.Validate();
  if (options.episodes < 1 || options.lockstep < 1) {
    throw std::invalid_argument("rollout: episodes and lockstep must be >= 1");
  }
  if (cfg.decentralized && (cfg.acting_agent < 0 || cfg.acting_agent >= policy.env.n_agents)) {
    throw std::out_of_range("rollout: acting agent out of range");
  }
  Rng master(options.seed);
  std::vector<EpisodeSeeds> seeds(options.episodes);
  for (auto& s : seeds) s = {master.Fork(), master.Fork()};

  std::vector<std::pair<int, int>> groups;  // [first, count)
  for (int first = 0; first < options.episodes; first += options.lockstep) {
    groups.emplace_back(first, std::min(options.lockstep, options.episodes - first));
  }
  std::vector<GroupResult> results(groups.size());
  auto run = [&](std::size_t gi) {
    const auto [first, count] = groups[gi];
    std::vector<EpisodeSeeds> sub(seeds.begin() + first, seeds.begin() + first + count);
    results[gi] = RunGroup(policy, cfg, options, first, sub);
  };
  const int threads = std::min<int>(options.threads > 0 ? options.threads : ThreadBudget(),
                                    static_cast<int>(groups.size()));
  if (threads <= 1) {
    for (std::size_t gi = 0; gi < groups.size(); ++gi) run(gi);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t gi = w; gi < groups.size(); gi += threads) run(gi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  RolloutReport report;
  for (GroupResult& r : results) {
    report.episodes.insert(report.episodes.end(), r.episodes.begin(), r.episodes.end());
    report.latency_ms.insert(report.latency_ms.end(), r.latency_ms.begin(), r.latency_ms.end());
    report.model_calls += r.model_calls;
    report.decisions += r.decisions;
  }
  return report;
}

void WriteRolloutCsv(std::ostream& os, const RolloutReport& report, const SampleConfig& cfg,
                     bool header) {
  if (header) os << "episode,return,coverage_mean,model_ms_per_decision,k,omega,alpha_scale,mode\n";
  char buf[256];
  for (const auto& e : report.episodes) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.6g,%d,%g,%g,%s\n", e.episode, e.ret,
                  e.coverage_mean, e.model_ms_per_decision, cfg.steps, cfg.guidance,
                  cfg.alpha_scale, cfg.ModeName().c_str());
    os << buf;
  }
}

}  // namespace coflow
