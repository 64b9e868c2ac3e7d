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


#include "coflow/dataset.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coflow/blob_file.h"
#include "config_json.h"

namespace coflow {
namespace {

using nlohmann::json;
using config_json::FromJson;
using config_json::ToJson;

double Normalize01(double x, double lo, double hi) {
  return hi > lo ? (x - lo) / (hi - lo) : 0.0;
}

std::vector<Vec2> Pairs(std::span<const double> flat) {
  std::vector<Vec2> out(flat.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[2 * i], flat[2 * i + 1]};
  return out;
}

}  // namespace

double NormStats::NormalizeObs(int dim, double x) const {
  return Normalize01(x, obs_min[dim], obs_max[dim]);
}

double NormStats::DenormalizeObs(int dim, double x) const {
  return obs_max[dim] > obs_min[dim] ? obs_min[dim] + x * (obs_max[dim] - obs_min[dim])
                                     : obs_min[dim];
}

double NormStats::NormalizeReturn(double rtg) const {
  return Normalize01(rtg, rtg_min, rtg_max);
}

double NormStats::NormalizeAction(int dim, double a) const {
  return Normalize01(a, act_min[dim], act_max[dim]);
}

double OfflineDataset::ObsAt(int episode, int agent, int step, int dim) const {
  const int h = horizon(), d = obs_dim();
  return trajectories[episode].obs[(agent * h + step) * d + dim];
}

double OfflineDataset::ActionAt(int episode, int agent, int step, int dim) const {
  return trajectories[episode].actions[(agent * (horizon() - 1) + step) * 2 + dim];
}

double OfflineDataset::ReturnToGo(int episode, int step) const {
  const auto& r = trajectories[episode].rewards;
  double total = 0.0, discount = 1.0;
  const int last = static_cast<int>(r.size()) - 1;
  for (int k = 0; k <= last; ++k) {
    total += discount * r[std::min(step + k, last)];
    discount *= gamma;
  }
  return total;
}

double DiscountedReturn(std::span<const double> rewards, double gamma) {
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

std::vector<double> ReturnsToGo(std::span<const double> rewards, double gamma) {
  const int n = static_cast<int>(rewards.size());
  std::vector<double> out(n);
  for (int s = 0; s < n; ++s) {
    double total = 0.0, discount = 1.0;
    for (int k = 0; k < n; ++k) {
      total += discount * rewards[std::min(s + k, n - 1)];
      discount *= gamma;
    }
    out[s] = total;
  }
  return out;
}

NormStats ComputeStats(const OfflineDataset& ds) {
  const int d = ds.obs_dim();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  NormStats st;
  st.obs_min.assign(d, kInf);
  st.obs_max.assign(d, -kInf);
  st.act_min.assign(2, kInf);
  st.act_max.assign(2, -kInf);
  st.rtg_min = kInf;
  st.rtg_max = -kInf;
  for (const JointTrajectory& tr : ds.trajectories) {
    for (std::size_t i = 0; i < tr.obs.size(); ++i) {
      st.obs_min[i % d] = std::min(st.obs_min[i % d], tr.obs[i]);
      st.obs_max[i % d] = std::max(st.obs_max[i % d], tr.obs[i]);
    }
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
      st.act_min[i % 2] = std::min(st.act_min[i % 2], tr.actions[i]);
      st.act_max[i % 2] = std::max(st.act_max[i % 2], tr.actions[i]);
    }
    for (double g : ReturnsToGo(tr.rewards, ds.gamma)) {
      st.rtg_min = std::min(st.rtg_min, g);
      st.rtg_max = std::max(st.rtg_max, g);
    }
  }
  return st;
}

OfflineDataset GenerateDataset(const EnvConfig& env, Tier tier, int episodes,
                               std::uint64_t seed, double gamma) {
  env.Validate();
  if (episodes < 1) throw std::invalid_argument("generate_dataset: episodes must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  OfflineDataset ds;
  ds.env = env;
  ds.tier = tier;
  ds.seed = seed;
  ds.gamma = gamma;
  const int n = env.n_agents, h = env.horizon, d = env.ObsDim();
  Rng master(seed);
  ds.trajectories.resize(episodes);
  for (int e = 0; e < episodes; ++e) {
    Rng rng(master.Fork());
    ParticleWorld world = ResetWorld(env, rng);
    JointTrajectory& tr = ds.trajectories[e];
    tr.obs.assign(static_cast<std::size_t>(n) * h * d, 0.0);
    tr.actions.assign(static_cast<std::size_t>(n) * (h - 1) * 2, 0.0);
    tr.rewards.assign(h - 1, 0.0);
    for (const Vec2& l : world.landmarks) {
      tr.landmarks.push_back(l[0]);
      tr.landmarks.push_back(l[1]);
    }
    auto record = [&](int step) {
      const std::vector<double> o = Observe(world);
      for (int i = 0; i < n; ++i) {
        std::copy_n(o.begin() + i * d, d, tr.obs.begin() + (i * h + step) * d);
      }
    };
    record(0);
    for (int s = 0; s + 1 < h; ++s) {
      std::vector<Vec2> a = ScriptedPolicy(tier, world, rng);
      for (Vec2& ai : a) ai = {Quantize(ai[0]), Quantize(ai[1])};
      for (int i = 0; i < n; ++i) {
        tr.actions[(i * (h - 1) + s) * 2] = a[i][0];
        tr.actions[(i * (h - 1) + s) * 2 + 1] = a[i][1];
      }
      tr.rewards[s] = ToStored(EnvStep(world, a).reward);
      record(s + 1);
    }
    tr.discounted_return = DiscountedReturn(tr.rewards, gamma);
  }
  ds.stats = ComputeStats(ds);
  return ds;
}

void WriteDataset(const OfflineDataset& ds, const std::string& path) {
  const int e = static_cast<int>(ds.trajectories.size());
  const int n = ds.n_agents(), h = ds.horizon(), d = ds.obs_dim();
  const int l = ds.env.n_landmarks;
  BlobFile file;
  file.kind = "dataset";
  std::vector<double> returns;
  for (const auto& tr : ds.trajectories) returns.push_back(tr.discounted_return);
  file.meta_json = json{{"tier", TierName(ds.tier)},
                        {"seed", ds.seed},
                        {"gamma", ds.gamma},
                        {"episodes", e},
                        {"env", ToJson(ds.env)},
                        {"stats", ToJson(ds.stats)},
                        {"returns", returns}}
                       .dump();
  BlobTensor obs{"obs", {e, n, h, d}, {}}, act{"actions", {e, n, h - 1, 2}, {}};
  BlobTensor rew{"rewards", {e, h - 1}, {}}, lm{"landmarks", {e, l, 2}, {}};
  for (const auto& tr : ds.trajectories) {
    obs.values.insert(obs.values.end(), tr.obs.begin(), tr.obs.end());
    act.values.insert(act.values.end(), tr.actions.begin(), tr.actions.end());
    rew.values.insert(rew.values.end(), tr.rewards.begin(), tr.rewards.end());
    lm.values.insert(lm.values.end(), tr.landmarks.begin(), tr.landmarks.end());
  }
  file.tensors = {std::move(obs), std::move(act), std::move(rew), std::move(lm)};
  WriteBlobFile(path, file);
}

OfflineDataset ReadDataset(const std::string& path) {
  BlobFile file = ReadBlobFile(path);
  if (file.kind != "dataset") {
    throw std::runtime_error(path + ": expected a dataset file, found '" + file.kind + "'");
  }
  OfflineDataset ds;
  json meta;
  try {
    meta = json::parse(file.meta_json);
    FromJson(meta.at("env"), ds.env);
    ds.env.Validate();
    ds.tier = ParseTier(meta.at("tier").get<std::string>());
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.gamma = meta.at("gamma").get<double>();
  } catch (const std::exception& ex) {
    throw std::runtime_error(path + ": bad dataset manifest: " + ex.what());
  }
  const int n = ds.n_agents(), h = ds.horizon(), d = ds.obs_dim();
  const int l = ds.env.n_landmarks;
  const int e = meta.value("episodes", 0);
  auto find = [&](const std::string& name, const Shape& shape) -> const BlobTensor& {
    for (const BlobTensor& t : file.tensors) {
      if (t.name == name) {
        if (t.shape != shape) {
          throw std::runtime_error(path + ": tensor '" + name + "' has shape " +
                                   ShapeString(t.shape) + ", expected " + ShapeString(shape));
        }
        return t;
      }
    }
    throw std::runtime_error(path + ": missing tensor '" + name + "'");
  };
  const BlobTensor& obs = find("obs", {e, n, h, d});
  const BlobTensor& act = find("actions", {e, n, h - 1, 2});
  const BlobTensor& rew = find("rewards", {e, h - 1});
  const BlobTensor& lm = find("landmarks", {e, l, 2});
  ds.trajectories.resize(e);
  const std::size_t so = static_cast<std::size_t>(n) * h * d;
  const std::size_t sa = static_cast<std::size_t>(n) * (h - 1) * 2;
  for (int i = 0; i < e; ++i) {
    JointTrajectory& tr = ds.trajectories[i];
    tr.obs.assign(obs.values.begin() + i * so, obs.values.begin() + (i + 1) * so);
    tr.actions.assign(act.values.begin() + i * sa, act.values.begin() + (i + 1) * sa);
    tr.rewards.assign(rew.values.begin() + i * (h - 1), rew.values.begin() + (i + 1) * (h - 1));
    tr.landmarks.assign(lm.values.begin() + i * 2 * l, lm.values.begin() + (i + 1) * 2 * l);
    tr.discounted_return = DiscountedReturn(tr.rewards, ds.gamma);
  }
  ds.stats = ComputeStats(ds);
  return ds;
}

ParticleWorld InitialWorld(const OfflineDataset& ds, int episode) {
  const int n = ds.n_agents();
  std::vector<Vec2> pos(n), vel(n);
  for (int i = 0; i < n; ++i) {
    pos[i] = {ds.ObsAt(episode, i, 0, 0), ds.ObsAt(episode, i, 0, 1)};
    vel[i] = {ds.ObsAt(episode, i, 0, 2), ds.ObsAt(episode, i, 0, 3)};
  }
  return MakeWorld(ds.env, pos, vel, Pairs(ds.trajectories[episode].landmarks));
}

double ResimulationError(const OfflineDataset& ds, int episode) {
  const int n = ds.n_agents(), h = ds.horizon(), d = ds.obs_dim();
  ParticleWorld world = InitialWorld(ds, episode);
  double worst = 0.0;
  for (int s = 0; s + 1 < h; ++s) {
    std::vector<Vec2> a(n);
    for (int i = 0; i < n; ++i) a[i] = {ds.ActionAt(episode, i, s, 0), ds.ActionAt(episode, i, s, 1)};
    EnvStep(world, a);
    const std::vector<double> o = Observe(world);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        worst = std::max(worst, std::abs(o[i * d + k] - ds.ObsAt(episode, i, s + 1, k)));
      }
    }
  }
  return worst;
}

}  // namespace coflow
