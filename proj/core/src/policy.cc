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


#include "coflow/policy.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "coflow/blob_file.h"
#include "coflow/checkpoint.h"
#include "coflow/optim.h"
#include "config_json.h"

namespace coflow {

using config_json::FromJson;
using config_json::ToJson;
using nlohmann::json;

std::string Variant::Name() const {
  return std::string(base ? "coflow-base" : "coflow") + (decentralized ? "-d" : "-c");
}

Variant Variant::Parse(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (bool base : {false, true}) {
    for (bool dec : {false, true}) {
      const Variant v{base, dec};
      if (v.Name() == s) return v;
    }
  }
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected coflow-c, coflow-d, coflow-base-c, coflow-base-d)");
}

namespace {

void CheckSlots(const Tensor& z, const Conditioning& cond) {
  if (z.rank() != 4 || cond.obs.rank() != 4 || z.dim(0) != cond.obs.dim(0) ||
      z.dim(1) != cond.obs.dim(1) || z.dim(3) != cond.obs.dim(3) ||
      cond.obs.dim(2) > z.dim(2)) {
    throw std::invalid_argument("in-painting: trajectory " + ShapeString(z.shape()) +
                                " incompatible with observations " +
                                ShapeString(cond.obs.shape()));
  }
}

}  // namespace

void InpaintObservations(Tensor& z, const Conditioning& cond) {
  if (!cond.obs.defined()) return;
  CheckSlots(z, cond);
  const std::int64_t b_n = z.dim(0), n = z.dim(1), h = z.dim(2), d = z.dim(3);
  const std::int64_t w = cond.obs.dim(2);
  std::span<double> dst = z.mutable_data();
  for (std::int64_t b = 0; b < b_n; ++b) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (!cond.Visible(b, i)) continue;
      std::copy_n(cond.obs.data().begin() + (b * n + i) * w * d, w * d,
                  dst.begin() + (b * n + i) * h * d);
    }
  }
}

void ZeroInpaintedSlots(Tensor& v, const Conditioning& cond) {
  if (!cond.obs.defined()) return;
  CheckSlots(v, cond);
  const std::int64_t b_n = v.dim(0), n = v.dim(1), h = v.dim(2), d = v.dim(3);
  const std::int64_t w = cond.obs.dim(2);
  std::span<double> dst = v.mutable_data();
  for (std::int64_t b = 0; b < b_n; ++b) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (cond.Visible(b, i)) std::fill_n(dst.begin() + (b * n + i) * h * d, w * d, 0.0);
    }
  }
}

Policy Policy::Create(const BackboneConfig& backbone, Variant variant, const EnvConfig& env,
                      const NormStats& stats, std::int64_t id_hidden, std::uint64_t seed) {
  backbone.Validate();
  if (backbone.n_agents != env.n_agents || backbone.per_agent_dim != env.ObsDim() ||
      backbone.horizon != env.horizon) {
    throw std::invalid_argument(
        "policy: backbone (agents, per-agent dim, horizon) must match the environment");
  }
  Policy p;
  p.backbone = backbone;
  p.variant = variant;
  p.env = env;
  p.stats = stats;
  p.id_hidden = id_hidden;
  Rng rng(seed);
  p.net = std::make_unique<VelocityNet>(backbone, rng.Fork());
  p.inverse = std::make_unique<InverseDynamics>(env.ObsDim(), id_hidden, 2, rng.Fork());
  return p;
}

ParameterSet Policy::Parameters() const {
  return MergeParameters({{"net/", &net->parameters()}, {"id/", &inverse->parameters()}});
}

void SavePolicy(const Policy& policy, const std::string& path) {
  const json meta = {{"variant", policy.variant.Name()},
                     {"backbone", ToJson(policy.backbone)},
                     {"env", ToJson(policy.env)},
                     {"stats", ToJson(policy.stats)},
                     {"id_hidden", policy.id_hidden}};
  SaveCheckpoint(policy.Parameters(), path, meta.dump());
}

Policy LoadPolicy(const std::string& path) {
  // Read the manifest first to size the networks, then load values.
  std::string meta_text;
  {
    BlobFile file = ReadBlobFile(path);
    if (file.kind != "checkpoint") {
      throw std::runtime_error(path + ": expected a checkpoint, found '" + file.kind + "'");
    }
    meta_text = file.meta_json;
  }
  BackboneConfig backbone;
  EnvConfig env;
  NormStats stats;
  Variant variant;
  std::int64_t id_hidden = 64;
  try {
    const json meta = json::parse(meta_text);
    FromJson(meta.at("backbone"), backbone);
    FromJson(meta.at("env"), env);
    FromJson(meta.at("stats"), stats);
    variant = Variant::Parse(meta.at("variant").get<std::string>());
    id_hidden = meta.at("id_hidden").get<std::int64_t>();
  } catch (const std::exception& ex) {
    throw std::runtime_error(path + ": bad policy metadata: " + ex.what());
  }
  Policy p = Policy::Create(backbone, variant, env, stats, id_hidden, 0);
  ParameterSet view = p.Parameters();
  LoadCheckpoint(view, path);
  return p;
}

}  // namespace coflow
