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


// JSON mapping of configuration structs. Readers reject unknown keys and
// keep defaults for absent ones.

#ifndef COFLOW_SRC_CONFIG_JSON_H_
#define COFLOW_SRC_CONFIG_JSON_H_

#include <initializer_list>
#include <stdexcept>
#include <string>

#include "coflow/backbone.h"
#include "coflow/dataset.h"
#include "coflow/env.h"
#include "coflow/flow.h"
#include "coflow/sampler.h"
#include "coflow/trainer.h"
#include "json.hpp"

namespace coflow::config_json {

using nlohmann::json;

inline void RejectUnknown(const json& j, const std::string& where,
                          std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline json ToJson(const BackboneConfig& c) {
  return {{"base_dim", c.base_dim}, {"dim_mults", c.dim_mults}, {"kernel", c.kernel},
          {"groups", c.groups},     {"attn_heads", c.attn_heads}, {"n_agents", c.n_agents},
          {"horizon", c.horizon},   {"history", c.history},     {"per_agent_dim", c.per_agent_dim},
          {"embed_dim", c.embed_dim}, {"time_scale", c.time_scale},
          {"precondition", c.precondition}, {"sigma_data", c.sigma_data}};
}

inline void FromJson(const json& j, BackboneConfig& c) {
  RejectUnknown(j, "backbone", {"base_dim", "dim_mults", "kernel", "groups", "attn_heads",
                                "n_agents", "horizon", "history", "per_agent_dim",
                                "embed_dim", "time_scale", "precondition", "sigma_data"});
  Read(j, "base_dim", c.base_dim);
  Read(j, "dim_mults", c.dim_mults);
  Read(j, "kernel", c.kernel);
  Read(j, "groups", c.groups);
  Read(j, "attn_heads", c.attn_heads);
  Read(j, "n_agents", c.n_agents);
  Read(j, "horizon", c.horizon);
  Read(j, "history", c.history);
  Read(j, "per_agent_dim", c.per_agent_dim);
  Read(j, "embed_dim", c.embed_dim);
  Read(j, "time_scale", c.time_scale);
  Read(j, "precondition", c.precondition);
  Read(j, "sigma_data", c.sigma_data);
}

inline json ToJson(const EnvConfig& e) {
  return {{"n_agents", e.n_agents},
          {"n_landmarks", e.n_landmarks},
          {"horizon", e.horizon},
          {"dt", e.dt},
          {"v_max", e.v_max},
          {"collision_radius", e.collision_radius},
          {"collision_penalty", e.collision_penalty},
          {"coverage_threshold", e.coverage_threshold}};
}

inline void FromJson(const json& j, EnvConfig& e) {
  RejectUnknown(j, "env", {"n_agents", "n_landmarks", "horizon", "dt", "v_max",
                           "collision_radius", "collision_penalty", "coverage_threshold"});
  Read(j, "n_agents", e.n_agents);
  Read(j, "n_landmarks", e.n_landmarks);
  Read(j, "horizon", e.horizon);
  Read(j, "dt", e.dt);
  Read(j, "v_max", e.v_max);
  Read(j, "collision_radius", e.collision_radius);
  Read(j, "collision_penalty", e.collision_penalty);
  Read(j, "coverage_threshold", e.coverage_threshold);
}

inline json ToJson(const NormStats& s) {
  return {{"obs_min", s.obs_min}, {"obs_max", s.obs_max}, {"act_min", s.act_min},
          {"act_max", s.act_max}, {"rtg_min", s.rtg_min}, {"rtg_max", s.rtg_max}};
}

inline void FromJson(const json& j, NormStats& s) {
  RejectUnknown(j, "stats", {"obs_min", "obs_max", "act_min", "act_max", "rtg_min", "rtg_max"});
  Read(j, "obs_min", s.obs_min);
  Read(j, "obs_max", s.obs_max);
  Read(j, "act_min", s.act_min);
  Read(j, "act_max", s.act_max);
  Read(j, "rtg_min", s.rtg_min);
  Read(j, "rtg_max", s.rtg_max);
}

inline json ToJson(const FlowConfig& c) {
  return {{"flow_ratio", c.flow_ratio},
          {"logit_normal_mu", c.logit_normal_mu},
          {"logit_normal_sigma", c.logit_normal_sigma}};
}

inline void FromJson(const json& j, FlowConfig& c) {
  RejectUnknown(j, "flow", {"flow_ratio", "logit_normal_mu", "logit_normal_sigma"});
  Read(j, "flow_ratio", c.flow_ratio);
  Read(j, "logit_normal_mu", c.logit_normal_mu);
  Read(j, "logit_normal_sigma", c.logit_normal_sigma);
}

inline json ToJson(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"lr", c.lr},
          {"grad_accum", c.grad_accum},
          {"ema_decay", c.ema_decay},
          {"steps", c.steps},
          {"lambda", c.lambda},
          {"cond_dropout", c.cond_dropout},
          {"id_hidden", c.id_hidden},
          {"ctde_fraction", c.ctde_fraction},
          {"checkpoint_every", c.checkpoint_every}};
}

inline void FromJson(const json& j, TrainConfig& c) {
  RejectUnknown(j, "train", {"batch", "lr", "grad_accum", "ema_decay", "steps", "lambda",
                             "cond_dropout", "id_hidden", "ctde_fraction", "checkpoint_every"});
  Read(j, "batch", c.batch);
  Read(j, "lr", c.lr);
  Read(j, "grad_accum", c.grad_accum);
  Read(j, "ema_decay", c.ema_decay);
  Read(j, "steps", c.steps);
  Read(j, "lambda", c.lambda);
  Read(j, "cond_dropout", c.cond_dropout);
  Read(j, "id_hidden", c.id_hidden);
  Read(j, "ctde_fraction", c.ctde_fraction);
  Read(j, "checkpoint_every", c.checkpoint_every);
}

inline json ToJson(const SampleConfig& c) {
  return {{"steps", c.steps},
          {"guidance", c.guidance},
          {"alpha_scale", c.alpha_scale},
          {"decentralized", c.decentralized},
          {"acting_agent", c.acting_agent}};
}

inline void FromJson(const json& j, SampleConfig& c) {
  RejectUnknown(j, "sample", {"steps", "guidance", "alpha_scale", "decentralized",
                              "acting_agent"});
  Read(j, "steps", c.steps);
  Read(j, "guidance", c.guidance);
  Read(j, "alpha_scale", c.alpha_scale);
  Read(j, "decentralized", c.decentralized);
  Read(j, "acting_agent", c.acting_agent);
}

}  // namespace coflow::config_json

#endif  // COFLOW_SRC_CONFIG_JSON_H_
