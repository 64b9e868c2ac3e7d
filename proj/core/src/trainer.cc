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


#include "coflow/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coflow/ops.h"

namespace coflow {

void TrainConfig::Validate() const {
  if (batch < 1 || grad_accum < 1 || steps < 0 || id_hidden < 1 || checkpoint_every < 0) {
    throw std::invalid_argument("train config: batch, grad_accum, id_hidden >= 1; steps >= 0");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (!(cond_dropout >= 0.0 && cond_dropout < 1.0)) {
    throw std::invalid_argument("train config: cond_dropout must lie in [0, 1)");
  }
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) {
    throw std::invalid_argument("train config: ema_decay must lie in (0, 1)");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("train config: lambda must be >= 0");
  if (!(ctde_fraction >= 0.0 && ctde_fraction <= 1.0)) {
    throw std::invalid_argument("train config: ctde_fraction must lie in [0, 1]");
  }
}

BatchSampler::BatchSampler(const OfflineDataset* dataset, const ObsCodec& codec, int history)
    : dataset_(dataset), codec_(codec), history_(history) {
  if (dataset_->trajectories.empty()) throw std::invalid_argument("batch sampler: empty dataset");
  if (history < 0 || history >= dataset_->horizon()) {
    throw std::invalid_argument("batch sampler: history must lie in [0, H)");
  }
}

TrainingBatch BatchSampler::Sample(int batch, double drop_prob, double ctde_prob,
                                   Rng& rng) const {
  std::vector<int> episodes(batch), starts(batch), acting(batch, -1);
  std::vector<std::uint8_t> drop(batch, 0);
  const int e_max = static_cast<int>(dataset_->trajectories.size()) - 1;
  const int h = dataset_->horizon(), n = dataset_->n_agents();
  for (int b = 0; b < batch; ++b) {
    episodes[b] = static_cast<int>(rng.UniformInt(0, e_max));
    starts[b] = static_cast<int>(rng.UniformInt(0, h - 2));
    drop[b] = rng.Bernoulli(drop_prob);
    if (ctde_prob > 0.0 && rng.Bernoulli(ctde_prob)) {
      acting[b] = static_cast<int>(rng.UniformInt(0, n - 1));
    }
  }
  return Build(episodes, starts, acting, drop);
}

TrainingBatch BatchSampler::Window(int episode, int start) const {
  return Build({episode}, {start}, {-1}, {0});
}

TrainingBatch BatchSampler::Build(const std::vector<int>& episodes,
                                  const std::vector<int>& starts,
                                  const std::vector<int>& acting,
                                  const std::vector<std::uint8_t>& drop) const {
  const OfflineDataset& ds = *dataset_;
  const int batch = static_cast<int>(episodes.size());
  const int n = ds.n_agents(), h = ds.horizon(), d = ds.obs_dim(), w = history_ + 1;
  std::vector<double> tau(static_cast<std::size_t>(batch) * n * h * d);
  std::vector<double> obs(static_cast<std::size_t>(batch) * n * w * d);
  std::vector<double> returns(static_cast<std::size_t>(batch) * n);
  std::vector<double> now, next, act;
  for (int b = 0; b < batch; ++b) {
    const int e = episodes[b];
    const int origin = starts[b] - history_;
    const double rtg = codec_.EncodeReturn(ds.ReturnToGo(e, starts[b]));
    for (int i = 0; i < n; ++i) {
      returns[b * n + i] = rtg;
      for (int j = 0; j < h; ++j) {
        const int step = std::clamp(origin + j, 0, h - 1);
        for (int k = 0; k < d; ++k) {
          tau[((b * n + i) * h + j) * d + k] = codec_.Encode(k, ds.ObsAt(e, i, step, k));
        }
      }
      std::copy_n(tau.begin() + (b * n + i) * h * d, w * d, obs.begin() + (b * n + i) * w * d);
      for (int j = 0; j + 1 < h; ++j) {
        const int step = origin + j;
        if (step < 0 || step + 1 > h - 1) continue;
        for (int k = 0; k < d; ++k) {
          now.push_back(tau[((b * n + i) * h + j) * d + k]);
          next.push_back(tau[((b * n + i) * h + j + 1) * d + k]);
        }
        act.push_back(ds.ActionAt(e, i, step, 0));
        act.push_back(ds.ActionAt(e, i, step, 1));
      }
    }
  }
  TrainingBatch out;
  out.tau0 = Tensor({batch, n, h, d}, std::move(tau));
  out.cond.returns = Tensor({batch, n}, std::move(returns));
  out.cond.drop = drop;
  out.cond.obs = Tensor({batch, n, w, d}, std::move(obs));
  out.cond = ApplyCtdeMask(out.cond, acting);
  const std::int64_t m = static_cast<std::int64_t>(act.size() / 2);
  out.id_now = Tensor({m, d}, std::move(now));
  out.id_next = Tensor({m, d}, std::move(next));
  out.id_actions = Tensor({m, 2}, std::move(act));
  out.episodes = episodes;
  out.starts = starts;
  return out;
}

Trainer::Trainer(const BackboneConfig& backbone, const FlowConfig& flow,
                 const TrainConfig& train, Variant variant, const OfflineDataset& dataset,
                 std::uint64_t seed)
    : flow_(flow),
      train_(train),
      variant_(variant),
      dataset_(&dataset),
      sampler_(&dataset, ObsCodec(dataset.stats), backbone.history),
      rng_(seed) {
  flow_.Validate();
  train_.Validate();
  const std::uint64_t init_seed = rng_.Fork();
  live_ = Policy::Create(backbone, variant, dataset.env, dataset.stats, train.id_hidden, init_seed);
  ema_ = Policy::Create(backbone, variant, dataset.env, dataset.stats, train.id_hidden, init_seed);
  live_params_ = live_.Parameters();
  ema_params_ = ema_.Parameters();
  ema_params_.CopyFrom(live_params_);
  adam_ = std::make_unique<Adam>(&live_params_, AdamConfig{train.lr});
}

Trainer::BatchLoss Trainer::ComputeLoss(const TrainingBatch& batch, Rng& rng) const {
  const std::int64_t b_n = batch.tau0.dim(0);
  Tensor z1 = RandomNormal(batch.tau0.shape(), rng);
  std::vector<TimePair> pairs(b_n);
  std::vector<double> t(b_n);
  for (std::int64_t b = 0; b < b_n; ++b) {
    pairs[b] = SampleTimePair(flow_, rng);
    t[b] = pairs[b].t;
  }
  InterpolantSample sample = Interpolate(batch.tau0, z1, t);
  InpaintObservations(sample.z_t, batch.cond);
  ZeroInpaintedSlots(sample.v_cond, batch.cond);
  BatchLoss out;
  if (variant_.base) {
    out.l_vel = PlainFlowLoss(*live_.net, sample, batch.cond);
  } else {
    out.l_vel = VelocityLoss(FdSurrogate(*live_.net, sample.z_t, pairs, batch.cond),
                             sample.v_cond);
  }
  out.l_act = InverseDynamicsLoss(*live_.inverse, batch.id_now, batch.id_next,
                                  batch.id_actions);
  return out;
}

LossReport Trainer::Step() {
  LossReport report;
  report.step = step_;
  live_params_.ZeroGrad();
  const double slice = 1.0 / train_.grad_accum;
  const double ctde = variant_.decentralized ? train_.ctde_fraction : 0.0;
  for (int a = 0; a < train_.grad_accum; ++a) {
    TrainingBatch batch = sampler_.Sample(train_.batch, train_.cond_dropout, ctde, rng_);
    BatchLoss loss = ComputeLoss(batch, rng_);
    const double lv = loss.l_vel.item(), la = loss.l_act.item();
    if (!std::isfinite(lv) || !std::isfinite(la)) {
      Tape::Current().Reset();
      std::ostringstream os;
      os << "training diverged at step " << step_ << ": L_vel=" << lv << " L_act=" << la;
      throw TrainingDiverged(os.str());
    }
    Tensor total = ops::ScalarMul(
        ops::Add(loss.l_vel, ops::ScalarMul(loss.l_act, train_.lambda)), slice);
    Backward(total);
    report.l_vel += slice * lv;
    report.l_act += slice * la;
  }
  report.total = report.l_vel + train_.lambda * report.l_act;
  report.grad_norm = GlobalGradNorm(live_params_);
  if (!std::isfinite(report.grad_norm)) {
    throw TrainingDiverged("training diverged at step " + std::to_string(step_) +
                           ": non-finite gradient norm");
  }
  adam_->Step();
  EmaUpdate(ema_params_, live_params_, train_.ema_decay);
  ++step_;
  return report;
}

std::string Trainer::LogRow(const LossReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g", r.step, r.l_vel, r.l_act,
                r.total, r.grad_norm);
  return buf;
}

void Trainer::SaveCheckpoints(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  SavePolicy(live_, (std::filesystem::path(dir) / "live.ckpt").string());
  SavePolicy(ema_, (std::filesystem::path(dir) / "ema.ckpt").string());
}

void Trainer::Train(int steps, std::ostream* log, const std::string& checkpoint_dir,
                    const std::function<void(const LossReport&)>& on_step) {
  for (int i = 0; i < steps; ++i) {
    const LossReport r = Step();
    if (log) *log << LogRow(r) << '\n';
    if (on_step) on_step(r);
    if (!checkpoint_dir.empty() && train_.checkpoint_every > 0 &&
        step_ % train_.checkpoint_every == 0) {
      SaveCheckpoints(checkpoint_dir);
    }
  }
  if (log) log->flush();
  if (!checkpoint_dir.empty()) SaveCheckpoints(checkpoint_dir);
}

}  // namespace coflow
