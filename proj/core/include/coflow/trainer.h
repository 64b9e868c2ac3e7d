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


// Joint training of the velocity net and the inverse-dynamics head with
// condition dropout, gradient accumulation, Adam and an EMA shadow.

#ifndef COFLOW_TRAINER_H_
#define COFLOW_TRAINER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coflow/dataset.h"
#include "coflow/flow.h"
#include "coflow/optim.h"
#include "coflow/policy.h"
#include "coflow/random.h"

namespace coflow {

struct TrainConfig {
  int batch = 32;
  double lr = 2e-4;
  int grad_accum = 2;
  double ema_decay = 0.995;
  int steps = 20000;
  double lambda = 1.0;
  double cond_dropout = 0.25;
  int id_hidden = 64;
  // Fraction of batch items given a CTDE mask in decentralized variants.
  double ctde_fraction = 0.5;
  // Checkpoint interval in optimizer steps; 0 writes only the final pair.
  int checkpoint_every = 0;

  void Validate() const;
};

// Model-space minibatch.
struct TrainingBatch {
  Tensor tau0;  // [B, N, H, d]
  Conditioning cond;
  // Transitions inside each window, all agents stacked: [M, d], [M, 2].
  Tensor id_now, id_next, id_actions;
  std::vector<int> episodes, starts;
};

// Draws training windows: a uniform episode and decision step s; the window
// holds obs[s .. s + H - 1] with the final observation repeated past the
// episode end, conditioned on obs[s] and the return-to-go from s.
class BatchSampler {
 public:
  BatchSampler(const OfflineDataset* dataset, const ObsCodec& codec, int history);

  // drop_prob: chance an item becomes unconditional. ctde_prob: chance an
  // item keeps only one random agent visible.
  TrainingBatch Sample(int batch, double drop_prob, double ctde_prob, Rng& rng) const;
  // Fixed window, fully visible, no dropout.
  TrainingBatch Window(int episode, int start) const;

 private:
  TrainingBatch Build(const std::vector<int>& episodes, const std::vector<int>& starts,
                      const std::vector<int>& acting, const std::vector<std::uint8_t>& drop) const;

  const OfflineDataset* dataset_;
  ObsCodec codec_;
  int history_;
};

struct LossReport {
  long step = 0;
  double l_vel = 0.0;
  double l_act = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Trainer {
 public:
  Trainer(const BackboneConfig& backbone, const FlowConfig& flow, const TrainConfig& train,
          Variant variant, const OfflineDataset& dataset, std::uint64_t seed);

  // One optimizer update over grad_accum micro-batches; losses are the
  // slice averages. Throws TrainingDiverged on a non-finite loss.
  LossReport Step();

  // Velocity and action losses for one batch; records the graph.
  struct BatchLoss {
    Tensor l_vel, l_act;
  };
  BatchLoss ComputeLoss(const TrainingBatch& batch, Rng& rng) const;

  // Runs `steps` updates, appending CSV rows to `log` when given and
  // writing checkpoints into `checkpoint_dir` when non-empty.
  void Train(int steps, std::ostream* log, const std::string& checkpoint_dir = "",
             const std::function<void(const LossReport&)>& on_step = nullptr);

  Policy& live() { return live_; }
  Policy& ema() { return ema_; }
  const BatchSampler& sampler() const { return sampler_; }
  long step() const { return step_; }
  const TrainConfig& config() const { return train_; }
  Rng& rng() { return rng_; }

  // live.ckpt and ema.ckpt under `dir`.
  void SaveCheckpoints(const std::string& dir) const;

  static const char* LogHeader() { return "step,L_vel,L_act,total,grad_norm"; }
  static std::string LogRow(const LossReport& r);

 private:
  FlowConfig flow_;
  TrainConfig train_;
  Variant variant_;
  const OfflineDataset* dataset_;
  Policy live_, ema_;
  ParameterSet live_params_, ema_params_;
  std::unique_ptr<Adam> adam_;
  BatchSampler sampler_;
  Rng rng_;
  long step_ = 0;
};

}  // namespace coflow

#endif  // COFLOW_TRAINER_H_
