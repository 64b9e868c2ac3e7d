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


#ifndef COFLOW_BACKBONE_H_
#define COFLOW_BACKBONE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "coflow/nn.h"
#include "coflow/random.h"
#include "coflow/tensor.h"
#include "coflow/velocity_model.h"

namespace coflow {

struct BackboneConfig {
  int base_dim = 32;
  std::vector<int> dim_mults{1, 2, 4};
  int kernel = 5;
  int groups = 8;
  int attn_heads = 4;
  int n_agents = 3;
  int horizon = 24;
  int history = 0;
  int per_agent_dim = 10;
  // Width of each conditioning embedding; 0 selects 2 * base_dim.
  int embed_dim = 0;
  // Highest angular frequency of the sinusoidal time features.
  double time_scale = 32.0;
  // Output skip u = c_skip(t) z + c_out(t) F(z) with coefficients from the
  // variances of data (sigma_data^2) and unit noise along the interpolant.
  bool precondition = true;
  double sigma_data = 0.5;

  void Validate() const;
  int EmbedDim() const { return embed_dim > 0 ? embed_dim : 2 * base_dim; }
  int Levels() const { return static_cast<int>(dim_mults.size()); }
  // Horizon after right padding to a multiple of 2^(levels - 1).
  int PaddedHorizon() const;
};

// Multi-head attention across the agent axis, applied independently at
// every time token, with a zero-initialized scalar gate:
//   out_i = c_i + alpha * gamma * sum_j softmax_j(q_i . k_j / sqrt(d_k)) v_j
struct Precondition {
  double c_skip = 0.0;
  double c_out = 1.0;
};
// c_skip = Cov(v, z_t) / Var(z_t) and c_out = the residual standard
// deviation, for z_t = (1 - t) tau0 + t z1 and v = z1 - tau0. At t = 1 the
// pair is (1, sigma_data).
Precondition PreconditionAt(double t, double sigma_data);

class CvaLayer {
 public:
  CvaLayer() = default;
  CvaLayer(ParameterSet& params, const std::string& name, std::int64_t width,
           int heads, Rng& rng);

  // c: [B * N, F, T], agents contiguous within each batch item. When
  // `attention` is non-null, adds the N x N head- and token-averaged
  // attention summed over the batch (caller divides).
  Tensor Forward(const Tensor& c, std::int64_t agents, double alpha_scale,
                 std::vector<double>* attention = nullptr) const;

  std::int64_t width() const { return width_; }
  int heads() const { return heads_; }
  const Tensor& gamma() const { return gamma_; }
  const Tensor& w_query() const { return wq_; }
  const Tensor& w_key() const { return wk_; }
  const Tensor& w_value() const { return wv_; }
  // Handles alias the parameter set; writes change the layer.
  Tensor& mutable_gamma() { return gamma_; }
  Tensor& mutable_w_value() { return wv_; }

 private:
  Tensor wq_, wk_, wv_, gamma_;
  std::int64_t width_ = 0;
  int heads_ = 1;
};

// conv -> group norm -> mish, FiLM from the conditioning embedding, conv ->
// group norm -> mish, plus a residual path (1x1 conv when widths differ).
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParameterSet& params, const std::string& name,
                std::int64_t in, std::int64_t out, std::int64_t embed,
                int kernel, int groups, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& embed) const;

 private:
  Conv1dLayer conv1_, conv2_, residual_;
  GroupNormLayer norm1_, norm2_;
  LinearLayer film_;
  std::int64_t out_ = 0;
  bool project_ = false;
};

// Weight-shared temporal U-Net per agent with a CvaLayer on every encoder
// skip. The decoder at level l consumes concat(x, e_l, c_hat_l).
class VelocityNet : public VelocityModel {
 public:
  VelocityNet(const BackboneConfig& config, std::uint64_t seed);

  Tensor Forward(const Tensor& z, const Tensor& r, const Tensor& t,
                 const Conditioning& cond, double alpha_scale = 1.0,
                 ForwardDiagnostics* diag = nullptr) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }

  // Alias of Forward with alpha_scale = 0: every agent block depends only on
  // that agent's input and conditioning.
  Tensor PerAgentForward(const Tensor& z, const Tensor& r, const Tensor& t,
                         const Conditioning& cond) const;

  const BackboneConfig& config() const { return config_; }
  std::vector<CvaLayer>& cva_layers() { return cva_; }
  const std::vector<CvaLayer>& cva_layers() const { return cva_; }

 private:
  Tensor Embed(const Tensor& r, const Tensor& t, const Conditioning& cond,
               std::int64_t batch) const;

  BackboneConfig config_;
  ParameterSet params_;
  LinearLayer time1_, time2_, ret1_, ret2_, obs1_, obs2_;
  Tensor null_return_;
  std::vector<ResidualBlock> enc_, dec_;
  std::vector<Conv1dLayer> down_;
  std::vector<TransposedConv1dLayer> up_;
  std::vector<CvaLayer> cva_;
  ResidualBlock mid_;
  Conv1dLayer head_conv_, head_out_;
  GroupNormLayer head_norm_;
};

// Zeroes teammates' observations and marks them masked; the acting agent's
// slots are untouched. Applies to every batch item.
Conditioning ApplyCtdeMask(const Conditioning& cond, int acting_agent);
// Per item acting agent; -1 leaves the item unmasked.
Conditioning ApplyCtdeMask(const Conditioning& cond,
                           const std::vector<int>& acting_agents);

// Power-iteration estimate of the largest singular value of w [rows, cols].
double SpectralNorm(const Tensor& w, int iters = 500, double rel_tol = 1e-8);

}  // namespace coflow

#endif  // COFLOW_BACKBONE_H_
