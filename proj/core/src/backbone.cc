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


#include "coflow/backbone.h"

#include <cmath>
#include <stdexcept>

#include "coflow/ops.h"

namespace coflow {
namespace {

constexpr int kTimeFeatures = 32;

Tensor Expand3(const Tensor& x, std::int64_t t) { return ops::Expand(x, 2, t); }

}  // namespace

void BackboneConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw std::invalid_argument("backbone config: " + m);
  };
  if (base_dim <= 0 || groups <= 0 || attn_heads <= 0) fail("sizes must be positive");
  if (base_dim % groups != 0) fail("base_dim not divisible by groups");
  if (base_dim % attn_heads != 0) fail("base_dim not divisible by attn_heads");
  if (dim_mults.size() < 2) fail("need at least two dim_mults");
  for (int m : dim_mults) {
    if (m <= 0) fail("dim_mults must be positive");
  }
  if (kernel <= 0 || kernel % 2 == 0) fail("kernel must be odd");
  if (n_agents <= 0 || horizon <= 0 || per_agent_dim <= 0 || history < 0) {
    fail("agents, horizon and per_agent_dim must be positive");
  }
  if (history + 1 > horizon) fail("history window longer than horizon");
  if (precondition && !(sigma_data > 0.0)) fail("sigma_data must be positive");
}

int BackboneConfig::PaddedHorizon() const {
  const int stride = 1 << (Levels() - 1);
  return (horizon + stride - 1) / stride * stride;
}

CvaLayer::CvaLayer(ParameterSet& params, const std::string& name,
                   std::int64_t width, int heads, Rng& rng)
    : width_(width), heads_(heads) {
  if (heads <= 0 || width % heads != 0) {
    throw std::invalid_argument("cva: width " + std::to_string(width) +
                                " not divisible by heads " +
                                std::to_string(heads));
  }
  wq_ = params.Add(name + ".w_query", UniformInit({width, width}, width, rng));
  wk_ = params.Add(name + ".w_key", UniformInit({width, width}, width, rng));
  wv_ = params.Add(name + ".w_value", UniformInit({width, width}, width, rng));
  gamma_ = params.Add(name + ".gamma", Tensor::Scalar(0.0));
}

Tensor CvaLayer::Forward(const Tensor& c, std::int64_t agents,
                         double alpha_scale,
                         std::vector<double>* attention) const {
  if (c.rank() != 3 || c.dim(1) != width_ || c.dim(0) % agents != 0) {
    throw std::invalid_argument("cva: expected [B * " + std::to_string(agents) +
                                ", " + std::to_string(width_) +
                                ", T], got " + ShapeString(c.shape()));
  }
  // A zero gate scale leaves the features untouched; skipping the attention
  // keeps the result bit-identical to the unattended path.
  if (alpha_scale == 0.0 && attention == nullptr) return c;
  const std::int64_t batch = c.dim(0) / agents, len = c.dim(2);
  // [B, N, F, T] -> [B, T, N, F] -> [B * T, N, F]
  Tensor tokens = ops::Permute(ops::Reshape(c, {batch, agents, width_, len}),
                               {0, 3, 1, 2});
  tokens = ops::Reshape(tokens, {batch * len, agents, width_});
  std::vector<double> weights;
  Tensor mixed = ops::MultiHeadAttention(
      ops::Linear(tokens, wq_, Tensor()), ops::Linear(tokens, wk_, Tensor()),
      ops::Linear(tokens, wv_, Tensor()), heads_,
      attention != nullptr ? &weights : nullptr);
  if (attention != nullptr) {
    attention->resize(agents * agents, 0.0);
    const std::int64_t blocks = batch * len * heads_;
    for (std::int64_t g = 0; g < blocks; ++g) {
      for (std::int64_t i = 0; i < agents * agents; ++i) {
        (*attention)[i] += weights[g * agents * agents + i] /
                           static_cast<double>(len * heads_);
      }
    }
  }
  mixed = ops::Reshape(mixed, {batch, len, agents, width_});
  mixed = ops::Reshape(ops::Permute(mixed, {0, 2, 3, 1}), c.shape());
  Tensor gate = ops::ScalarMul(gamma_, alpha_scale);
  return ops::Add(c, ops::Mul(mixed, gate));
}

ResidualBlock::ResidualBlock(ParameterSet& params, const std::string& name,
                             std::int64_t in, std::int64_t out,
                             std::int64_t embed, int kernel, int groups,
                             Rng& rng)
    : out_(out), project_(in != out) {
  conv1_ = Conv1dLayer(params, name + ".conv1", in, out, kernel, 1, kernel / 2, rng);
  norm1_ = GroupNormLayer(params, name + ".norm1", out, groups);
  film_ = LinearLayer(params, name + ".film", embed, 2 * out, rng);
  conv2_ = Conv1dLayer(params, name + ".conv2", out, out, kernel, 1, kernel / 2, rng);
  norm2_ = GroupNormLayer(params, name + ".norm2", out, groups);
  if (project_) {
    residual_ = Conv1dLayer(params, name + ".residual", in, out, 1, 1, 0, rng);
  }
}

Tensor ResidualBlock::operator()(const Tensor& x, const Tensor& embed) const {
  const std::int64_t len = x.dim(2);
  Tensor h = ops::Mish(norm1_(conv1_(x)));
  Tensor film = film_(ops::Mish(embed));  // [M, 2 * out]
  Tensor scale = Expand3(ops::Slice(film, 1, 0, out_), len);
  Tensor shift = Expand3(ops::Slice(film, 1, out_, out_), len);
  h = ops::Add(ops::Mul(h, ops::Add(scale, Tensor::Scalar(1.0))), shift);
  h = ops::Mish(norm2_(conv2_(h)));
  return ops::Add(h, project_ ? residual_(x) : x);
}

VelocityNet::VelocityNet(const BackboneConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.Validate();
  Rng rng(seed);
  const std::int64_t e = config_.EmbedDim();
  const std::int64_t window = config_.history + 1;
  const std::int64_t d = config_.per_agent_dim;
  time1_ = LinearLayer(params_, "embed.time1", 2 * kTimeFeatures, e, rng);
  time2_ = LinearLayer(params_, "embed.time2", e, e, rng);
  ret1_ = LinearLayer(params_, "embed.return1", 1, e, rng);
  ret2_ = LinearLayer(params_, "embed.return2", e, e, rng);
  null_return_ = params_.Add("embed.null_return", RandomNormal({e}, rng, 0.1));
  obs1_ = LinearLayer(params_, "embed.obs1", window * d + 1, e, rng);
  obs2_ = LinearLayer(params_, "embed.obs2", e, e, rng);
  const std::int64_t cond = 3 * e;

  const int levels = config_.Levels();
  std::vector<std::int64_t> width(levels);
  for (int l = 0; l < levels; ++l) width[l] = config_.base_dim * config_.dim_mults[l];
  const int k = config_.kernel, g = config_.groups;
  std::int64_t in = d;
  for (int l = 0; l < levels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    enc_.emplace_back(params_, p, in, width[l], cond, k, g, rng);
    cva_.emplace_back(params_, "cva" + std::to_string(l), width[l],
                      config_.attn_heads, rng);
    if (l + 1 < levels) {
      down_.emplace_back(params_, p + ".down", width[l], width[l], 3, 2, 1, rng);
    }
    in = width[l];
  }
  mid_ = ResidualBlock(params_, "mid", in, in, cond, k, g, rng);
  for (int l = levels - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    dec_.emplace_back(params_, p, in + 2 * width[l], width[l], cond, k, g, rng);
    if (l > 0) {
      up_.emplace_back(params_, p + ".up", width[l], width[l - 1], 4, 2, 1, rng);
      in = width[l - 1];
    } else {
      in = width[l];
    }
  }
  head_conv_ = Conv1dLayer(params_, "head.conv", in, in, k, 1, k / 2, rng);
  head_norm_ = GroupNormLayer(params_, "head.norm", in, g);
  head_out_ = Conv1dLayer(params_, "head.out", in, d, 1, 1, 0, rng);
}

Tensor VelocityNet::Embed(const Tensor& r, const Tensor& t,
                          const Conditioning& cond, std::int64_t batch) const {
  const std::int64_t n = config_.n_agents, e = config_.EmbedDim();
  const std::int64_t m = batch * n;
  const std::int64_t window = config_.history + 1, d = config_.per_agent_dim;

  const Tensor times[] = {ops::TimeEmbedding(t, kTimeFeatures, config_.time_scale),
                          ops::TimeEmbedding(r, kTimeFeatures, config_.time_scale)};
  Tensor te = time2_(ops::Mish(time1_(ops::Concat(times, 1))));  // [B, e]
  te = ops::Reshape(ops::Expand(te, 1, n), {m, e});

  // Rows keep the return embedding or take the null embedding.
  std::vector<double> keep(m, 0.0);
  if (cond.returns.defined()) {
    if (cond.returns.shape() != Shape{batch, n}) {
      throw std::invalid_argument("conditioning returns: expected " +
                                  ShapeString({batch, n}) + ", got " +
                                  ShapeString(cond.returns.shape()));
    }
    for (std::int64_t b = 0; b < batch; ++b) {
      const bool dropped = !cond.drop.empty() && cond.drop[b] != 0;
      for (std::int64_t i = 0; i < n; ++i) keep[b * n + i] = dropped ? 0.0 : 1.0;
    }
  }
  Tensor null_rows = ops::Expand(null_return_, 0, m);
  Tensor re;
  if (cond.returns.defined()) {
    Tensor ret = ret2_(ops::Mish(ret1_(ops::Reshape(cond.returns, {m, 1}))));
    std::vector<double> keep_full(m * e), drop_full(m * e);
    for (std::int64_t i = 0; i < m; ++i) {
      std::fill_n(keep_full.begin() + i * e, e, keep[i]);
      std::fill_n(drop_full.begin() + i * e, e, 1.0 - keep[i]);
    }
    re = ops::Add(ops::Mul(ret, Tensor({m, e}, std::move(keep_full))),
                  ops::Mul(null_rows, Tensor({m, e}, std::move(drop_full))));
  } else {
    re = null_rows;
  }

  // Observation window with masked slots zeroed, plus a masked indicator.
  std::vector<double> feats(m * (window * d + 1), 0.0);
  if (cond.obs.defined() && cond.obs.shape() != Shape{batch, n, window, d}) {
    throw std::invalid_argument("conditioning obs: expected " +
                                ShapeString({batch, n, window, d}) + ", got " +
                                ShapeString(cond.obs.shape()));
  }
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t row = b * n + i;
      double* dst = feats.data() + row * (window * d + 1);
      const bool visible = cond.obs.defined() && cond.Visible(b, i);
      if (visible) {
        for (std::int64_t j = 0; j < window * d; ++j) {
          dst[j] = cond.obs.at(row * window * d + j);
        }
      }
      dst[window * d] = visible ? 0.0 : 1.0;
    }
  }
  Tensor oe = obs2_(ops::Mish(obs1_(Tensor({m, window * d + 1}, std::move(feats)))));
  const Tensor parts[] = {te, re, oe};
  return ops::Concat(parts, 1);
}

Tensor VelocityNet::Forward(const Tensor& z, const Tensor& r, const Tensor& t,
                            const Conditioning& cond, double alpha_scale,
                            ForwardDiagnostics* diag) const {
  const std::int64_t n = config_.n_agents, h = config_.horizon;
  const std::int64_t d = config_.per_agent_dim;
  if (z.rank() != 4 || z.dim(1) != n || z.dim(2) != h || z.dim(3) != d) {
    throw std::invalid_argument("velocity net: expected z of shape [B, " +
                                std::to_string(n) + ", " + std::to_string(h) +
                                ", " + std::to_string(d) + "], got " +
                                ShapeString(z.shape()));
  }
  const std::int64_t batch = z.dim(0);
  if (r.shape() != Shape{batch} || t.shape() != Shape{batch}) {
    throw std::invalid_argument("velocity net: times must have shape [B]");
  }
  const std::int64_t m = batch * n;
  const std::int64_t padded = config_.PaddedHorizon();
  Tensor x = z;
  if (padded != h) {
    Tensor last = ops::Slice(z, 2, h - 1, 1);
    std::vector<Tensor> parts{z};
    for (std::int64_t i = h; i < padded; ++i) parts.push_back(last);
    x = ops::Concat(parts, 2);
  }
  x = ops::Reshape(ops::Permute(x, {0, 1, 3, 2}), {m, d, padded});
  Tensor emb = Embed(r, t, cond, batch);

  const int levels = config_.Levels();
  std::vector<Tensor> skips, attended;
  if (diag != nullptr) {
    diag->attention.assign(levels, {});
    diag->gates.clear();
    diag->skip_shapes.clear();
  }
  for (int l = 0; l < levels; ++l) {
    Tensor e = enc_[l](x, emb);
    std::vector<double>* att = diag ? &diag->attention[l] : nullptr;
    Tensor c_hat = cva_[l].Forward(e, n, alpha_scale, att);
    if (diag != nullptr) {
      for (double& v : *att) v /= static_cast<double>(batch);
      diag->gates.push_back(cva_[l].gamma().item());
      diag->skip_shapes.push_back(e.shape());
    }
    skips.push_back(e);
    attended.push_back(c_hat);
    x = l + 1 < levels ? down_[l](e) : e;
  }
  x = mid_(x, emb);
  for (int i = 0; i < levels; ++i) {
    const int l = levels - 1 - i;
    const Tensor parts[] = {x, skips[l], attended[l]};
    x = dec_[i](ops::Concat(parts, 1), emb);
    if (l > 0) x = up_[i](x);
  }
  x = head_out_(ops::Mish(head_norm_(head_conv_(x))));  // [m, d, padded]
  x = ops::Permute(ops::Reshape(x, {batch, n, d, padded}), {0, 1, 3, 2});
  if (padded != h) x = ops::Slice(x, 2, 0, h);
  if (!config_.precondition) return x;
  // u = c_skip(t) z + c_out(t) F with per-item coefficients.
  const std::int64_t item = n * h * d;
  std::vector<double> skip(batch * item), out(batch * item);
  for (std::int64_t b = 0; b < batch; ++b) {
    const Precondition p = PreconditionAt(t.at(b), config_.sigma_data);
    std::fill_n(skip.begin() + b * item, item, p.c_skip);
    std::fill_n(out.begin() + b * item, item, p.c_out);
  }
  return ops::Add(ops::Mul(z, Tensor(z.shape(), std::move(skip))),
                  ops::Mul(x, Tensor(z.shape(), std::move(out))));
}

Precondition PreconditionAt(double t, double sigma_data) {
  const double s2 = sigma_data * sigma_data;
  const double var_z = (1.0 - t) * (1.0 - t) * s2 + t * t;
  const double cov = t - (1.0 - t) * s2;
  Precondition p;
  p.c_skip = cov / var_z;
  p.c_out = std::sqrt(std::max(1.0 + s2 - cov * cov / var_z, 0.0));
  return p;
}

Tensor VelocityNet::PerAgentForward(const Tensor& z, const Tensor& r,
                                    const Tensor& t,
                                    const Conditioning& cond) const {
  return Forward(z, r, t, cond, 0.0);
}

Conditioning ApplyCtdeMask(const Conditioning& cond, int acting_agent) {
  const std::int64_t batch = cond.batch();
  return ApplyCtdeMask(cond, std::vector<int>(batch, acting_agent));
}

Conditioning ApplyCtdeMask(const Conditioning& cond,
                           const std::vector<int>& acting_agents) {
  if (!cond.obs.defined()) {
    throw std::invalid_argument("ctde mask: conditioning has no observations");
  }
  const std::int64_t batch = cond.obs.dim(0), n = cond.obs.dim(1);
  if (static_cast<std::int64_t>(acting_agents.size()) != batch) {
    throw std::invalid_argument("ctde mask: one acting agent per item required");
  }
  const std::int64_t slot = cond.obs.dim(2) * cond.obs.dim(3);
  std::vector<double> obs = cond.obs.values();
  std::vector<double> visible(batch * n, 1.0);
  for (std::int64_t b = 0; b < batch; ++b) {
    const int acting = acting_agents[b];
    if (acting < -1 || acting >= n) {
      throw std::out_of_range("ctde mask: acting agent " +
                              std::to_string(acting) + " outside [0, " +
                              std::to_string(n) + ")");
    }
    for (std::int64_t i = 0; i < n; ++i) {
      bool vis = cond.Visible(b, i);
      if (acting >= 0 && i != acting) vis = false;
      visible[b * n + i] = vis ? 1.0 : 0.0;
      if (!vis) {
        std::fill_n(obs.begin() + (b * n + i) * slot, slot, 0.0);
      }
    }
  }
  Conditioning out = cond;
  out.obs = Tensor(cond.obs.shape(), std::move(obs));
  out.visible = Tensor({batch, n}, std::move(visible));
  return out;
}

double SpectralNorm(const Tensor& w, int iters, double rel_tol) {
  if (iters < 1) throw std::invalid_argument("spectral norm: iters must be >= 1");
  if (w.rank() != 2) throw std::invalid_argument("spectral norm: expected a matrix");
  const std::int64_t rows = w.dim(0), cols = w.dim(1);
  double frob = 0.0;
  for (double v : w.data()) frob += v * v;
  if (frob == 0.0) return 0.0;
  // Deterministic, generic start vector.
  std::vector<double> v(cols), u(rows);
  for (std::int64_t j = 0; j < cols; ++j) v[j] = 1.0 + 0.1 * std::sin(1.0 + j);
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    if (vn == 0.0) return 0.0;
    for (double& x : v) x /= vn;
    for (std::int64_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < cols; ++j) acc += w.at(i * cols + j) * v[j];
      u[i] = acc;
    }
    double un = 0.0;
    for (double x : u) un += x * x;
    const double next = std::sqrt(un);
    for (std::int64_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < rows; ++i) acc += w.at(i * cols + j) * u[i];
      v[j] = acc;
    }
    if (it > 0 && std::abs(next - sigma) <= rel_tol * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace coflow
