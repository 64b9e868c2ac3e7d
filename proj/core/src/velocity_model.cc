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


#include "coflow/velocity_model.h"

#include <stdexcept>

#include "coflow/ops.h"

namespace coflow {
namespace {

Tensor SliceBatch(const Tensor& t, std::int64_t start, std::int64_t count) {
  if (!t.defined()) return t;
  NoGradGuard guard;
  return ops::Slice(t, 0, start, count);
}

Tensor JoinBatch(const Tensor& a, const Tensor& b, const char* field) {
  if (a.defined() != b.defined()) {
    throw std::invalid_argument(std::string("conditioning field ") + field +
                                " present in only one batch");
  }
  if (!a.defined()) return a;
  NoGradGuard guard;
  const Tensor parts[] = {a, b};
  return ops::Concat(parts, 0);
}

}  // namespace

std::int64_t Conditioning::batch() const {
  if (returns.defined()) return returns.dim(0);
  if (obs.defined()) return obs.dim(0);
  if (visible.defined()) return visible.dim(0);
  return static_cast<std::int64_t>(drop.size());
}

Conditioning Conditioning::Slice(std::int64_t start, std::int64_t count) const {
  Conditioning out;
  out.returns = SliceBatch(returns, start, count);
  out.obs = SliceBatch(obs, start, count);
  out.visible = SliceBatch(visible, start, count);
  if (!drop.empty()) {
    out.drop.assign(drop.begin() + start, drop.begin() + start + count);
  }
  return out;
}

Conditioning Conditioning::Unconditional() const {
  Conditioning out = *this;
  out.drop.assign(static_cast<std::size_t>(batch()), 1);
  return out;
}

bool Conditioning::Visible(std::int64_t b, std::int64_t agent) const {
  if (!visible.defined()) return true;
  return visible.at(b * visible.dim(1) + agent) != 0.0;
}

Conditioning ConcatBatch(const Conditioning& a, const Conditioning& b) {
  Conditioning out;
  out.returns = JoinBatch(a.returns, b.returns, "returns");
  out.obs = JoinBatch(a.obs, b.obs, "obs");
  out.visible = JoinBatch(a.visible, b.visible, "visible");
  std::vector<std::uint8_t> da = a.drop, db = b.drop;
  if (da.empty() && db.empty()) return out;
  da.resize(static_cast<std::size_t>(a.batch()), 0);
  db.resize(static_cast<std::size_t>(b.batch()), 0);
  out.drop = da;
  out.drop.insert(out.drop.end(), db.begin(), db.end());
  return out;
}

}  // namespace coflow
