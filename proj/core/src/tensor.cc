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

#include "coflow/tensor.h"

#include <sstream>
#include <stdexcept>
#include <utility>

namespace coflow {

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t extent : shape) {
    if (extent < 0) throw std::invalid_argument("negative tensor extent");
    n *= extent;
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kScalarMul: return "scalar-mul";
    case OpKind::kMul: return "elementwise-mul";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kStridedConv1d: return "strided-conv1d";
    case OpKind::kTransposedConv1d: return "transposed-conv1d";
    case OpKind::kGroupNorm: return "group-normalization";
    case OpKind::kMish: return "mish";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLinear: return "linear";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute: return "permute";
    case OpKind::kExpand: return "expand";
    case OpKind::kMse: return "mse";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kTimeEmbedding: return "sinusoidal-time-embedding";
    case OpKind::kStopGradient: return "stop-gradient";
    case OpKind::kAttention: return "multi-head-attention";
  }
  return "unknown";
}

namespace internal {

std::span<double> TensorStorage::EnsureGrad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace internal

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : storage_(std::make_shared<internal::TensorStorage>()) {
  if (NumElements(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + ShapeString(shape));
  }
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
  storage_->requires_grad = requires_grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  const std::int64_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::int64_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value),
                requires_grad);
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw std::out_of_range("axis out of range for shape " +
                            ShapeString(shape()));
  }
  return storage_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor of shape " +
                                ShapeString(shape()));
  }
  return storage_->data[0];
}

std::vector<double> Tensor::grad() const {
  if (storage_->grad.empty()) return std::vector<double>(storage_->data.size());
  return storage_->grad;
}

Tensor Tensor::Clone() const {
  return Tensor(storage_->shape, storage_->data, false);
}

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tape& Tape::Current() {
  thread_local Tape tape;
  return tape;
}

bool Tape::Record(OpKind kind, std::span<const Tensor> inputs, Tensor& output,
                  std::function<void()> backward) {
  if (!g_grad_enabled) return false;
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (!any) return false;
  Node node{kind, {}, std::move(backward)};
  node.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    const auto* s = t.storage();
    node.inputs.push_back(s->tape_generation == generation_ ? s->node : -1);
  }
  nodes_.push_back(std::move(node));
  auto* out = output.storage();
  out->requires_grad = true;
  out->node = static_cast<std::int64_t>(nodes_.size()) - 1;
  out->tape_generation = generation_;
  return true;
}

void Tape::Reset() {
  nodes_.clear();
  ++generation_;
}

void Backward(const Tensor& loss) {
  Tape& tape = Tape::Current();
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument(
        "backward: loss must be a scalar tensor, got shape " +
        (loss.defined() ? ShapeString(loss.shape()) : std::string("<null>")));
  }
  const auto* s = loss.storage();
  if (s->node < 0) {
    throw std::logic_error("backward: loss has no recorded graph");
  }
  if (s->tape_generation != tape.generation_) {
    throw std::logic_error(
        "backward: graph already consumed (second backward on the same "
        "recorded graph)");
  }
  loss.storage()->EnsureGrad()[0] += 1.0;
  // Nodes after the loss cannot contribute to it.
  for (std::int64_t i = s->node; i >= 0; --i) {
    tape.nodes_[i].backward();
  }
  tape.Reset();
}

}  // namespace coflow
