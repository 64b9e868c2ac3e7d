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

#ifndef COFLOW_TENSOR_H_
#define COFLOW_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace coflow {

using Shape = std::vector<std::int64_t>;

std::int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Operation kinds recorded on the tape. Names are used in error messages.
enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kScalarMul,
  kMul,
  kMatmul,
  kConv1d,
  kStridedConv1d,
  kTransposedConv1d,
  kGroupNorm,
  kMish,
  kSoftmax,
  kLinear,
  kConcat,
  kSlice,
  kReshape,
  kPermute,
  kExpand,
  kMse,
  kSum,
  kMean,
  kTimeEmbedding,
  kStopGradient,
  kAttention,
};

const char* OpKindName(OpKind kind);

namespace internal {

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  // Producing node on the thread's tape, or -1 for leaves and constants.
  std::int64_t node = -1;
  std::uint64_t tape_generation = 0;

  std::span<double> EnsureGrad();
};

}  // namespace internal

// Dense row-major float64 tensor with shared storage. Copies of a Tensor
// alias the same storage; use Clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(storage_->shape.size()); }
  std::int64_t numel() const {
    return static_cast<std::int64_t>(storage_->data.size());
  }

  std::span<const double> data() const { return storage_->data; }
  std::span<double> mutable_data() { return storage_->data; }
  const std::vector<double>& values() const { return storage_->data; }
  double item() const;
  double at(std::int64_t flat_index) const { return storage_->data[flat_index]; }

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool value) { storage_->requires_grad = value; }
  bool has_grad() const { return !storage_->grad.empty(); }
  // Gradient view; zeros of matching size when none has been accumulated.
  std::vector<double> grad() const;
  void ZeroGrad() { storage_->grad.clear(); }

  Tensor Clone() const;
  // Same values, no autodiff history, requires_grad = false.
  Tensor Detached() const { return Clone(); }

  internal::TensorStorage* storage() const { return storage_.get(); }
  const std::shared_ptr<internal::TensorStorage>& shared_storage() const {
    return storage_;
  }

 private:
  std::shared_ptr<internal::TensorStorage> storage_;
};

// Append-only operation record list for one thread. Nodes are appended in
// execution order, so every node's inputs precede it. A tape is consumed by
// exactly one Backward() call.
class Tape {
 public:
  struct Node {
    OpKind kind;
    std::vector<std::int64_t> inputs;  // producing node ids (-1 for leaves)
    std::function<void()> backward;
  };

  static Tape& Current();

  // Records `backward` for an op producing `output` from `inputs` if any
  // input requires grad and recording is enabled. Returns whether recorded.
  bool Record(OpKind kind, std::span<const Tensor> inputs, Tensor& output,
              std::function<void()> backward);

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t generation() const { return generation_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Drops all recorded nodes without running them.
  void Reset();

 private:
  friend void Backward(const Tensor& loss);
  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

// Disables tape recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

// Populates grad on every requires-grad leaf reachable from `loss`, then
// consumes the tape. Throws if loss is not scalar, was not recorded on the
// live tape, or the tape was already consumed.
void Backward(const Tensor& loss);

}  // namespace coflow

#endif  // COFLOW_TENSOR_H_
