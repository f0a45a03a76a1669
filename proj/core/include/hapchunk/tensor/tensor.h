// Copyright 2026 The Hapchunk Authors
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

#ifndef HAPCHUNK_TENSOR_TENSOR_H_
#define HAPCHUNK_TENSOR_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hapchunk::tensor {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major float64 tensor with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, which is what
// lets the tape write gradients back into model parameters. Use Clone() for
// an independent deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading dimension of a rank-2 tensor, 1 for rank 0/1.
  std::size_t rows() const;
  // Trailing dimension (1 for a scalar).
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  // Empty span when requires_grad() is false.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  Tensor Clone() const;
  bool SameStorage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Tape;
  friend class GradAccess;

  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    // Set on tape outputs; cleared only for leaves.
    bool produced_by_tape = false;
    // True once any gradient has flowed into a tape output this pass.
    bool grad_live = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;
};

// Ordered record of primitive operations for reverse-mode differentiation.
//
// Ops append nodes in execution order, so the record is topologically sorted
// by construction. A tape constructed with recording=false is an inference
// context: ops still compute values but nothing is recorded and no output
// requires a gradient.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  // Creates the output tensor of an op. The output requires a gradient when
  // the tape records and any input does.
  Tensor MakeOutput(Shape shape, std::initializer_list<const Tensor*> inputs);
  Tensor MakeOutput(Shape shape, const std::vector<Tensor>& inputs);

  // Registers the backward closure of an op whose output came from
  // MakeOutput. Ignored when the output does not require a gradient.
  void Record(const Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every reachable node once in reverse
  // order. Leaf gradients accumulate across calls; intermediate gradients are
  // reset at the start of each call. Throws kContract when the loss is not a
  // scalar produced on this tape.
  void Backward(const Tensor& loss);

  void Clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

// Gradient plumbing used by op implementations. Returns a writable gradient
// buffer for `t` (allocating it for tape outputs), or an empty span when `t`
// does not take gradients.
class GradAccess {
 public:
  static std::span<double> Sink(const Tensor& t);
  // Gradient flowing into an op output; empty when nothing reached it.
  static std::span<const double> Incoming(const Tensor& t);
};

}  // namespace hapchunk::tensor

#endif  // HAPCHUNK_TENSOR_TENSOR_H_
