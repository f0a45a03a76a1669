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

#include "hapchunk/tensor/tensor.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "hapchunk/error.h"

namespace hapchunk::tensor {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kDimension,
                  "tensor dimensions must be positive, got " +
                      ShapeString(shape));
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->data.assign(NumElements(shape), value);
  impl->shape = std::move(shape);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data,
                        bool requires_grad) {
  if (NumElements(shape) != data.size()) {
    throw Error(ErrorCode::kDimension,
                "shape " + ShapeString(shape) + " does not match " +
                    std::to_string(data.size()) + " elements");
  }
  Tensor t = Zeros(std::move(shape), false);
  t.impl_->data = std::move(data);
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return Full({}, value, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  return impl_->shape.size() >= 2 ? impl_->shape[0] : 1;
}

std::size_t Tensor::cols() const {
  return impl_->shape.empty() ? 1 : impl_->shape.back();
}

std::span<double> Tensor::data() { return impl_->data; }

std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorCode::kContract,
                "item() on non-scalar tensor " + ShapeString(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  if (value) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  } else {
    impl_->grad.clear();
  }
}

std::span<double> Tensor::grad() { return impl_->grad; }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::Clone() const {
  Tensor t = FromData(impl_->shape, impl_->data, false);
  if (impl_->requires_grad) {
    t.impl_->requires_grad = true;
    t.impl_->grad = impl_->grad;
  }
  return t;
}

Tensor Tape::MakeOutput(Shape shape,
                        std::initializer_list<const Tensor*> inputs) {
  bool needs_grad = false;
  if (recording_) {
    for (const Tensor* in : inputs) needs_grad |= in->requires_grad();
  }
  Tensor out = Tensor::Zeros(std::move(shape), needs_grad);
  out.impl_->produced_by_tape = needs_grad;
  return out;
}

Tensor Tape::MakeOutput(Shape shape, const std::vector<Tensor>& inputs) {
  bool needs_grad = false;
  if (recording_) {
    for (const Tensor& in : inputs) needs_grad |= in.requires_grad();
  }
  Tensor out = Tensor::Zeros(std::move(shape), needs_grad);
  out.impl_->produced_by_tape = needs_grad;
  return out;
}

void Tape::Record(const Tensor& output, BackwardFn backward) {
  if (!recording_ || !output.requires_grad()) return;
  nodes_.push_back(Node{output, std::move(backward)});
}

void Tape::Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorCode::kContract,
                "backward requires a scalar loss, got " +
                    (loss.defined() ? ShapeString(loss.shape())
                                    : std::string("undefined")));
  }
  auto it = std::find_if(nodes_.rbegin(), nodes_.rend(), [&](const Node& n) {
    return n.output.SameStorage(loss);
  });
  if (it == nodes_.rend()) {
    throw Error(ErrorCode::kContract,
                "backward: loss was not produced on this tape");
  }
  for (Node& node : nodes_) {
    auto& impl = *node.output.impl_;
    std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
    impl.grad_live = false;
  }
  loss.impl_->grad[0] = 1.0;
  loss.impl_->grad_live = true;
  for (; it != nodes_.rend(); ++it) {
    if (it->output.impl_->grad_live) it->backward();
  }
}

std::span<double> GradAccess::Sink(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  t.impl_->grad_live = true;
  return t.impl_->grad;
}

std::span<const double> GradAccess::Incoming(const Tensor& t) {
  return t.impl_->grad;
}

}  // namespace hapchunk::tensor
