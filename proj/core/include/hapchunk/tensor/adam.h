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

#ifndef HAPCHUNK_TENSOR_ADAM_H_
#define HAPCHUNK_TENSOR_ADAM_H_

#include <cstdint>
#include <vector>

#include "hapchunk/tensor/tensor.h"

namespace hapchunk::tensor {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one pair per parameter.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState For(const std::vector<Tensor>& params, AdamOptions options);
};

// One bias-corrected Adam update of every parameter that requires a
// gradient, reading the gradient already accumulated on it. Parameters with
// requires_grad == false are left alone. Throws kDimension when the state
// does not shape-match `params`.
void AdamStep(std::vector<Tensor>& params, AdamState& state);

void ZeroGrads(std::vector<Tensor>& params);

}  // namespace hapchunk::tensor

#endif  // HAPCHUNK_TENSOR_ADAM_H_
