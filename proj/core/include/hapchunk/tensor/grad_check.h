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

#ifndef HAPCHUNK_TENSOR_GRAD_CHECK_H_
#define HAPCHUNK_TENSOR_GRAD_CHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "hapchunk/tensor/tensor.h"

namespace hapchunk::tensor {

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t n_probes = 64;
  std::uint64_t seed = 0;
};

struct GradCheckProbe {
  std::size_t param_index = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckProbe> probes;
};

// Must build the scalar loss on the given tape and be deterministic: the
// checker calls it once with a recording tape and twice per probe without.
using LossClosure = std::function<Tensor(Tape&)>;

// Compares reverse-mode gradients against central differences at
// `n_probes` scalar parameters drawn uniformly from the elements of the
// parameters that require gradients. Relative error per probe is
// |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|). Existing gradients on
// `params` are cleared. Throws kNumeric on a non-finite loss and kContract
// when no parameter requires a gradient.
GradCheckReport GradientCheck(const LossClosure& loss_fn,
                              std::vector<Tensor> params,
                              const GradCheckOptions& options);

}  // namespace hapchunk::tensor

#endif  // HAPCHUNK_TENSOR_GRAD_CHECK_H_
