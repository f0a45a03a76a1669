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

#include "hapchunk/tensor/grad_check.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hapchunk/error.h"

namespace hapchunk::tensor {
namespace {

double EvalLoss(const LossClosure& loss_fn) {
  Tape tape(/*recording=*/false);
  const double v = loss_fn(tape).item();
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNumeric, "gradient check: non-finite loss");
  }
  return v;
}

}  // namespace

GradCheckReport GradientCheck(const LossClosure& loss_fn,
                              std::vector<Tensor> params,
                              const GradCheckOptions& options) {
  if (!(options.h > 0.0) || options.n_probes == 0) {
    throw Error(ErrorCode::kContract,
                "gradient check needs h > 0 and at least one probe");
  }
  std::vector<std::size_t> candidates;
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].requires_grad()) {
      candidates.push_back(i);
      total += params[i].size();
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kContract,
                "gradient check: no parameter requires a gradient");
  }

  for (Tensor& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    if (!std::isfinite(loss.item())) {
      throw Error(ErrorCode::kNumeric, "gradient check: non-finite loss");
    }
    tape.Backward(loss);
  }

  // Flat index over the concatenated trainable elements.
  std::vector<std::size_t> cumulative;
  std::size_t acc = 0;
  for (std::size_t i : candidates) {
    acc += params[i].size();
    cumulative.push_back(acc);
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);

  GradCheckReport report;
  for (std::size_t n = 0; n < options.n_probes; ++n) {
    const std::size_t flat = pick(rng);
    const std::size_t slot =
        std::upper_bound(cumulative.begin(), cumulative.end(), flat) -
        cumulative.begin();
    const std::size_t pi = candidates[slot];
    const std::size_t elem = flat - (slot == 0 ? 0 : cumulative[slot - 1]);
    Tensor& p = params[pi];
    const double orig = p.data()[elem];
    p.data()[elem] = orig + options.h;
    const double plus = EvalLoss(loss_fn);
    p.data()[elem] = orig - options.h;
    const double minus = EvalLoss(loss_fn);
    p.data()[elem] = orig;

    GradCheckProbe probe;
    probe.param_index = pi;
    probe.element = elem;
    probe.analytic = p.grad()[elem];
    probe.numeric = (plus - minus) / (2.0 * options.h);
    probe.rel_error =
        std::abs(probe.analytic - probe.numeric) /
        std::max(1e-12, std::abs(probe.analytic) + std::abs(probe.numeric));
    report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace hapchunk::tensor
