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

#include "hapchunk/control/chunk_buffer.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hapchunk/error.h"

namespace hapchunk::control {

void ChunkBuffer::Push(std::int64_t t_now, const policy::ActionChunk& chunk) {
  if (chunk.size() != k_) {
    throw Error(ErrorCode::kDimension,
                "chunk has " + std::to_string(chunk.size()) + " rows, expected " +
                    std::to_string(k_));
  }
  slots_.erase(slots_.begin(), slots_.lower_bound(t_now));
  for (std::size_t i = 0; i < k_; ++i) {
    auto& preds = slots_[t_now + static_cast<std::int64_t>(i)];
    preds.push_back({t_now, chunk[i]});
    if (preds.size() > k_) preds.erase(preds.begin());
  }
}

const std::vector<Prediction>& ChunkBuffer::At(std::int64_t t) const {
  static const std::vector<Prediction> kEmpty;
  auto it = slots_.find(t);
  return it == slots_.end() ? kEmpty : it->second;
}

std::vector<std::int64_t> ChunkBuffer::Ages(std::int64_t t,
                                            std::int64_t t_now) const {
  std::vector<std::int64_t> ages;
  for (const Prediction& p : At(t)) ages.push_back(t_now - p.predicted_at);
  return ages;
}

std::size_t ChunkBuffer::Count(std::int64_t t) const { return At(t).size(); }

std::int64_t ChunkBuffer::earliest() const {
  return slots_.empty() ? 0 : slots_.begin()->first;
}

env::Action EnsembledAction(const ChunkBuffer& buffer, std::int64_t t,
                            const EnsembleOptions& options) {
  const std::vector<Prediction>& preds = buffer.At(t);
  if (preds.empty()) {
    throw Error(ErrorCode::kContract,
                "no predictions for timestep " + std::to_string(t));
  }
  const std::size_t n = preds.size();
  std::array<double, policy::kActionDim> sum{};
  double weight_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t rank =
        options.orientation == EnsembleOrientation::kOldestFirst ? r
                                                                 : n - 1 - r;
    const double w = std::exp(-options.m * static_cast<double>(rank));
    for (std::size_t j = 0; j < sum.size(); ++j) {
      sum[j] += w * preds[r].action[j];
    }
    weight_sum += w;
  }
  env::Action out;
  for (std::size_t j = 0; j < sum.size(); ++j) {
    out.target[j] = std::clamp(sum[j] / weight_sum, 0.0, 1.0);
  }
  return out;
}

}  // namespace hapchunk::control
