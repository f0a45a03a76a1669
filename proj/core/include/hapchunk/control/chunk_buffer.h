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

#ifndef HAPCHUNK_CONTROL_CHUNK_BUFFER_H_
#define HAPCHUNK_CONTROL_CHUNK_BUFFER_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "hapchunk/env/env.h"
#include "hapchunk/policy/model.h"

namespace hapchunk::control {

// Which end of the prediction stack gets weight exp(0) = 1.
enum class EnsembleOrientation {
  kOldestFirst,  // rank 0 = earliest prediction
  kNewestFirst,
};

struct EnsembleOptions {
  double m = 0.1;
  EnsembleOrientation orientation = EnsembleOrientation::kOldestFirst;
};

struct Prediction {
  std::int64_t predicted_at = 0;
  std::array<double, policy::kActionDim> action{};
};

// Overlapping chunk predictions keyed by the absolute timestep they target.
class ChunkBuffer {
 public:
  explicit ChunkBuffer(std::size_t k) : k_(k) {}

  // Registers chunk row i for timestep t_now + i and evicts every timestep
  // before t_now. Throws kDimension unless the chunk has k rows.
  void Push(std::int64_t t_now, const policy::ActionChunk& chunk);

  // Predictions for t, oldest first.
  const std::vector<Prediction>& At(std::int64_t t) const;
  // t_now - predicted_at for each prediction of t, oldest first.
  std::vector<std::int64_t> Ages(std::int64_t t, std::int64_t t_now) const;
  std::size_t Count(std::int64_t t) const;
  std::size_t horizon() const { return k_; }
  std::size_t timesteps() const { return slots_.size(); }
  std::int64_t earliest() const;

 private:
  std::size_t k_;
  std::map<std::int64_t, std::vector<Prediction>> slots_;
};

// Weighted mean of the predictions for t with weight exp(-m * rank), rank
// counted from the end selected by the orientation, clamped to [0, 1].
// Throws kContract when t has no predictions.
env::Action EnsembledAction(const ChunkBuffer& buffer, std::int64_t t,
                            const EnsembleOptions& options = {});

}  // namespace hapchunk::control

#endif  // HAPCHUNK_CONTROL_CHUNK_BUFFER_H_
