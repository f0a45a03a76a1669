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

#ifndef HAPCHUNK_POLICY_TRAIN_H_
#define HAPCHUNK_POLICY_TRAIN_H_

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hapchunk/demo/dataset.h"
#include "hapchunk/policy/model.h"

namespace hapchunk::policy {

struct TrainingSample {
  std::size_t episode = 0;
  std::size_t step = 0;
  env::Observation observation;
  ActionChunk target;  // k actions, padded by repeating the final one
};

// Draws batch_size (episode, t) pairs uniformly over all recorded steps.
// Throws kContract for an empty dataset or an empty episode.
std::vector<TrainingSample> SampleTrainingBatch(const demo::Dataset& dataset,
                                                std::size_t k,
                                                std::size_t batch_size,
                                                std::mt19937_64& rng);

// The target chunk starting at step t of an episode.
ActionChunk ChunkAt(const demo::Episode& episode, std::size_t t,
                    std::size_t k);

struct TrainLog {
  std::vector<double> total;
  std::vector<double> reconstruction;
  std::vector<double> kl;
  double wall_seconds = 0.0;
  std::string params_checksum;

  // Mean reconstruction L1 over the last `window` steps.
  double FinalReconstruction(std::size_t window = 100) const;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// Parameters Train starts from.
ModelParams InitialParams(const PolicyConfig& cfg);

using TrainProgress = std::function<void(std::size_t step, double total,
                                         double reconstruction, double kl)>;

// Adam on L1 + beta * KL with a reparameterized latent. Deterministic in
// (dataset, cfg). Throws kNumeric naming the step if the loss is not finite.
TrainResult Train(const demo::Dataset& dataset, const PolicyConfig& cfg,
                  const TrainProgress& progress = {});

// Chunk for one observation with z = 0, each coordinate clamped to [0, 1].
ActionChunk Predict(const env::Observation& obs, const ModelParams& params,
                    const PolicyConfig& cfg);

}  // namespace hapchunk::policy

#endif  // HAPCHUNK_POLICY_TRAIN_H_
