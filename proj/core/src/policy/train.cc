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

#include "hapchunk/policy/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "hapchunk/error.h"
#include "hapchunk/policy/checkpoint.h"
#include "hapchunk/seeding.h"
#include "hapchunk/tensor/adam.h"

namespace hapchunk::policy {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kBatchStream = 0xba7c;
constexpr std::uint64_t kLatentStream = 0x2a7e;

}  // namespace

ActionChunk ChunkAt(const demo::Episode& episode, std::size_t t,
                    std::size_t k) {
  const std::size_t len = episode.length();
  if (t >= len) {
    throw Error(ErrorCode::kContract, "chunk start " + std::to_string(t) +
                                          " past episode length " +
                                          std::to_string(len));
  }
  ActionChunk chunk(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto a = episode.action(std::min(t + i, len - 1));
    std::copy(a.begin(), a.end(), chunk[i].begin());
  }
  return chunk;
}

std::vector<TrainingSample> SampleTrainingBatch(const demo::Dataset& dataset,
                                                std::size_t k,
                                                std::size_t batch_size,
                                                std::mt19937_64& rng) {
  if (dataset.episodes.empty()) {
    throw Error(ErrorCode::kContract, "cannot sample from an empty dataset");
  }
  std::vector<std::size_t> ends;
  std::size_t total = 0;
  for (const demo::Episode& ep : dataset.episodes) {
    if (ep.length() == 0) {
      throw Error(ErrorCode::kContract, "dataset contains an empty episode");
    }
    total += ep.length();
    ends.push_back(total);
  }
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::vector<TrainingSample> batch(batch_size);
  for (TrainingSample& s : batch) {
    const std::size_t flat = pick(rng);
    s.episode = static_cast<std::size_t>(
        std::upper_bound(ends.begin(), ends.end(), flat) - ends.begin());
    s.step = flat - (s.episode == 0 ? 0 : ends[s.episode - 1]);
    const demo::Episode& ep = dataset.episodes[s.episode];
    s.observation = ep.ObservationAt(s.step);
    s.target = ChunkAt(ep, s.step, k);
  }
  return batch;
}

double TrainLog::FinalReconstruction(std::size_t window) const {
  if (reconstruction.empty()) return 0.0;
  const std::size_t n = std::min(window, reconstruction.size());
  return std::accumulate(reconstruction.end() - static_cast<long>(n),
                         reconstruction.end(), 0.0) /
         static_cast<double>(n);
}

ModelParams InitialParams(const PolicyConfig& cfg) {
  return InitParams(cfg, DeriveSeed(cfg.rng_seed, kInitStream));
}

TrainResult Train(const demo::Dataset& dataset, const PolicyConfig& cfg,
                  const TrainProgress& progress) {
  cfg.Validate();
  if (dataset.episodes.empty()) {
    throw Error(ErrorCode::kContract, "cannot train on an empty dataset");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainResult result{InitialParams(cfg), {}};
  std::vector<Tensor> params = result.params.All();
  tensor::AdamState adam =
      tensor::AdamState::For(params, tensor::AdamOptions{.lr = cfg.lr});
  std::mt19937_64 batch_rng(DeriveSeed(cfg.rng_seed, kBatchStream));
  std::mt19937_64 latent_rng(DeriveSeed(cfg.rng_seed, kLatentStream));
  const std::size_t k = cfg.chunk_k, b = cfg.batch_size;
  TrainLog& log = result.log;

  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    const std::vector<TrainingSample> batch =
        SampleTrainingBatch(dataset, k, b, batch_rng);
    std::vector<env::Observation> obs(b);
    std::vector<double> chunks(b * k * kActionDim), proprio(b * 4);
    for (std::size_t s = 0; s < b; ++s) {
      obs[s] = batch[s].observation;
      for (std::size_t i = 0; i < k; ++i) {
        std::copy(batch[s].target[i].begin(), batch[s].target[i].end(),
                  chunks.begin() + (s * k + i) * kActionDim);
      }
      std::copy(obs[s].proprio.begin(), obs[s].proprio.end(),
                proprio.begin() + 4 * s);
    }
    const Tensor chunk_rows = Tensor::FromData({b, k * kActionDim}, chunks);
    const Tensor target = Tensor::FromData({b * k, kActionDim}, chunks);

    Tape tape;
    const Tensor tokens = Tokenize(tape, obs, result.params, cfg);
    const Posterior post =
        CvaeEncode(tape, chunk_rows, Tensor::FromData({b, 4}, proprio),
                   result.params, cfg);
    const Tensor z = SampleLatent(tape, post, latent_rng);
    const Tensor pred = Forward(tape, tokens, z, result.params, cfg);
    const LossTerms loss = Loss(tape, pred, target, post, cfg.beta_kl);
    const double total = loss.total.item();
    if (!std::isfinite(total)) {
      throw Error(ErrorCode::kNumeric,
                  "non-finite loss at training step " + std::to_string(step));
    }
    tape.Backward(loss.total);
    tensor::AdamStep(params, adam);
    tensor::ZeroGrads(params);

    log.total.push_back(total);
    log.reconstruction.push_back(loss.reconstruction.item());
    log.kl.push_back(loss.kl.item());
    if (progress) progress(step, total, log.reconstruction.back(), log.kl.back());
  }
  log.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  log.params_checksum = ParamsChecksum(result.params);
  return result;
}

ActionChunk Predict(const env::Observation& obs, const ModelParams& params,
                    const PolicyConfig& cfg) {
  Tape tape(false);
  const Tensor tokens =
      Tokenize(tape, std::span<const env::Observation>(&obs, 1), params, cfg);
  const Tensor z = Tensor::Zeros({1, cfg.z_dim});
  const Tensor out = Forward(tape, tokens, z, params, cfg);
  ActionChunk chunk(cfg.chunk_k);
  auto d = out.data();
  for (std::size_t i = 0; i < cfg.chunk_k; ++i) {
    for (std::size_t j = 0; j < kActionDim; ++j) {
      chunk[i][j] = std::clamp(d[i * kActionDim + j], 0.0, 1.0);
    }
  }
  return chunk;
}

}  // namespace hapchunk::policy
