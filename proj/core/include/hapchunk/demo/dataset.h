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

#ifndef HAPCHUNK_DEMO_DATASET_H_
#define HAPCHUNK_DEMO_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hapchunk/demo/expert.h"
#include "hapchunk/env/env.h"

namespace hapchunk::demo {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::size_t kForceDim = 3;
inline constexpr std::size_t kPoseDim = 4;

// A recorded demonstration, stored as float32 arrays that mirror the on-disk
// layout. Row t of each array belongs to the same control step: the
// observation seen before executing action t.
struct Episode {
  env::EnvConfig config;  // exact config that reproduces the episode
  std::vector<float> images;   // T x 1024
  std::vector<float> forces;   // T x 3
  std::vector<float> proprio;  // T x 4
  std::vector<float> actions;  // T x 4
  bool is_recovery = false;
  bool pick_success = false;
  bool delivery_success = false;
  int target_tube = 0;
  int grasp_attempts = 0;
  // Expert rollouts thrown away before this one was accepted.
  int discards = 0;

  std::size_t length() const { return actions.size() / kPoseDim; }
  std::span<const float> image(std::size_t t) const {
    return std::span<const float>(images).subspan(t * env::kImagePixels,
                                                  env::kImagePixels);
  }
  std::span<const float> force(std::size_t t) const {
    return std::span<const float>(forces).subspan(t * kForceDim, kForceDim);
  }
  std::span<const float> pose(std::size_t t) const {
    return std::span<const float>(proprio).subspan(t * kPoseDim, kPoseDim);
  }
  std::span<const float> action(std::size_t t) const {
    return std::span<const float>(actions).subspan(t * kPoseDim, kPoseDim);
  }

  void Append(const env::Observation& obs, const env::Action& action);
  // Observation t widened back to float64.
  env::Observation ObservationAt(std::size_t t) const;

  bool operator==(const Episode&) const = default;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  int n_success = 0;
  int n_recovery = 0;
  std::uint64_t base_seed = 0;
  double recovery_fraction = 0.0;
  int total_discards = 0;
  env::EnvConfig env_config;  // template the episodes were derived from

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Episode> episodes;

  bool operator==(const Dataset&) const = default;
};

// Per-step record of an expert rollout, used by tests and trace export.
struct ExpertTrace {
  std::vector<ExpertPhase> phases;  // phase of the action taken at step t
  std::vector<ExpertPhase> check_outcomes;
};

// Rolls the scripted expert in a fresh environment built from `config`
// (with force_first_slip overridden by the argument). Rollouts that do not
// deliver within max_steps are discarded and retried on a fresh stream
// derived from the config seed; 20 consecutive discards throw kGeneration.
Episode GenerateEpisode(const env::EnvConfig& config,
                        bool force_slip_on_first_attempt,
                        ExpertTrace* trace = nullptr);

// Collection profile shared by every episode of a dataset: no natural slips,
// so the only failures are the staged ones of recovery episodes.
env::EnvConfig CollectionConfig(const env::EnvConfig& base);

// n_success clean demonstrations followed by n_recovery staged-failure
// demonstrations. Episode i uses rng seed base_seed XOR i; target tubes
// cycle 0..3 within each group.
Dataset BuildDataset(int n_success, int n_recovery, std::uint64_t base_seed,
                     const env::EnvConfig& base = {});

// Writes manifest.json plus episode_NNNN.bin files into `dir` (created if
// missing). Output is byte-for-byte deterministic.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& dir);

// Throws kVersionMismatch, kTruncated, kChecksumMismatch (naming the file),
// kFormat, or kIo.
Dataset LoadDataset(const std::filesystem::path& dir);

}  // namespace hapchunk::demo

#endif  // HAPCHUNK_DEMO_DATASET_H_
