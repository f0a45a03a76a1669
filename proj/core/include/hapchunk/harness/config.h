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

#ifndef HAPCHUNK_HARNESS_CONFIG_H_
#define HAPCHUNK_HARNESS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "hapchunk/control/chunk_buffer.h"
#include "hapchunk/env/env.h"
#include "hapchunk/policy/model.h"

namespace hapchunk::harness {

// Dataset sizes for one training set.
struct DatasetProfile {
  int n_success = 160;
  int n_recovery = 40;

  bool operator==(const DatasetProfile&) const = default;
};

inline constexpr DatasetProfile kDefaultProfile{160, 40};
inline constexpr DatasetProfile kPaperProfile{40, 10};

// Everything one experiment run depends on.
struct ExperimentConfig {
  std::uint64_t master_seed = 2026;
  DatasetProfile profile = kDefaultProfile;
  policy::PolicyConfig policy;
  env::EnvConfig env;  // evaluation environment; rng_seed is per trial
  int n_eval_trials = 100;
  control::EnsembleOptions ensemble;

  void Validate() const;
};

// Parsed `key = value` lines. Blank lines and lines starting with '#' are
// skipped. Throws kFormat naming the line for anything else.
using KeyValues = std::map<std::string, std::string>;
KeyValues ParseKeyValues(std::string_view text);
KeyValues ReadKeyValueFile(const std::filesystem::path& path);

// Applies `policy.<field>`, `env.<field>` and the run-level keys
// (master_seed, n_success, n_recovery, n_eval_trials, ensemble_m,
// ensemble_orientation) to `config`. Unknown keys and unparsable values
// throw kConfiguration.
void ApplyKeyValues(const KeyValues& values, ExperimentConfig& config);

// Inverse of ApplyKeyValues; every key, sorted.
std::string FormatKeyValues(const ExperimentConfig& config);

}  // namespace hapchunk::harness

#endif  // HAPCHUNK_HARNESS_CONFIG_H_
