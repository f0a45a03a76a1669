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

#ifndef HAPCHUNK_HARNESS_EXPERIMENT_H_
#define HAPCHUNK_HARNESS_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hapchunk/control/rollout.h"
#include "hapchunk/harness/config.h"
#include "hapchunk/policy/train.h"

namespace hapchunk::harness {

// Stream tags for DeriveSeed(master_seed, tag).
inline constexpr std::uint64_t kDatasetSeedTag = 0xda7a;
inline constexpr std::uint64_t kTrainSeedTag = 0x7a1e;
inline constexpr std::uint64_t kEvalSeedTag = 0xe7a1;

struct SeedPlan {
  std::uint64_t dataset = 0;
  std::uint64_t training = 0;
  std::uint64_t evaluation = 0;

  static SeedPlan FromMaster(std::uint64_t master_seed);
};

// Environment seed of evaluation trial `trial`.
std::uint64_t TrialSeed(std::uint64_t eval_seed, int trial);

struct ConditionSpec {
  std::string label;
  bool haptic = true;
  bool recovery_samples = true;
  DatasetProfile profile;
  policy::PolicyConfig policy;
  int n_eval_trials = 100;
  std::uint64_t eval_seed = 0;
};

// The 2x2 grid in fixed order: haptic_recovery, haptic_no_recovery,
// no_haptic_recovery, no_haptic_no_recovery. All four share the eval seed
// and environment.
std::vector<ConditionSpec> GridConditions(const ExperimentConfig& config);

struct ObjectVariant {
  std::string name;
  double size_multiplier = 1.0;
  double contrast = 1.0;
};

// Control first, then the six novel objects. Multipliers are longest
// dimensions over the 8.9 mm default seed.
std::vector<ObjectVariant> DefaultVariants();

struct ResultRow {
  std::string label;
  bool haptic = false;
  bool recovery_samples = false;
  double size_multiplier = 1.0;
  double contrast = 1.0;
  int trials = 0;
  int picks = 0;
  int deliveries = 0;
  int loop_failures = 0;
  long grasp_attempts = 0;
  std::uint64_t eval_seed = 0;

  // Zero when there are no trials.
  double pick_rate() const;
  double delivery_rate() const;
  double mean_grasp_attempts() const;
  double loop_failure_rate() const;

  bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  // Throws kContract when absent.
  const ResultRow& Find(std::string_view label) const;
  bool operator==(const ResultsTable&) const = default;
};

struct EvalSpec {
  env::EnvConfig env;  // rng_seed replaced per trial
  int n_trials = 100;
  std::uint64_t eval_seed = 0;
  control::EnsembleOptions ensemble;
};

// Runs n_trials policy rollouts. When `traces` is given it receives one
// trace per trial, in trial order.
ResultRow Evaluate(std::string label, const policy::ModelParams& params,
                   const policy::PolicyConfig& cfg, const EvalSpec& spec,
                   std::vector<control::Trace>* traces = nullptr);

struct TrainedCondition {
  ConditionSpec spec;
  policy::ModelParams params;
  policy::TrainLog log;
};

struct GridOutcome {
  ResultsTable table;
  std::vector<TrainedCondition> models;  // GridConditions order
  // Per-trial traces of the haptic_recovery condition.
  std::vector<control::Trace> traces;
};

using ProgressFn = std::function<void(std::string_view message)>;

// Builds the recovery and no-recovery datasets (the latter is the former's
// success prefix), trains the four conditions in order and evaluates each
// on the same trials. Training errors are rethrown with the condition label.
GridOutcome RunGrid(const ExperimentConfig& config,
                    const ProgressFn& progress = {});

// Evaluates one model on each variant with the grid's trial seeds, so the
// control row reproduces the matching grid cell.
ResultsTable RunGeneralization(const policy::ModelParams& params,
                               const policy::PolicyConfig& cfg,
                               const std::vector<ObjectVariant>& variants,
                               const ExperimentConfig& config);

// Haptic models trained with n_success clean episodes plus each listed
// number of recovery episodes; rows are labelled recovery_<n>.
ResultsTable RunRecoverySweep(const ExperimentConfig& config,
                              const std::vector<int>& n_recovery,
                              const ProgressFn& progress = {});

}  // namespace hapchunk::harness

#endif  // HAPCHUNK_HARNESS_EXPERIMENT_H_
