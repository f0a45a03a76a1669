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

#include "hapchunk/harness/experiment.h"

#include <cstdio>
#include <utility>

#include "hapchunk/demo/dataset.h"
#include "hapchunk/error.h"
#include "hapchunk/seeding.h"

namespace hapchunk::harness {
namespace {

double Ratio(double num, int den) { return den == 0 ? 0.0 : num / den; }

void Report(const ProgressFn& progress, const std::string& message) {
  if (progress) progress(message);
}

policy::TrainResult TrainLabelled(const demo::Dataset& dataset,
                                  const policy::PolicyConfig& cfg,
                                  const std::string& label) {
  try {
    return policy::Train(dataset, cfg);
  } catch (const Error& e) {
    throw Error(e.code(), "condition " + label + ": " + e.what());
  }
}

std::string TrainedMessage(const std::string& label,
                           const policy::TrainLog& log) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "trained %s: reconstruction %.6f, %.1f s",
                label.c_str(), log.FinalReconstruction(), log.wall_seconds);
  return buf;
}

EvalSpec EvalFor(const ExperimentConfig& config, std::uint64_t eval_seed) {
  return {config.env, config.n_eval_trials, eval_seed, config.ensemble};
}

}  // namespace

SeedPlan SeedPlan::FromMaster(std::uint64_t master_seed) {
  return {DeriveSeed(master_seed, kDatasetSeedTag),
          DeriveSeed(master_seed, kTrainSeedTag),
          DeriveSeed(master_seed, kEvalSeedTag)};
}

std::uint64_t TrialSeed(std::uint64_t eval_seed, int trial) {
  return DeriveSeed(eval_seed, static_cast<std::uint64_t>(trial));
}

std::vector<ConditionSpec> GridConditions(const ExperimentConfig& config) {
  const SeedPlan seeds = SeedPlan::FromMaster(config.master_seed);
  std::vector<ConditionSpec> out;
  for (bool haptic : {true, false}) {
    for (bool recovery : {true, false}) {
      ConditionSpec c;
      c.label = std::string(haptic ? "haptic" : "no_haptic") +
                (recovery ? "_recovery" : "_no_recovery");
      c.haptic = haptic;
      c.recovery_samples = recovery;
      c.profile = config.profile;
      if (!recovery) c.profile.n_recovery = 0;
      c.policy = config.policy;
      c.policy.haptic_enabled = haptic;
      c.policy.rng_seed = seeds.training;
      c.n_eval_trials = config.n_eval_trials;
      c.eval_seed = seeds.evaluation;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<ObjectVariant> DefaultVariants() {
  constexpr double kBase = 8.9;
  return {
      {"control", 1.0, 1.0},
      {"dried_blueberry", 10.31 / kBase, 1.0},
      {"frozen_blueberry", 13.26 / kBase, 1.0},
      {"dried_cranberry", 13.40 / kBase, 1.0},
      {"fried_soybean", 13.86 / kBase, 0.1},
      {"coffee_bean", 14.42 / kBase, 1.0},
      {"almond", 23.38 / kBase, 1.0},
  };
}

double ResultRow::pick_rate() const { return Ratio(picks, trials); }
double ResultRow::delivery_rate() const { return Ratio(deliveries, trials); }
double ResultRow::mean_grasp_attempts() const {
  return Ratio(static_cast<double>(grasp_attempts), trials);
}
double ResultRow::loop_failure_rate() const {
  return Ratio(loop_failures, trials);
}

const ResultRow& ResultsTable::Find(std::string_view label) const {
  for (const ResultRow& r : rows) {
    if (r.label == label) return r;
  }
  throw Error(ErrorCode::kContract,
              "no result row labelled " + std::string(label));
}

ResultRow Evaluate(std::string label, const policy::ModelParams& params,
                   const policy::PolicyConfig& cfg, const EvalSpec& spec,
                   std::vector<control::Trace>* traces) {
  if (spec.n_trials < 0) {
    throw Error(ErrorCode::kConfiguration, "n_trials must be >= 0");
  }
  ResultRow row;
  row.label = std::move(label);
  row.haptic = cfg.haptic_enabled;
  row.size_multiplier = spec.env.seed_size_multiplier;
  row.contrast = spec.env.seed_contrast;
  row.eval_seed = spec.eval_seed;
  if (traces) traces->clear();
  for (int i = 0; i < spec.n_trials; ++i) {
    env::EnvConfig env = spec.env;
    env.rng_seed = TrialSeed(spec.eval_seed, i);
    control::Trace trace;
    const control::TrialResult r = control::PolicyRollout(
        env, params, cfg, spec.ensemble, traces ? &trace : nullptr);
    ++row.trials;
    row.picks += r.pick_success;
    row.deliveries += r.delivery_success;
    row.loop_failures += r.loop_failure;
    row.grasp_attempts += r.grasp_attempts;
    if (traces) traces->push_back(std::move(trace));
  }
  return row;
}

GridOutcome RunGrid(const ExperimentConfig& config,
                    const ProgressFn& progress) {
  config.Validate();
  const SeedPlan seeds = SeedPlan::FromMaster(config.master_seed);
  Report(progress, "building datasets");
  const demo::Dataset with_recovery =
      demo::BuildDataset(config.profile.n_success, config.profile.n_recovery,
                         seeds.dataset, config.env);
  demo::Dataset without_recovery;
  if (config.profile.n_recovery == 0) {
    without_recovery = with_recovery;
  } else {
    without_recovery = demo::BuildDataset(config.profile.n_success, 0,
                                          seeds.dataset, config.env);
  }

  GridOutcome out;
  for (const ConditionSpec& spec : GridConditions(config)) {
    const demo::Dataset& data =
        spec.recovery_samples ? with_recovery : without_recovery;
    policy::TrainResult trained = TrainLabelled(data, spec.policy, spec.label);
    Report(progress, TrainedMessage(spec.label, trained.log));
    const bool keep_traces = spec.haptic && spec.recovery_samples;
    ResultRow row = Evaluate(spec.label, trained.params, spec.policy,
                             EvalFor(config, spec.eval_seed),
                             keep_traces ? &out.traces : nullptr);
    row.recovery_samples = spec.recovery_samples;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "evaluated %s: pick %d, delivery %d, loop failures %d of %d",
                  spec.label.c_str(), row.picks, row.deliveries,
                  row.loop_failures, row.trials);
    Report(progress, buf);
    out.table.rows.push_back(std::move(row));
    out.models.push_back(
        {spec, std::move(trained.params), std::move(trained.log)});
  }
  return out;
}

ResultsTable RunGeneralization(const policy::ModelParams& params,
                               const policy::PolicyConfig& cfg,
                               const std::vector<ObjectVariant>& variants,
                               const ExperimentConfig& config) {
  const SeedPlan seeds = SeedPlan::FromMaster(config.master_seed);
  ResultsTable table;
  for (const ObjectVariant& v : variants) {
    EvalSpec spec = EvalFor(config, seeds.evaluation);
    spec.env.seed_size_multiplier = v.size_multiplier;
    spec.env.seed_contrast = v.contrast;
    spec.env.Validate();
    table.rows.push_back(Evaluate(v.name, params, cfg, spec));
  }
  return table;
}

ResultsTable RunRecoverySweep(const ExperimentConfig& config,
                              const std::vector<int>& n_recovery,
                              const ProgressFn& progress) {
  config.Validate();
  const SeedPlan seeds = SeedPlan::FromMaster(config.master_seed);
  ResultsTable table;
  for (int n : n_recovery) {
    if (n < 0) {
      throw Error(ErrorCode::kConfiguration,
                  "recovery counts must be non-negative");
    }
    const std::string label = "recovery_" + std::to_string(n);
    const demo::Dataset data = demo::BuildDataset(
        config.profile.n_success, n, seeds.dataset, config.env);
    policy::PolicyConfig cfg = config.policy;
    cfg.haptic_enabled = true;
    cfg.rng_seed = seeds.training;
    const policy::TrainResult trained = TrainLabelled(data, cfg, label);
    Report(progress, TrainedMessage(label, trained.log));
    ResultRow row = Evaluate(label, trained.params, cfg,
                             EvalFor(config, seeds.evaluation));
    row.recovery_samples = n > 0;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace hapchunk::harness
