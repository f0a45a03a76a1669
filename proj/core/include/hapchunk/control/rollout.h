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

#ifndef HAPCHUNK_CONTROL_ROLLOUT_H_
#define HAPCHUNK_CONTROL_ROLLOUT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hapchunk/control/chunk_buffer.h"
#include "hapchunk/demo/expert.h"
#include "hapchunk/env/env.h"
#include "hapchunk/policy/model.h"

namespace hapchunk::control {

inline constexpr int kLoopFailureAttempts = 3;

struct TrialResult {
  bool pick_success = false;
  bool delivery_success = false;
  int grasp_attempts = 0;
  bool loop_failure = false;
  int steps_used = 0;

  bool operator==(const TrialResult&) const = default;
};

// Bits of TraceRow::phase_flags.
enum PhaseFlag : unsigned {
  kFlagGraspAcquired = 1u << 0,
  kFlagSlip = 1u << 1,
  kFlagHolding = 1u << 2,
  kFlagClosed = 1u << 3,  // aperture below the occlusion level
  kFlagPicked = 1u << 4,
  kFlagDelivered = 1u << 5,
};

// State after step `step` (1-based) and the force read at that step.
struct TraceRow {
  int step = 0;
  double x = 0, y = 0, z = 0, g = 0;
  double f_x = 0, f_y = 0, f_z = 0;
  unsigned phase_flags = 0;

  bool operator==(const TraceRow&) const = default;
};

using Trace = std::vector<TraceRow>;

// Decides one action per control step. A fresh instance drives each trial.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual env::Action Act(const env::EnvState& state,
                          const env::Observation& obs) = 0;
};

// Predicts a chunk every step and executes the ensembled action.
class PolicySource : public ActionSource {
 public:
  PolicySource(const policy::ModelParams& params,
               const policy::PolicyConfig& cfg, EnsembleOptions options = {});
  env::Action Act(const env::EnvState& state,
                  const env::Observation& obs) override;

 private:
  const policy::ModelParams& params_;
  const policy::PolicyConfig& cfg_;
  EnsembleOptions options_;
  ChunkBuffer buffer_;
  std::int64_t t_ = 0;
};

// The scripted expert, reading privileged state.
class ExpertSource : public ActionSource {
 public:
  env::Action Act(const env::EnvState& state,
                  const env::Observation& obs) override;

 private:
  demo::ExpertPolicy expert_;
};

TrialResult Summarize(const env::EnvState& final_state);

// Runs one trial in a fresh environment built from `config`.
TrialResult Rollout(const env::EnvConfig& config, ActionSource& source,
                    Trace* trace = nullptr);

TrialResult PolicyRollout(const env::EnvConfig& config,
                          const policy::ModelParams& params,
                          const policy::PolicyConfig& cfg,
                          const EnsembleOptions& options = {},
                          Trace* trace = nullptr);

// CSV with header step,x,y,z,g,f_x,f_y,f_z,phase_flags; reals at 6 decimals.
std::string TraceCsv(const Trace& trace);
void WriteTraceCsv(const std::filesystem::path& path, const Trace& trace);

}  // namespace hapchunk::control

#endif  // HAPCHUNK_CONTROL_ROLLOUT_H_
