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

#ifndef HAPCHUNK_DEMO_EXPERT_H_
#define HAPCHUNK_DEMO_EXPERT_H_

#include <array>
#include <optional>
#include <string_view>

#include "hapchunk/env/env.h"

namespace hapchunk::demo {

// Phases of the scripted expert. Transition graph:
//
//   APPROACH -> DESCEND -> CLOSE -> LIFT -> CHECK
//   CHECK -> TRANSPORT          (grasp force at or above threshold)
//   CHECK -> REAPPROACH -> CLOSE (force below threshold: retry)
//   TRANSPORT -> DESCEND_TUBE -> RELEASE -> RETREAT -> DONE
enum class ExpertPhase {
  kApproach,
  kDescend,
  kClose,
  kLift,
  kCheck,
  kReapproach,
  kTransport,
  kDescendTube,
  kRelease,
  kRetreat,
  kDone,
};

std::string_view PhaseName(ExpertPhase phase);

inline constexpr double kGraspForceThreshold = 0.4;
inline constexpr double kHoverHeight = 0.5;
// LIFT aims above the check height so imitators still cross it; the phase
// ends on crossing, so the overshoot never executes.
inline constexpr double kLiftTarget = 0.65;
inline constexpr double kWorkHeight = 0.15;
// Aperture held while descending onto a seed; open enough for the default
// seed, closed enough that the final squeeze takes two steps.
inline constexpr double kPreCloseAperture = 0.5;
inline constexpr double kCloseStartHeight = 0.25;
inline constexpr double kCloseDoneAperture = 0.3;

struct ExpertDecision {
  env::Action action;
  ExpertPhase phase;  // phase after this call
  // Outcome of the grasp check when CHECK was evaluated during this call.
  std::optional<ExpertPhase> check_outcome;
};

// One step of the scripted expert. Reads privileged state (seed positions)
// and the force observed at the current step. Zero-duration phases (CHECK,
// and any phase whose exit condition already holds) are passed through in
// the same call, so the returned action belongs to the returned phase.
// DONE holds the current pose.
ExpertDecision ExpertAction(const env::EnvState& state, ExpertPhase phase,
                            const std::array<double, 3>& last_force);

// Stateful wrapper that carries the phase from step to step.
class ExpertPolicy {
 public:
  ExpertDecision Decide(const env::EnvState& state,
                        const env::Observation& obs) {
    ExpertDecision d = ExpertAction(state, phase_, obs.force);
    phase_ = d.phase;
    return d;
  }
  ExpertPhase phase() const { return phase_; }

 private:
  ExpertPhase phase_ = ExpertPhase::kApproach;
};

}  // namespace hapchunk::demo

#endif  // HAPCHUNK_DEMO_EXPERT_H_
