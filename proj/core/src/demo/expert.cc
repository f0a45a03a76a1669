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

#include "hapchunk/demo/expert.h"

#include <cmath>

namespace hapchunk::demo {
namespace {

// Loose enough to absorb float32 rounding of recorded actions.
constexpr double kTol = 1e-6;
constexpr int kMaxTransitionsPerStep = 16;

bool Near(double a, double b) { return std::abs(a - b) <= kTol; }

env::Action Target(double x, double y, double z, double g) {
  return env::Action{{x, y, z, g}};
}

}  // namespace

std::string_view PhaseName(ExpertPhase phase) {
  switch (phase) {
    case ExpertPhase::kApproach:
      return "APPROACH";
    case ExpertPhase::kDescend:
      return "DESCEND";
    case ExpertPhase::kClose:
      return "CLOSE";
    case ExpertPhase::kLift:
      return "LIFT";
    case ExpertPhase::kCheck:
      return "CHECK";
    case ExpertPhase::kReapproach:
      return "REAPPROACH";
    case ExpertPhase::kTransport:
      return "TRANSPORT";
    case ExpertPhase::kDescendTube:
      return "DESCEND_TUBE";
    case ExpertPhase::kRelease:
      return "RELEASE";
    case ExpertPhase::kRetreat:
      return "RETREAT";
    case ExpertPhase::kDone:
      return "DONE";
  }
  return "?";
}

ExpertDecision ExpertAction(const env::EnvState& state, ExpertPhase phase,
                            const std::array<double, 3>& last_force) {
  const env::GripperPose& p = state.gripper;
  const double tube_x = env::kTubeX[state.target_tube];
  const double tube_y = env::kTubeY;
  std::optional<ExpertPhase> check_outcome;

  for (int i = 0; i < kMaxTransitionsPerStep; ++i) {
    switch (phase) {
      case ExpertPhase::kApproach: {
        auto seed = env::NearestFreeSeed(state, p.x, p.y);
        if (!seed) return {env::Action::FromPose(p), phase, check_outcome};
        const env::Seed& s = state.seeds[*seed];
        if (Near(p.x, s.x) && Near(p.y, s.y) && Near(p.z, kHoverHeight) &&
            Near(p.g, 1.0)) {
          phase = ExpertPhase::kDescend;
          continue;
        }
        return {Target(s.x, s.y, kHoverHeight, 1.0), phase, check_outcome};
      }
      case ExpertPhase::kDescend:
      case ExpertPhase::kReapproach: {
        auto seed = env::NearestFreeSeed(state, p.x, p.y);
        if (!seed) return {env::Action::FromPose(p), phase, check_outcome};
        const env::Seed& s = state.seeds[*seed];
        if (Near(p.x, s.x) && Near(p.y, s.y) &&
            p.z <= kCloseStartHeight + kTol &&
            p.g >= kPreCloseAperture - kTol) {
          phase = ExpertPhase::kClose;
          continue;
        }
        return {Target(s.x, s.y, kWorkHeight, kPreCloseAperture), phase,
                check_outcome};
      }
      case ExpertPhase::kClose:
        if (p.z <= kWorkHeight + kTol && p.g <= kCloseDoneAperture + kTol) {
          phase = ExpertPhase::kLift;
          continue;
        }
        return {Target(p.x, p.y, kWorkHeight, 0.0), phase, check_outcome};
      case ExpertPhase::kLift:
        if (p.z >= kHoverHeight - kTol) {
          phase = ExpertPhase::kCheck;
          continue;
        }
        return {Target(p.x, p.y, kLiftTarget, 0.0), phase, check_outcome};
      case ExpertPhase::kCheck:
        phase = std::abs(last_force[2]) >= kGraspForceThreshold
                    ? ExpertPhase::kTransport
                    : ExpertPhase::kReapproach;
        check_outcome = phase;
        continue;
      case ExpertPhase::kTransport:
        if (Near(p.x, tube_x) && Near(p.y, tube_y)) {
          phase = ExpertPhase::kDescendTube;
          continue;
        }
        return {Target(tube_x, tube_y, kWorkHeight, 0.0), phase,
                check_outcome};
      case ExpertPhase::kDescendTube:
        if (p.z <= kWorkHeight + kTol) {
          phase = ExpertPhase::kRelease;
          continue;
        }
        return {Target(tube_x, tube_y, kWorkHeight, 0.0), phase,
                check_outcome};
      case ExpertPhase::kRelease:
        if (p.g >= 1.0 - kTol) {
          phase = ExpertPhase::kRetreat;
          continue;
        }
        return {Target(p.x, p.y, kWorkHeight, 1.0), phase, check_outcome};
      case ExpertPhase::kRetreat:
        if (p.z >= kHoverHeight - kTol) {
          phase = ExpertPhase::kDone;
          continue;
        }
        return {Target(p.x, p.y, kHoverHeight, 1.0), phase, check_outcome};
      case ExpertPhase::kDone:
        return {env::Action::FromPose(p), phase, check_outcome};
    }
  }
  return {env::Action::FromPose(p), phase, check_outcome};
}

}  // namespace hapchunk::demo
