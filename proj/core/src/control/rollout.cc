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

#include "hapchunk/control/rollout.h"

#include <cstdio>
#include <fstream>

#include "hapchunk/error.h"
#include "hapchunk/policy/train.h"

namespace hapchunk::control {

PolicySource::PolicySource(const policy::ModelParams& params,
                           const policy::PolicyConfig& cfg,
                           EnsembleOptions options)
    : params_(params), cfg_(cfg), options_(options), buffer_(cfg.chunk_k) {}

env::Action PolicySource::Act(const env::EnvState&,
                              const env::Observation& obs) {
  buffer_.Push(t_, policy::Predict(obs, params_, cfg_));
  return EnsembledAction(buffer_, t_++, options_);
}

env::Action ExpertSource::Act(const env::EnvState& state,
                              const env::Observation& obs) {
  return expert_.Decide(state, obs).action;
}

TrialResult Summarize(const env::EnvState& s) {
  TrialResult r;
  r.pick_success = s.pick_success;
  r.delivery_success = s.delivery_success;
  r.grasp_attempts = s.grasp_attempts;
  r.steps_used = s.step;
  r.loop_failure = !s.delivery_success && s.step >= s.config.max_steps &&
                   s.grasp_attempts >= kLoopFailureAttempts;
  return r;
}

TrialResult Rollout(const env::EnvConfig& config, ActionSource& source,
                    Trace* trace) {
  env::StepObserver observe;
  if (trace) {
    trace->clear();
    observe = [trace](const env::Observation&, const env::Action&,
                      const env::EnvState& s, const env::StepResult& r) {
      const env::GripperPose& p = s.gripper;
      unsigned flags = 0;
      if (r.flags.grasp_acquired) flags |= kFlagGraspAcquired;
      if (r.flags.slip_occurred) flags |= kFlagSlip;
      if (s.held_seed) flags |= kFlagHolding;
      if (p.g < env::kOcclusionLevel) flags |= kFlagClosed;
      if (s.pick_success) flags |= kFlagPicked;
      if (s.delivery_success) flags |= kFlagDelivered;
      const auto& f = r.observation.force;
      trace->push_back(
          {s.step, p.x, p.y, p.z, p.g, f[0], f[1], f[2], flags});
    };
  }
  const env::EnvState final_state = env::RunEpisode(
      config,
      [&source](const env::EnvState& s, const env::Observation& o) {
        return source.Act(s, o);
      },
      observe);
  return Summarize(final_state);
}

TrialResult PolicyRollout(const env::EnvConfig& config,
                          const policy::ModelParams& params,
                          const policy::PolicyConfig& cfg,
                          const EnsembleOptions& options, Trace* trace) {
  PolicySource source(params, cfg, options);
  return Rollout(config, source, trace);
}

std::string TraceCsv(const Trace& trace) {
  std::string out = "step,x,y,z,g,f_x,f_y,f_z,phase_flags\n";
  char line[256];
  for (const TraceRow& r : trace) {
    std::snprintf(line, sizeof line,
                  "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%u\n", r.step, r.x,
                  r.y, r.z, r.g, r.f_x, r.f_y, r.f_z, r.phase_flags);
    out += line;
  }
  return out;
}

void WriteTraceCsv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << TraceCsv(trace);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace hapchunk::control
