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

#include "hapchunk/env/env.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hapchunk/error.h"
#include "hapchunk/seeding.h"

namespace hapchunk::env {
namespace {

constexpr int kMaxPlacementSamples = 1000;
constexpr double kPixel = 1.0 / static_cast<double>(kImageSide);
constexpr std::uint64_t kSensorStreamTag = 0x5e5502;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Lands exactly on `to` when it is within reach.
double MoveToward(double from, double to, double max_step) {
  if (std::abs(to - from) <= max_step) return to;
  return to > from ? from + max_step : from - max_step;
}

// Pulls a point back inside the dish so a seed of `diameter` lies within it.
void ClampIntoDish(const EnvState& s, double diameter, double& x, double& y) {
  const double limit = kDishRadius - 0.5 * diameter;
  const double dx = x - s.dish_x, dy = y - s.dish_y;
  const double r = std::hypot(dx, dy);
  if (r > limit) {
    x = s.dish_x + dx * limit / r;
    y = s.dish_y + dy * limit / r;
  }
}

bool InDish(const EnvState& s, double x, double y) {
  return std::hypot(x - s.dish_x, y - s.dish_y) <= kDishRadius;
}

}  // namespace

void EnvConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfiguration, "invalid env config: " + msg);
  };
  if (min_seeds < 1 || min_seeds > max_seeds) {
    fail("seed count range [" + std::to_string(min_seeds) + ", " +
         std::to_string(max_seeds) + "]");
  }
  if (!(dish_center_jitter >= 0.0)) fail("dish_center_jitter < 0");
  if (!(seed_size_multiplier > 0.0)) fail("seed_size_multiplier <= 0");
  if (!(seed_contrast > 0.0 && seed_contrast <= 1.0)) {
    fail("seed_contrast outside (0, 1]");
  }
  if (!(p_slip >= 0.0 && p_slip <= 1.0)) fail("p_slip outside [0, 1]");
  if (max_steps < 1) fail("max_steps < 1");
  if (target_tube < -1 || target_tube >= kNumTubes) fail("target_tube");
}

double PhysicalAperture(double g) { return kFingerSpan * g; }

ResetResult Reset(const EnvConfig& config) {
  config.Validate();
  EnvState s;
  s.config = config;
  s.dynamics_rng.seed(config.rng_seed);
  s.sensor_rng.seed(DeriveSeed(config.rng_seed, kSensorStreamTag));
  auto& rng = s.dynamics_rng;

  const double j = config.dish_center_jitter;
  s.dish_x = kDishNominalX + j * Uniform(rng, -1.0, 1.0);
  s.dish_y = kDishNominalY + j * Uniform(rng, -1.0, 1.0);

  const int n = std::uniform_int_distribution<int>(config.min_seeds,
                                                   config.max_seeds)(rng);
  const double d = config.seed_diameter();
  const double place_radius = kDishRadius - 0.5 * d;
  if (place_radius <= 0.0) {
    throw Error(ErrorCode::kConfiguration,
                "seed diameter " + std::to_string(d) + " does not fit the dish");
  }
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementSamples && !placed;
         ++attempt) {
      const double r = place_radius * std::sqrt(Uniform(rng, 0.0, 1.0));
      const double theta = Uniform(rng, 0.0, 2.0 * M_PI);
      const double x = s.dish_x + r * std::cos(theta);
      const double y = s.dish_y + r * std::sin(theta);
      const bool clear = std::all_of(
          s.seeds.begin(), s.seeds.end(), [&](const Seed& o) {
            return std::hypot(o.x - x, o.y - y) >= d;
          });
      if (clear) {
        s.seeds.push_back(Seed{x, y, d, config.seed_contrast,
                               SeedLocation::kDish, -1});
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kConfiguration,
                  "dish too crowded: could not place seed " +
                      std::to_string(i + 1) + " of " + std::to_string(n));
    }
  }
  const int drawn_tube =
      std::uniform_int_distribution<int>(0, kNumTubes - 1)(rng);
  s.target_tube = config.target_tube >= 0 ? config.target_tube : drawn_tube;

  ResetResult out;
  out.observation = RenderObservation(s);
  out.state = std::move(s);
  return out;
}

std::optional<std::size_t> NearestFreeSeed(const EnvState& state, double x,
                                           double y) {
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < state.seeds.size(); ++i) {
    const Seed& seed = state.seeds[i];
    if (seed.location != SeedLocation::kDish &&
        seed.location != SeedLocation::kTable) {
      continue;
    }
    const double dist = std::hypot(seed.x - x, seed.y - y);
    if (!best || dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

StepResult Step(EnvState& s, const Action& action) {
  if (s.done) {
    throw Error(ErrorCode::kContract, "step called after episode end");
  }
  std::array<double, 4> target = action.target;
  for (double& v : target) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kContract, "non-finite action component");
    }
    v = std::clamp(v, 0.0, 1.0);
  }

  EventFlags flags;
  const GripperPose prev = s.gripper;
  GripperPose& p = s.gripper;
  p.x = MoveToward(p.x, target[0], kMaxStepXyz);
  p.y = MoveToward(p.y, target[1], kMaxStepXyz);
  p.z = MoveToward(p.z, target[2], kMaxStepXyz);
  p.g = MoveToward(p.g, target[3], kMaxStepAperture);
  const double aperture = PhysicalAperture(p.g);

  if (s.held_seed) {
    Seed& seed = s.seeds[*s.held_seed];
    seed.x = p.x;
    seed.y = p.y;
    if (p.g > prev.g && aperture > seed.diameter) {
      // Release.
      s.held_seed.reset();
      seed.location = InDish(s, p.x, p.y) ? SeedLocation::kDish
                                          : SeedLocation::kTable;
      if (p.z < kGraspHeight) {
        for (int t = 0; t < kNumTubes; ++t) {
          if (std::hypot(p.x - kTubeX[t], p.y - kTubeY) <= kTubeRadius) {
            seed.location = SeedLocation::kTube;
            seed.tube = t;
            if (t == s.target_tube) s.delivery_success = true;
          }
        }
      }
    }
  } else if (p.z < kGraspHeight && p.g < prev.g) {
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < s.seeds.size(); ++i) {
      const Seed& seed = s.seeds[i];
      if (seed.location != SeedLocation::kDish &&
          seed.location != SeedLocation::kTable) {
        continue;
      }
      const double dist = std::hypot(seed.x - p.x, seed.y - p.y);
      if (dist <= 0.5 * seed.diameter && aperture < seed.diameter &&
          (!best || dist < best_dist)) {
        best = i;
        best_dist = dist;
      }
    }
    if (best) {
      Seed& seed = s.seeds[*best];
      seed.location = SeedLocation::kHeld;
      seed.x = p.x;
      seed.y = p.y;
      s.held_seed = best;
      ++s.grasp_attempts;
      flags.grasp_acquired = true;
    }
  }

  if (s.held_seed && prev.z < kLiftHeight && p.z >= kLiftHeight) {
    const double u = Uniform(s.dynamics_rng, 0.0, 1.0);
    const double jx = Uniform(s.dynamics_rng, -kSlipScatter, kSlipScatter);
    const double jy = Uniform(s.dynamics_rng, -kSlipScatter, kSlipScatter);
    const bool slip =
        (s.config.force_first_slip && s.lifts == 0) || u < s.config.p_slip;
    ++s.lifts;
    if (slip) {
      Seed& seed = s.seeds[*s.held_seed];
      double x = p.x + jx, y = p.y + jy;
      ClampIntoDish(s, seed.diameter, x, y);
      seed.x = x;
      seed.y = y;
      seed.location = SeedLocation::kDish;
      s.held_seed.reset();
      flags.slip_occurred = true;
    } else {
      s.pick_success = true;
    }
  }

  ++s.step;
  s.done = s.delivery_success || s.step >= s.config.max_steps;

  flags.pick_success = s.pick_success;
  flags.delivery_success = s.delivery_success;
  flags.episode_done = s.done;
  flags.grasp_attempts = s.grasp_attempts;
  return StepResult{RenderObservation(s), flags};
}

std::array<double, 3> ExpectedForce(const EnvState& s) {
  const double aperture = PhysicalAperture(s.gripper.g);
  double fz = 0.0;
  if (s.held_seed) {
    const double d = s.seeds[*s.held_seed].diameter;
    fz = std::min(kForceCap, kContactStiffness * std::max(0.0, d - aperture));
  } else if (aperture < kSelfContactGap) {
    fz = kSelfContactForce;
  }
  return {0.0, 0.0, fz};
}

std::array<double, 3> ForceReadout(const EnvState& state,
                                   std::mt19937_64& rng) {
  std::array<double, 3> f = ExpectedForce(state);
  std::normal_distribution<double> noise(0.0, kForceNoiseSigma);
  for (double& v : f) v += noise(rng);
  return f;
}

std::array<double, kImagePixels> RenderImage(const EnvState& s) {
  std::array<double, kImagePixels> img;
  img.fill(kBackgroundLevel);
  auto center = [](std::size_t i) {
    return (static_cast<double>(i) + 0.5) * kPixel;
  };
  for (std::size_t r = 0; r < kImageSide; ++r) {
    for (std::size_t c = 0; c < kImageSide; ++c) {
      const double x = center(c), y = center(r);
      double& px = img[r * kImageSide + c];
      if (std::hypot(x - s.dish_x, y - s.dish_y) <= kDishRadius) {
        px = kDishLevel;
      }
      for (int t = 0; t < kNumTubes; ++t) {
        if (std::hypot(x - kTubeX[t], y - kTubeY) <=
            kTubeRadius + 0.5 * kPixel) {
          px = t == s.target_tube ? kTargetTubeLevel : kTubeLevel;
        }
      }
    }
  }
  // Seeds: solid inside the disk, fading linearly to the underlying value
  // over one pixel outside it, so sub-pixel position stays visible.
  for (const Seed& seed : s.seeds) {
    if (seed.location == SeedLocation::kTube) continue;
    const double level = kSeedLevel * seed.contrast;
    const double inner = 0.5 * seed.diameter;
    const double outer = inner + kPixel;
    const auto lo_c = static_cast<long>(std::floor((seed.x - outer) / kPixel));
    const auto hi_c = static_cast<long>(std::ceil((seed.x + outer) / kPixel));
    const auto lo_r = static_cast<long>(std::floor((seed.y - outer) / kPixel));
    const auto hi_r = static_cast<long>(std::ceil((seed.y + outer) / kPixel));
    for (long r = std::max(0L, lo_r);
         r <= std::min<long>(kImageSide - 1, hi_r); ++r) {
      for (long c = std::max(0L, lo_c);
           c <= std::min<long>(kImageSide - 1, hi_c); ++c) {
        const double dist = std::hypot(center(c) - seed.x, center(r) - seed.y);
        const double alpha = std::clamp((outer - dist) / kPixel, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        double& px = img[r * kImageSide + c];
        px = (1.0 - alpha) * px + alpha * level;
      }
    }
  }
  // Gripper: a solid 3x3 block when lowered or closed, otherwise only the
  // four corner pixels (open fingers seen from above).
  const GripperPose& p = s.gripper;
  const bool solid = p.z < kOcclusionLevel || p.g < kOcclusionLevel;
  const long gc = std::clamp<long>(static_cast<long>(std::floor(p.x / kPixel)),
                                   0, kImageSide - 1);
  const long gr = std::clamp<long>(static_cast<long>(std::floor(p.y / kPixel)),
                                   0, kImageSide - 1);
  for (long dr = -1; dr <= 1; ++dr) {
    for (long dc = -1; dc <= 1; ++dc) {
      if (!solid && (dr == 0 || dc == 0)) continue;
      const long r = gr + dr, c = gc + dc;
      if (r < 0 || c < 0 || r >= static_cast<long>(kImageSide) ||
          c >= static_cast<long>(kImageSide)) {
        continue;
      }
      img[r * kImageSide + c] = kGripperLevel;
    }
  }
  return img;
}

Observation RenderObservation(EnvState& s) {
  Observation obs;
  obs.image = RenderImage(s);
  obs.force = ForceReadout(s, s.sensor_rng);
  obs.proprio = {s.gripper.x, s.gripper.y, s.gripper.z, s.gripper.g};
  return obs;
}

Action RoundToRecorded(const Action& action) {
  Action out;
  for (std::size_t i = 0; i < out.target.size(); ++i) {
    out.target[i] = static_cast<double>(static_cast<float>(action.target[i]));
  }
  return out;
}

EnvState RunEpisode(const EnvConfig& config, const ActionFn& act,
                    const StepObserver& observe) {
  ResetResult reset = Reset(config);
  EnvState& state = reset.state;
  Observation obs = reset.observation;
  while (!state.done) {
    const Action action = RoundToRecorded(act(state, obs));
    StepResult result = Step(state, action);
    if (observe) observe(obs, action, state, result);
    obs = std::move(result.observation);
  }
  return std::move(state);
}

}  // namespace hapchunk::env
