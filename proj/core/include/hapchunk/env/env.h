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

#ifndef HAPCHUNK_ENV_ENV_H_
#define HAPCHUNK_ENV_ENV_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace hapchunk::env {

// Planar pick-and-place workspace on the unit square. y grows from the
// gripper's home position (bottom) towards the tube rack (top).

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr int kNumTubes = 4;

inline constexpr double kMaxStepXyz = 0.05;
inline constexpr double kMaxStepAperture = 0.1;
inline constexpr double kGraspHeight = 0.2;     // grasp/release below this z
inline constexpr double kLiftHeight = 0.5;      // slip is decided crossing this
inline constexpr double kOcclusionLevel = 0.5;  // z or g below this occludes
inline constexpr double kBaseSeedDiameter = 0.03;
inline constexpr double kSlipScatter = 0.03;

inline constexpr double kDishNominalX = 0.5;
inline constexpr double kDishNominalY = 0.45;
inline constexpr double kDishRadius = 0.18;
inline constexpr std::array<double, kNumTubes> kTubeX = {0.2, 0.4, 0.6, 0.8};
inline constexpr double kTubeY = 0.9;
inline constexpr double kTubeRadius = 0.03;
inline constexpr double kHomeX = 0.5;
inline constexpr double kHomeY = 0.15;

// Soft-finger force model.
inline constexpr double kFingerSpan = 0.08;  // physical aperture at g = 1
inline constexpr double kContactStiffness = 25.0;
inline constexpr double kForceCap = 2.0;
inline constexpr double kSelfContactForce = 0.15;
inline constexpr double kSelfContactGap = 0.002;
inline constexpr double kForceNoiseSigma = 0.02;

// Image intensities.
inline constexpr double kBackgroundLevel = 0.1;
inline constexpr double kDishLevel = 0.3;
inline constexpr double kTubeLevel = 0.5;
inline constexpr double kTargetTubeLevel = 0.7;
inline constexpr double kSeedLevel = 0.9;
inline constexpr double kGripperLevel = 1.0;

struct EnvConfig {
  int min_seeds = 1;
  int max_seeds = 7;
  double dish_center_jitter = 0.05;
  double seed_size_multiplier = 1.0;
  double seed_contrast = 1.0;
  double p_slip = 0.3;
  int max_steps = 125;
  std::uint64_t rng_seed = 0;
  // The first lift of the episode slips regardless of p_slip.
  bool force_first_slip = false;
  // Fixed target tube in [0, 4), or -1 to draw one at reset.
  int target_tube = -1;

  // Throws kConfiguration on out-of-range fields.
  void Validate() const;
  double seed_diameter() const {
    return kBaseSeedDiameter * seed_size_multiplier;
  }

  bool operator==(const EnvConfig&) const = default;
};

struct GripperPose {
  double x = kHomeX;
  double y = kHomeY;
  double z = 1.0;  // 1 = up, 0 = down
  double g = 1.0;  // 1 = open

  bool operator==(const GripperPose&) const = default;
};

enum class SeedLocation { kDish, kHeld, kTube, kTable };

struct Seed {
  double x = 0.0;
  double y = 0.0;
  double diameter = kBaseSeedDiameter;
  double contrast = 1.0;
  SeedLocation location = SeedLocation::kDish;
  int tube = -1;  // set when location == kTube

  bool in_dish() const { return location == SeedLocation::kDish; }
  bool operator==(const Seed&) const = default;
};

struct EnvState {
  EnvConfig config;
  GripperPose gripper;
  std::vector<Seed> seeds;
  std::optional<std::size_t> held_seed;
  double dish_x = kDishNominalX;
  double dish_y = kDishNominalY;
  int target_tube = 0;
  int step = 0;

  // Episode bookkeeping.
  int grasp_attempts = 0;
  int lifts = 0;
  bool pick_success = false;
  bool delivery_success = false;
  bool done = false;

  // Slip and placement draws use the dynamics stream; sensor noise has its
  // own stream so rendering never perturbs the dynamics.
  std::mt19937_64 dynamics_rng;
  std::mt19937_64 sensor_rng;

  bool operator==(const EnvState&) const = default;
};

struct Observation {
  std::array<double, kImagePixels> image{};  // row-major, row = y
  std::array<double, 3> force{};
  std::array<double, 4> proprio{};  // x, y, z, g

  bool operator==(const Observation&) const = default;
};

// Absolute target pose (x, y, z, g).
struct Action {
  std::array<double, 4> target{};

  static Action FromPose(const GripperPose& p) { return {{p.x, p.y, p.z, p.g}}; }
  bool operator==(const Action&) const = default;
};

// grasp_acquired and slip_occurred describe the step just taken;
// pick_success and delivery_success are sticky for the episode.
struct EventFlags {
  bool grasp_acquired = false;
  bool slip_occurred = false;
  bool pick_success = false;
  bool delivery_success = false;
  bool episode_done = false;
  int grasp_attempts = 0;
};

struct ResetResult {
  EnvState state;
  Observation observation;
};

struct StepResult {
  Observation observation;
  EventFlags flags;
};

// Builds a fresh episode. Throws kConfiguration for an invalid config or
// when seeds cannot be placed without overlap within 1000 samples.
ResetResult Reset(const EnvConfig& config);

// Advances one control step towards `action`. Throws kContract after the
// episode is done or for non-finite targets.
StepResult Step(EnvState& state, const Action& action);

double PhysicalAperture(double g);

// Noise-free 3-axis force at the fingers.
std::array<double, 3> ExpectedForce(const EnvState& state);

// ExpectedForce plus N(0, kForceNoiseSigma) per axis drawn from `rng`.
std::array<double, 3> ForceReadout(const EnvState& state, std::mt19937_64& rng);

std::array<double, kImagePixels> RenderImage(const EnvState& state);

// Image, noisy force (advancing state.sensor_rng), and proprioception.
Observation RenderObservation(EnvState& state);

// Index of the seed nearest (x, y) among those the gripper can pick up.
std::optional<std::size_t> NearestFreeSeed(const EnvState& state, double x,
                                           double y);

// Rounds every target to float32, the precision actions are recorded at.
Action RoundToRecorded(const Action& action);

// Chooses the action for the current state and the observation rendered
// before it.
using ActionFn = std::function<Action(const EnvState&, const Observation&)>;
// Sees each executed step: the observation the action was chosen from, the
// executed (rounded) action, and the state and result after stepping.
using StepObserver = std::function<void(const Observation&, const Action&,
                                        const EnvState&, const StepResult&)>;

// Resets from `config` and steps until the episode is done. Every closed
// loop in the library runs through here. Returns the final state.
EnvState RunEpisode(const EnvConfig& config, const ActionFn& act,
                    const StepObserver& observe = {});

}  // namespace hapchunk::env

#endif  // HAPCHUNK_ENV_ENV_H_
