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

#include "hapchunk/demo/dataset.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "hapchunk/error.h"
#include "hapchunk/seeding.h"

namespace hapchunk::demo {
namespace {

constexpr int kMaxConsecutiveDiscards = 20;
constexpr char kEpisodeMagic[4] = {'H', 'I', 'A', '1'};
constexpr std::size_t kHeaderBytes = 16;

constexpr std::uint32_t kFlagRecovery = 1u << 0;
constexpr std::uint32_t kFlagPick = 1u << 1;
constexpr std::uint32_t kFlagDelivery = 1u << 2;

using nlohmann::json;

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetU32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

void PutFloats(std::string& out, const std::vector<float>& xs) {
  for (float x : xs) PutU32(out, std::bit_cast<std::uint32_t>(x));
}

void GetFloats(const std::string& in, std::size_t& at, std::vector<float>& xs,
               std::size_t n) {
  xs.resize(n);
  for (std::size_t i = 0; i < n; ++i, at += 4) {
    xs[i] = std::bit_cast<float>(GetU32(in, at));
  }
}

std::uint32_t Crc32(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string HexCrc(std::uint32_t crc) {
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << crc;
  return s.str();
}

json ConfigToJson(const env::EnvConfig& c) {
  return json{{"min_seeds", c.min_seeds},
              {"max_seeds", c.max_seeds},
              {"dish_center_jitter", c.dish_center_jitter},
              {"seed_size_multiplier", c.seed_size_multiplier},
              {"seed_contrast", c.seed_contrast},
              {"p_slip", c.p_slip},
              {"max_steps", c.max_steps},
              {"rng_seed", c.rng_seed},
              {"force_first_slip", c.force_first_slip},
              {"target_tube", c.target_tube}};
}

env::EnvConfig ConfigFromJson(const json& j) {
  env::EnvConfig c;
  c.min_seeds = j.at("min_seeds").get<int>();
  c.max_seeds = j.at("max_seeds").get<int>();
  c.dish_center_jitter = j.at("dish_center_jitter").get<double>();
  c.seed_size_multiplier = j.at("seed_size_multiplier").get<double>();
  c.seed_contrast = j.at("seed_contrast").get<double>();
  c.p_slip = j.at("p_slip").get<double>();
  c.max_steps = j.at("max_steps").get<int>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.force_first_slip = j.at("force_first_slip").get<bool>();
  c.target_tube = j.at("target_tube").get<int>();
  return c;
}

std::string EpisodeFileName(std::size_t index) {
  std::ostringstream s;
  s << "episode_" << std::setw(4) << std::setfill('0') << index << ".bin";
  return s.str();
}

std::string EncodeEpisode(const Episode& ep) {
  std::string out;
  out.reserve(kHeaderBytes + 4 * (ep.images.size() + ep.forces.size() +
                                  ep.proprio.size() + ep.actions.size()));
  out.append(kEpisodeMagic, 4);
  PutU32(out, static_cast<std::uint32_t>(ep.length()));
  std::uint32_t flags = 0;
  if (ep.is_recovery) flags |= kFlagRecovery;
  if (ep.pick_success) flags |= kFlagPick;
  if (ep.delivery_success) flags |= kFlagDelivery;
  PutU32(out, flags);
  PutU32(out, static_cast<std::uint32_t>(ep.target_tube));
  PutFloats(out, ep.images);
  PutFloats(out, ep.forces);
  PutFloats(out, ep.proprio);
  PutFloats(out, ep.actions);
  return out;
}

void DecodeEpisode(const std::string& bytes, const std::string& name,
                   Episode& ep) {
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorCode::kTruncated, name + ": header is truncated");
  }
  if (std::memcmp(bytes.data(), kEpisodeMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, name + ": bad magic");
  }
  const std::size_t t = GetU32(bytes, 4);
  const std::uint32_t flags = GetU32(bytes, 8);
  const std::size_t per_step = env::kImagePixels + kForceDim + 2 * kPoseDim;
  const std::size_t want = kHeaderBytes + 4 * per_step * t;
  if (bytes.size() < want) {
    throw Error(ErrorCode::kTruncated,
                name + ": expected " + std::to_string(want) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  if (bytes.size() > want) {
    throw Error(ErrorCode::kFormat, name + ": trailing bytes");
  }
  ep.is_recovery = flags & kFlagRecovery;
  ep.pick_success = flags & kFlagPick;
  ep.delivery_success = flags & kFlagDelivery;
  ep.target_tube = static_cast<std::int32_t>(GetU32(bytes, 12));
  std::size_t at = kHeaderBytes;
  GetFloats(bytes, at, ep.images, t * env::kImagePixels);
  GetFloats(bytes, at, ep.forces, t * kForceDim);
  GetFloats(bytes, at, ep.proprio, t * kPoseDim);
  GetFloats(bytes, at, ep.actions, t * kPoseDim);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

// One expert rollout; returns the episode whether or not it delivered.
Episode RollOnce(const env::EnvConfig& config, ExpertTrace* trace) {
  Episode ep;
  ep.config = config;
  ExpertPolicy expert;
  const env::EnvState final_state = env::RunEpisode(
      config,
      [&](const env::EnvState& state, const env::Observation& obs) {
        const ExpertDecision d = expert.Decide(state, obs);
        if (trace) {
          trace->phases.push_back(d.phase);
          if (d.check_outcome) trace->check_outcomes.push_back(*d.check_outcome);
        }
        return d.action;
      },
      [&](const env::Observation& obs, const env::Action& action,
          const env::EnvState&, const env::StepResult&) {
        ep.Append(obs, action);
      });
  ep.target_tube = final_state.target_tube;
  ep.pick_success = final_state.pick_success;
  ep.delivery_success = final_state.delivery_success;
  ep.grasp_attempts = final_state.grasp_attempts;
  return ep;
}

}  // namespace

void Episode::Append(const env::Observation& obs, const env::Action& action) {
  images.insert(images.end(), obs.image.begin(), obs.image.end());
  forces.insert(forces.end(), obs.force.begin(), obs.force.end());
  proprio.insert(proprio.end(), obs.proprio.begin(), obs.proprio.end());
  actions.insert(actions.end(), action.target.begin(), action.target.end());
}

env::Observation Episode::ObservationAt(std::size_t t) const {
  env::Observation obs;
  std::ranges::copy(image(t), obs.image.begin());
  std::ranges::copy(force(t), obs.force.begin());
  std::ranges::copy(pose(t), obs.proprio.begin());
  return obs;
}

Episode GenerateEpisode(const env::EnvConfig& config,
                        bool force_slip_on_first_attempt, ExpertTrace* trace) {
  config.Validate();
  env::EnvConfig attempt = config;
  attempt.force_first_slip = force_slip_on_first_attempt;
  for (int discards = 0; discards < kMaxConsecutiveDiscards; ++discards) {
    if (discards > 0) {
      attempt.rng_seed =
          DeriveSeed(config.rng_seed, static_cast<std::uint64_t>(discards));
    }
    ExpertTrace local;
    Episode ep = RollOnce(attempt, trace ? &local : nullptr);
    if (!ep.delivery_success) continue;
    ep.is_recovery = force_slip_on_first_attempt;
    ep.discards = discards;
    if (trace) *trace = std::move(local);
    return ep;
  }
  throw Error(ErrorCode::kGeneration,
              "expert failed to deliver in " +
                  std::to_string(kMaxConsecutiveDiscards) +
                  " consecutive rollouts (seed " +
                  std::to_string(config.rng_seed) + ")");
}

env::EnvConfig CollectionConfig(const env::EnvConfig& base) {
  env::EnvConfig c = base;
  c.p_slip = 0.0;
  c.force_first_slip = false;
  return c;
}

Dataset BuildDataset(int n_success, int n_recovery, std::uint64_t base_seed,
                     const env::EnvConfig& base) {
  if (n_success < 0 || n_recovery < 0 || n_success + n_recovery < 1) {
    throw Error(ErrorCode::kConfiguration,
                "dataset needs non-negative counts with at least one episode");
  }
  Dataset ds;
  ds.manifest.n_success = n_success;
  ds.manifest.n_recovery = n_recovery;
  ds.manifest.base_seed = base_seed;
  ds.manifest.recovery_fraction =
      static_cast<double>(n_recovery) / (n_success + n_recovery);
  ds.manifest.env_config = CollectionConfig(base);
  const int total = n_success + n_recovery;
  ds.episodes.reserve(total);
  for (int i = 0; i < total; ++i) {
    const bool recovery = i >= n_success;
    env::EnvConfig c = ds.manifest.env_config;
    c.rng_seed = base_seed ^ static_cast<std::uint64_t>(i);
    c.target_tube = (recovery ? i - n_success : i) % env::kNumTubes;
    ds.episodes.push_back(GenerateEpisode(c, recovery));
    ds.manifest.total_discards += ds.episodes.back().discards;
  }
  return ds;
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());

  const DatasetManifest& m = dataset.manifest;
  json files = json::array();
  for (std::size_t i = 0; i < dataset.episodes.size(); ++i) {
    const Episode& ep = dataset.episodes[i];
    const std::string name = EpisodeFileName(i);
    const std::string bytes = EncodeEpisode(ep);
    WriteFile(dir / name, bytes);
    files.push_back(json{{"file", name},
                         {"bytes", bytes.size()},
                         {"crc32", HexCrc(Crc32(bytes))},
                         {"length", ep.length()},
                         {"grasp_attempts", ep.grasp_attempts},
                         {"discards", ep.discards},
                         {"config", ConfigToJson(ep.config)}});
  }
  json manifest{{"format_version", m.format_version},
                {"n_success", m.n_success},
                {"n_recovery", m.n_recovery},
                {"n_episodes", dataset.episodes.size()},
                {"base_seed", m.base_seed},
                {"recovery_fraction", m.recovery_fraction},
                {"total_discards", m.total_discards},
                {"env_config", ConfigToJson(m.env_config)},
                {"episodes", files}};
  WriteFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset LoadDataset(const std::filesystem::path& dir) {
  const std::string text = ReadFile(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat,
                std::string("manifest.json: ") + e.what());
  }

  Dataset ds;
  try {
    DatasetManifest& m = ds.manifest;
    m.format_version = manifest.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "dataset format_version " +
                      std::to_string(m.format_version) + ", expected " +
                      std::to_string(kDatasetFormatVersion));
    }
    m.n_success = manifest.at("n_success").get<int>();
    m.n_recovery = manifest.at("n_recovery").get<int>();
    m.base_seed = manifest.at("base_seed").get<std::uint64_t>();
    m.recovery_fraction = manifest.at("recovery_fraction").get<double>();
    m.total_discards = manifest.at("total_discards").get<int>();
    m.env_config = ConfigFromJson(manifest.at("env_config"));

    const json& files = manifest.at("episodes");
    if (files.size() != static_cast<std::size_t>(m.n_success + m.n_recovery)) {
      throw Error(ErrorCode::kFormat,
                  "manifest lists " + std::to_string(files.size()) +
                      " episodes but counts sum to " +
                      std::to_string(m.n_success + m.n_recovery));
    }
    for (const json& f : files) {
      const std::string name = f.at("file").get<std::string>();
      const std::string bytes = ReadFile(dir / name);
      const auto want_bytes = f.at("bytes").get<std::size_t>();
      if (bytes.size() < want_bytes) {
        throw Error(ErrorCode::kTruncated,
                    name + ": " + std::to_string(bytes.size()) + " of " +
                        std::to_string(want_bytes) + " bytes");
      }
      if (HexCrc(Crc32(bytes)) != f.at("crc32").get<std::string>() ||
          bytes.size() != want_bytes) {
        throw Error(ErrorCode::kChecksumMismatch,
                    "checksum mismatch in " + name);
      }
      Episode ep;
      DecodeEpisode(bytes, name, ep);
      ep.grasp_attempts = f.at("grasp_attempts").get<int>();
      ep.discards = f.at("discards").get<int>();
      ep.config = ConfigFromJson(f.at("config"));
      ds.episodes.push_back(std::move(ep));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("manifest.json: ") + e.what());
  }
  return ds;
}

}  // namespace hapchunk::demo
