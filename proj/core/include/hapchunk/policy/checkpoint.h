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

#ifndef HAPCHUNK_POLICY_CHECKPOINT_H_
#define HAPCHUNK_POLICY_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "hapchunk/policy/model.h"

namespace hapchunk::policy {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  PolicyConfig config;
  ModelParams params;
};

// Little-endian: "HIAM", u32 version, u64 total file length, config fields,
// u32 tensor count, then per tensor u32 rank, u64 dims, float64 values in
// ModelParams::All order, and finally the CRC-32 of every preceding byte.
std::string EncodeCheckpoint(const PolicyConfig& cfg, const ModelParams& params);
Checkpoint DecodeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                    const ModelParams& params);
// Throws kIo, kFormat, kVersionMismatch, kTruncated, or kChecksumMismatch.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// CRC-32 of the little-endian parameter values, as 8 hex digits.
std::string ParamsChecksum(const ModelParams& params);

}  // namespace hapchunk::policy

#endif  // HAPCHUNK_POLICY_CHECKPOINT_H_
