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

#include "hapchunk/error.h"

namespace hapchunk {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension:
      return "dimension";
    case ErrorCode::kConfiguration:
      return "configuration";
    case ErrorCode::kContract:
      return "contract";
    case ErrorCode::kNumeric:
      return "numeric";
    case ErrorCode::kGeneration:
      return "generation";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kVersionMismatch:
      return "version-mismatch";
    case ErrorCode::kChecksumMismatch:
      return "checksum-mismatch";
    case ErrorCode::kTruncated:
      return "truncated";
    case ErrorCode::kFormat:
      return "format";
  }
  return "unknown";
}

}  // namespace hapchunk
