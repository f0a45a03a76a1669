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

#ifndef HAPCHUNK_ERROR_H_
#define HAPCHUNK_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace hapchunk {

// Error categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kDimension = 2,
  kConfiguration = 3,
  kContract = 4,
  kNumeric = 5,
  kGeneration = 6,
  kIo = 7,
  kVersionMismatch = 8,
  kChecksumMismatch = 9,
  kTruncated = 10,
  kFormat = 11,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hapchunk

#endif  // HAPCHUNK_ERROR_H_
