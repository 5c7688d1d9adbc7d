// Copyright 2026 The CO3 Authors. All Rights Reserved.
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
// =============================================================================

#ifndef CO3_ERROR_HPP_
#define CO3_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace co3 {

// Values match the co3_status codes of the C API.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kNonFinite = 2,
  kDegenerate = 3,
  kInsufficientData = 4,
  kOutOfRange = 5,
  kTruncated = 6,
  kCorrupt = 7,
  kShapeMismatch = 8,
  kDiverged = 9,
  kIo = 10,
  kConfig = 11,
  kInternal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace co3

#endif  // CO3_ERROR_HPP_
