// Copyright 2026 the atc authors
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

#ifndef ATC_COMMON_HPP
#define ATC_COMMON_HPP

#include <stdexcept>
#include <string>

namespace atc {

// Error categories map 1:1 onto the CLI exit-code contract.
enum class ErrorKind {
  kIo = 1,          // file system, short reads, unwritable paths
  kValidation = 2,  // malformed input, bad arguments, format violations
  kNumeric = 3,     // solver failures, non-convergence, singular inputs
};

enum class Errc {
  kBadMagic,
  kBadVersion,
  kBadDtype,
  kTruncated,
  kNonFinite,
  kIoFailure,
  kDimMismatch,
  kInvalidArgument,
  kCorruptStream,
  kNoCode,
  kNonConvergence,
  kNonBracketing,
  kCholeskyFailure,
  kAllZero,
  kOverflow,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, ErrorKind kind, const std::string& message)
      : std::runtime_error(message), code_(code), kind_(kind) {}

  Errc code() const { return code_; }
  ErrorKind kind() const { return kind_; }

 private:
  Errc code_;
  ErrorKind kind_;
};

[[noreturn]] inline void throw_io(Errc code, const std::string& message) {
  throw Error(code, ErrorKind::kIo, message);
}

[[noreturn]] inline void throw_validation(Errc code, const std::string& message) {
  throw Error(code, ErrorKind::kValidation, message);
}

[[noreturn]] inline void throw_numeric(Errc code, const std::string& message) {
  throw Error(code, ErrorKind::kNumeric, message);
}

}  // namespace atc

#endif  // ATC_COMMON_HPP
