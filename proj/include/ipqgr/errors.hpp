// Copyright 2026 The ipqgr Authors.
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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ipqgr {

// Argument errors use std::invalid_argument directly. The types below cover
// the remaining failure categories; the CLI maps each one to an exit code.

/// Operation called on an object whose state does not permit it
/// (empty cluster, session regression, inconsistent engine state).
class InvalidStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed binary or text input. Carries the byte offset (or line number
/// for text formats) at which parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Checksum mismatch on a persisted engine state.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipqgr
