/**
 * Copyright (c) The mixq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef MIXQ_ERROR_H
#define MIXQ_ERROR_H

#include <stdexcept>
#include <string>

namespace mixq {

/// Every failure the library reports carries one of these codes so callers
/// (and the CLI exit-code mapping) can branch without parsing messages.
enum class ErrorCode {
  InvalidArgument,
  InvalidGraph,
  CycleDetected,
  UnknownNode,
  ShapeMismatch,
  UnsupportedKind,
  MissingQuantParams,
  NonPositiveVariance,
  IoError,
  FormatVersionMismatch,
  CorruptBlob,
  UnknownArch,
  EmptyCalibrationSet,
  EmptyProfile,
  UnknownNodeInList,
  MissingCalibration,
  NonMonotonicIndices,
  KeyMismatch,
  MissingLabels,
  EmptyImageBatch,
  IncompleteConfig,
  UnresolvedShape,
  StageMismatch,
};

/// \returns a stable printable name for \p code.
const char *errorCodeName(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &msg)
      : std::runtime_error(std::string(errorCodeName(code)) + ": " + msg),
        code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

} // namespace mixq

#endif // MIXQ_ERROR_H
