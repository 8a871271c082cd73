/*
 * Copyright 2026 The Stylometric Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef STYLOMETRIC_ERROR_HPP_
#define STYLOMETRIC_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace stylometric {

enum class ErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kDimensionOverflow,
  kNonFinite,
  kInvalidArgument,
  kMixedWidth,
  kDuplicateId,
  kMissingLabel,
  kMalformedLine,
  kDimensionMismatch,
  kDegenerateVariance,
  kProvenanceMismatch,
  kIo,
};

std::string_view ErrorKindName(ErrorKind kind);

// Every failure surfaced by the library is one of these. The kind is stable
// and meant for programmatic dispatch; the message carries the context
// (file, image id, line number).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stylometric

#endif  // STYLOMETRIC_ERROR_HPP_
