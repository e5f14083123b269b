// Copyright 2026 The ckctx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CKCTX_ERROR_HPP
#define CKCTX_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckctx {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree, or a product of dimensions overflows.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument (k, s, label, ...) is violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// L1/L2 normalization requested on an all-zero matrix.
class ZeroMatrixError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, degenerate encoder output or a zero-norm feature.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary payload; carries the byte offset of the failure.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Configuration validation failure listing every offending key.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) {
      out += "\n  - " + item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace ckctx

#endif  // CKCTX_ERROR_HPP
