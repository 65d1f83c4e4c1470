// Copyright 2026 The hatformer Authors
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

#include <stdexcept>
#include <string>

namespace hatformer {

/// Base for every error raised by the library. `kind()` is a stable,
/// machine-readable tag that the CLI prints on stderr.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Invalid configuration (bad flag, bad table, wrong geometry parameter).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

/// Input data that violates a documented invariant.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error("validation_error", what) {}
};

/// Sequence longer than the model can address.
class LengthError : public Error {
public:
  explicit LengthError(const std::string& what) : Error("length_error", what) {}
};

/// Non-finite activation, gradient or loss.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error("numeric_error", what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

/// Raised by the tokenizer trainer and the training loop.
class TrainingError : public Error {
public:
  explicit TrainingError(const std::string& what) : Error("training_error", what) {}
};

}  // namespace hatformer
