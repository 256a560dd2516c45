// Copyright 2026 The qkstudy Authors
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

namespace qkstudy {

/// Invalid argument: bad index set, non-symmetric matrix, non-finite input.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Feature count outside the range the simulator supports.
class DimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Numerically impossible request, e.g. rescaling a matrix with zero trace.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// SVM problem without two classes.
class DegenerateProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data ingestion or preprocessing failure; `stage()` names where it happened.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Malformed configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : std::runtime_error(format(field, line, what)), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& what) {
    std::string s = "config field '" + field + "'";
    if (line > 0) s += " (line " + std::to_string(line) + ")";
    return s + ": " + what;
  }
  std::string field_;
  int line_;
};

}  // namespace qkstudy
