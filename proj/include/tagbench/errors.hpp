/*
 * Copyright 2026 The tagbench authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace tagbench {

// ConfigError maps to CLI exit code 2, DataError to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct MissingFile : DataError {
  explicit MissingFile(const std::string& path) : DataError("missing file: " + path) {}
};

struct UnsupportedEncoding : DataError {
  using DataError::DataError;
};

struct IoFailure : DataError {
  using DataError::DataError;
};

struct MalformedRow : DataError {
  using DataError::DataError;
};

struct DuplicateClipId : DataError {
  explicit DuplicateClipId(const std::string& id) : DataError("duplicate clip_id: " + id) {}
};

struct BadTagArity : DataError {
  using DataError::DataError;
};

struct WrongSampleRate : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidBandCount : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidConfig : ConfigError {
  using ConfigError::ConfigError;
};

struct ShapeMismatch : ConfigError {
  using ConfigError::ConfigError;
};

struct BackwardOnNonScalar : ConfigError {
  using ConfigError::ConfigError;
};

struct EmptySplit : ConfigError {
  using ConfigError::ConfigError;
};

struct ModeMismatch : ConfigError {
  using ConfigError::ConfigError;
};

struct DegenerateLabels : ConfigError {
  using ConfigError::ConfigError;
};

struct OutOfRange : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace tagbench
