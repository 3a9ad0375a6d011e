/*
 * Copyright 2026 The vbilstm Authors
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

namespace vbl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes, or a model/data dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// Argument outside the domain of a primitive (log of a non-positive value, ...).
struct DomainError : Error {
  using Error::Error;
};

/// NaN/Inf detected in a value or gradient.
struct NumericError : Error {
  using Error::Error;
};

/// Malformed or missing input data.
struct DataError : Error {
  using Error::Error;
};

/// Bad configuration. `key()` names the offending entry when there is one.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace vbl
