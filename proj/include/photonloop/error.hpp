// Copyright 2026 The photonloop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace photonloop {

/// Invalid argument to a library operation (bad cutoff, non-unitary matrix, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation would populate occupations beyond the state's photon-number cutoff.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fidelity requested against a zero-norm state.
class UndefinedFidelityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent protocol or run configuration. `field` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string &message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace photonloop
