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

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "photonloop/channels.hpp"
#include "photonloop/error.hpp"

namespace photonloop {

enum class PumpKind { Fixed, PerRemaining, Optimized };

inline std::string to_string(PumpKind k) {
  switch (k) {
    case PumpKind::Fixed:
      return "fixed";
    case PumpKind::PerRemaining:
      return "per-remaining";
    case PumpKind::Optimized:
      return "optimized";
  }
  return "?";
}

/// Interaction strength per pass as a function of how many heralds are still needed.
///
/// `values[r - 1]` is used while r heralds remain; a schedule shorter than the
/// target reuses its last entry. `multi_add_allowed` lets a Fock build accept
/// several heralded photons in one pass (never allowed for N00N-type targets).
struct PumpPolicy {
  PumpKind kind = PumpKind::Fixed;
  std::vector<double> values{0.05};
  bool multi_add_allowed = false;

  static PumpPolicy fixed(double epsilon, bool multi_add = false) {
    return {PumpKind::Fixed, {epsilon}, multi_add};
  }
  static PumpPolicy per_remaining(std::vector<double> schedule, bool multi_add = false) {
    return {PumpKind::PerRemaining, std::move(schedule), multi_add};
  }

  double epsilon_for(int remaining) const {
    if (kind == PumpKind::Fixed || remaining <= 1) return values.front();
    const auto i = std::min(static_cast<std::size_t>(remaining), values.size()) - 1;
    return values[i];
  }

  double min_epsilon() const { return *std::min_element(values.begin(), values.end()); }

  void validate() const {
    if (values.empty()) throw ConfigError("pump.values", "pump schedule is empty");
    for (double e : values)
      if (!(e >= 0.0 && e <= kMaxEpsilon))
        throw ConfigError("pump.values", "epsilon must lie in [0, " + std::to_string(kMaxEpsilon) + "]");
  }

  /// Compact label for sweep rows, e.g. "fixed:0.05" or "per-remaining:0.1/0.08+multi".
  std::string descriptor() const {
    std::string out = to_string(kind) + ":";
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6g", values[i]);
      if (i) out += "/";
      out += buf;
    }
    if (multi_add_allowed) out += "+multi";
    return out;
  }

  friend bool operator==(const PumpPolicy &, const PumpPolicy &) = default;
};

}  // namespace photonloop
