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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "photonloop/fock_state.hpp"

namespace photonloop::testing {

/// Random normalized state supported on sectors [lo, hi].
inline PolarizedFockState random_state(std::mt19937_64 &gen, int lo, int hi, int cutoff) {
  std::normal_distribution<double> g;
  PolarizedFockState s(cutoff);
  for (int n = lo; n <= hi; ++n)
    for (int v = 0; v <= n; ++v) s.at(n - v, v) = Complex(g(gen), g(gen));
  s.normalize();
  return s;
}

inline JonesUnitary random_unitary(std::mt19937_64 &gen) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  const double theta = u(gen) / 4.0, a = u(gen), b = u(gen), c = u(gen);
  const Complex e1 = std::polar(1.0, a), e2 = std::polar(1.0, b), e3 = std::polar(1.0, c);
  const double ct = std::cos(theta), st = std::sin(theta);
  return {e1 * ct, -e1 * e2 * st, e3 * st, e3 * e2 * ct};
}

}  // namespace photonloop::testing
