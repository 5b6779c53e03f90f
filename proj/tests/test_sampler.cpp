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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "photonloop/exact_solver.hpp"
#include "photonloop/sampler.hpp"

using namespace photonloop;

namespace {

ProtocolSpec spec_of(Target t, double eps, double T = 1.0, double eta = 1.0) {
  ProtocolSpec s;
  s.target = std::move(t);
  s.pump = PumpPolicy::fixed(eps);
  s.cavity.transmission = T;
  s.detector.efficiency = eta;
  return s;
}

SampleOptions with_threads(unsigned n) {
  SampleOptions o;
  o.threads = n;
  return o;
}

}  // namespace

TEST(Sampler, SameSeedSameAggregate) {
  const auto s = spec_of(Target::noon(2), 0.1, 0.98, 0.95);
  const auto a = sample(s, 3000, 17, with_threads(2));
  const auto b = sample(s, 3000, 17, with_threads(2));
  EXPECT_EQ(a.successes, b.successes);
  EXPECT_EQ(a.mean_passes, b.mean_passes);
  EXPECT_EQ(a.mean_fidelity_given_success, b.mean_fidelity_given_success);
}

TEST(Sampler, ThreadCountDoesNotChangeResults) {
  const auto s = spec_of(Target::fock(3), 0.1, 0.99, 0.9);
  const auto a = sample(s, 5000, 5, with_threads(1));
  const auto b = sample(s, 5000, 5, with_threads(4));
  EXPECT_EQ(a.successes, b.successes);
  EXPECT_EQ(a.mean_passes, b.mean_passes);
  EXPECT_EQ(a.passes_standard_error, b.passes_standard_error);
}

TEST(Sampler, DifferentSeedsDiffer) {
  const auto s = spec_of(Target::fock(2), 0.1, 0.98);
  EXPECT_NE(sample(s, 2000, 1).mean_passes, sample(s, 2000, 2).mean_passes);
}

TEST(Sampler, OpaqueCavityNeverSucceedsBeyondOnePhoton) {
  EXPECT_EQ(sample(spec_of(Target::noon(2), 0.1, 0.0), 2000, 3).successes, 0);
  EXPECT_EQ(sample(spec_of(Target::fock(3), 0.1, 0.0), 2000, 3).successes, 0);
}

TEST(Sampler, RejectsEmptyRun) { EXPECT_THROW(sample(spec_of(Target::fock(1), 0.1), 0, 1), ArgumentError); }

TEST(Sampler, AgreesWithExactSolver) {
  std::vector<ProtocolSpec> cases{spec_of(Target::fock(1), 0.1), spec_of(Target::fock(2), 0.1, 0.98, 0.9),
                                  spec_of(Target::fock(4), 0.2, 0.99, 0.95), spec_of(Target::noon(2), 0.1, 0.98),
                                  spec_of(Target::noon(3), 0.15, 0.995, 0.9), spec_of(Target::mm(2, 1), 0.1, 0.99)};
  cases[2].pump.multi_add_allowed = true;
  cases[1].detector.dark_rate = 2e-4;
  cases[1].cavity.t_out = 0.95;
  for (const auto &s : cases) {
    const auto ex = exact_success(s);
    const auto mc = sample(s, 20000, 99);
    const double sigma = std::sqrt(ex.success * (1 - ex.success) / 20000.0);
    EXPECT_LE(std::abs(mc.success_rate - ex.success), 4 * sigma + 1e-12) << to_string(s.target.kind);
    if (mc.successes > 100 && s.target.strict()) {
      EXPECT_NEAR(mc.mean_fidelity_given_success, ex.mean_fidelity, 5 * mc.fidelity_standard_error() + 1e-9);
    }
  }
}

TEST(Sampler, MeanPassesAgreeWithExact) {
  const auto s = spec_of(Target::fock(2), 0.1);
  const auto mc = sample(s, 20000, 4);
  EXPECT_NEAR(mc.mean_passes, mean_passes(s), 5 * mc.passes_standard_error);
}

TEST(Sampler, SkippingMatchesStepwiseInDistribution) {
  const auto s = spec_of(Target::fock(2), 0.2, 0.97, 0.9);
  SampleOptions step;
  step.stepwise = true;
  const auto a = sample(s, 20000, 8);
  const auto b = sample(s, 20000, 9, step);
  const double se = std::hypot(a.standard_error, b.standard_error);
  EXPECT_LE(std::abs(a.success_rate - b.success_rate), 5 * se);
  EXPECT_LE(std::abs(a.mean_passes - b.mean_passes),
            5 * std::hypot(a.passes_standard_error, b.passes_standard_error));
}

TEST(Sampler, AmplitudeMeasureIsSquareRoot) {
  const auto s = spec_of(Target::noon(4), 0.2);
  SampleOptions sq, amp;
  sq.keep_fidelities = amp.keep_fidelities = true;
  amp.measure = FidelityMeasure::Amplitude;
  const auto a = sample(s, 500, 2, sq);
  const auto b = sample(s, 500, 2, amp);
  ASSERT_EQ(a.fidelities.size(), b.fidelities.size());
  for (std::size_t i = 0; i < a.fidelities.size(); ++i) EXPECT_NEAR(std::sqrt(a.fidelities[i]), b.fidelities[i], 1e-12);
}

TEST(Histogram, FockSuccessesAllLandInTopBin) {
  const auto h = fidelity_histogram(spec_of(Target::fock(2), 0.1, 0.99), 2000, 3, 10);
  ASSERT_EQ(h.size(), 10u);
  const long long total = std::accumulate(h.begin(), h.end(), 0LL);
  EXPECT_GT(total, 0);
  EXPECT_EQ(h.back(), total);
}

TEST(Histogram, SingleTrialHasAtMostOneEntry) {
  const auto h = fidelity_histogram(spec_of(Target::fock(1), 0.1), 1, 3, 4);
  EXPECT_LE(std::accumulate(h.begin(), h.end(), 0LL), 1);
  EXPECT_THROW(fidelity_histogram(spec_of(Target::fock(1), 0.1), 1, 3, 0), ArgumentError);
}
