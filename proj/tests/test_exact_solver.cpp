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

#include "photonloop/exact_solver.hpp"

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

double pw(double eps, int n, int k) { return SpdcInstrument::pair_weight(eps, n, k); }

// Probability that a stage whose per-pass weights are (stay, advance) advances
// within m passes: advance (1 - stay^m) / (1 - stay).
double stage(double stay, double advance, long long m) {
  return advance * (1.0 - std::pow(stay, static_cast<double>(m))) / (1.0 - stay);
}

}  // namespace

TEST(FockExact, SinglePhotonGeometricSeries) {
  const double eps = 0.1;
  const auto s = spec_of(Target::fock(1), eps);
  const auto r = fock_success_exact(s);
  const double oracle = stage(pw(eps, 0, 0), pw(eps, 0, 1), s.effective_max_passes());
  EXPECT_NEAR(r.success, oracle, 1e-12);
  EXPECT_GE(r.success, 0.99);
}

TEST(FockExact, TwoPhotonsProductOfStages) {
  // T = 1, eta = 1: stage c succeeds with p1(c) / (1 - p0(c)) per waiting run.
  const double eps = 0.2;
  auto s = spec_of(Target::fock(2), eps);
  s.cavity.max_passes = 1000000;
  const double oracle = pw(eps, 0, 1) / (1 - pw(eps, 0, 0)) * pw(eps, 1, 1) / (1 - pw(eps, 1, 0));
  EXPECT_NEAR(fock_success_exact(s).success, oracle, 1e-12);
}

TEST(FockExact, BlindDetectorNeverConfirms) {
  EXPECT_EQ(fock_success_exact(spec_of(Target::fock(2), 0.1, 1.0, 0.0)).success, 0.0);
}

TEST(FockExact, FourPhotonSourceExceedsOneHalfSomewhere) {
  double best = 0.0;
  for (double T = 0.95; T <= 1.0 + 1e-12; T += 0.01)
    best = std::max(best, fock_success_exact(spec_of(Target::fock(4), 0.05, T)).success);
  EXPECT_GE(best, 0.5);
}

TEST(FockExact, ProbabilityIsConserved) {
  for (double T : {0.9, 0.97, 1.0})
    for (double eta : {0.8, 1.0}) {
      auto s = spec_of(Target::fock(3), 0.15, T, eta);
      s.detector.dark_rate = 0.01;
      s.cavity.t_out = 0.98;
      const auto r = fock_success_exact(s);
      EXPECT_NEAR(r.success + r.failure + r.truncation_bound, 1.0, 1e-12);
    }
}

TEST(FockExact, SwitchOutLossAppliesOnce) {
  auto s = spec_of(Target::fock(2), 0.1);
  const double base = fock_success_exact(s).success;
  s.cavity.t_out = 0.9;
  // With perfect detection the cavity always holds exactly N photons on success.
  EXPECT_NEAR(fock_success_exact(s).success, base * 0.81, 1e-12);
}

TEST(FockExact, DarkCountsHurt) {
  auto s = spec_of(Target::fock(2), 0.1, 0.99);
  const double clean = fock_success_exact(s).success;
  s.detector.dark_rate = 1e-3;
  EXPECT_LT(fock_success_exact(s).success, clean);
}

TEST(NoonExact, SinglePhotonMatchesFockWithPerfectDetection) {
  for (double T : {0.9, 1.0}) {
    const double f = fock_success_exact(spec_of(Target::fock(1), 0.1, T)).success;
    const double n = noon_success_exact(spec_of(Target::noon(1), 0.1, T)).success;
    EXPECT_NEAR(f, n, 1e-12);
  }
  // A missed herald dooms the strict target but not the Fock build, whose
  // stray photon may still be lost before the next heralded pair.
  EXPECT_GT(fock_success_exact(spec_of(Target::fock(1), 0.1, 0.9, 0.9)).success,
            noon_success_exact(spec_of(Target::noon(1), 0.1, 0.9, 0.9)).success);
}

TEST(NoonExact, TwoPhotonStagesWithLoss) {
  // After the first photon and the pi/2 frame change the stored photon is
  // orthogonal to the pump, so stage two sees n_p = 0 and per-pass survival T.
  const double eps = 0.1, T = 0.97, eta = 0.95;
  auto s = spec_of(Target::noon(2), eps, T, eta);
  const long long m = s.effective_max_passes();
  double oracle = 0.0;
  // Stage one ends at pass j with probability p0^(j-1) p1 eta; stage two then has m - j passes.
  const double p0 = pw(eps, 0, 0), p1 = pw(eps, 0, 1);
  for (long long j = 1; j < m; ++j)
    oracle += std::pow(p0, static_cast<double>(j - 1)) * p1 * eta * stage(T * p0, T * p1 * eta, m - j);
  const auto r = noon_success_exact(s);
  EXPECT_NEAR(r.success, oracle, 1e-12);
  EXPECT_NEAR(r.mean_fidelity, 1.0, 1e-12);
}

TEST(NoonExact, WeakPumpLimit) {
  EXPECT_GE(noon_success_exact(spec_of(Target::noon(2), 0.02)).success, 0.99);
}

TEST(NoonExact, MonotoneInTransmission) {
  for (int n : {2, 3, 4})
    for (double eta : {0.9, 1.0})
      EXPECT_GT(noon_success_exact(spec_of(Target::noon(n), 0.1, 0.99, eta)).success,
                noon_success_exact(spec_of(Target::noon(n), 0.1, 0.98, eta)).success);
}

TEST(NoonExact, MnmTargetsSolve) {
  const auto r = noon_success_exact(spec_of(Target::mm(2, 1), 0.05));
  EXPECT_GT(r.success, 0.95);
  EXPECT_GT(r.mean_fidelity, 0.5);
  EXPECT_LE(r.mean_fidelity, 1.0 + 1e-12);
  EXPECT_THROW(noon_success_exact(spec_of(Target::fock(2), 0.1)), ArgumentError);
}

TEST(MeanPasses, SinglePhotonGeometricMean) {
  const double eps = 0.1;
  const double mp = mean_passes(spec_of(Target::fock(1), eps));
  EXPECT_NEAR(mp, 1.0 / (1.0 - pw(eps, 0, 0)), 1e-6);
  EXPECT_NEAR(mp, 1.0 / (eps * eps), 0.05 / (eps * eps));
}

TEST(MeanPasses, DecreasesWithStrongerPumping) {
  EXPECT_GT(mean_passes(spec_of(Target::fock(2), 0.05)), mean_passes(spec_of(Target::fock(2), 0.1)));
}

TEST(MeanPasses, FourPhotonsFollowStimulatedStages) {
  // Stage c waits 1 / (1 - p0(c)) passes on average; stimulated emission makes
  // later stages faster, so the total is close to (1 + 1/2 + 1/3 + 1/4) / eps^2.
  const double eps = 0.05;
  double oracle = 0.0;
  for (int c = 0; c < 4; ++c) oracle += 1.0 / (1.0 - pw(eps, c, 0));
  EXPECT_NEAR(mean_passes(spec_of(Target::fock(4), eps)), oracle, 0.01 * oracle);
}

TEST(Ordering, MonotoneInTransmissionAndEfficiency) {
  for (int n : {2, 4}) {
    double prev_t = -1.0;
    for (double T = 0.95; T <= 1.0 + 1e-12; T += 0.005) {
      const double p = fock_success_exact(spec_of(Target::fock(n), 0.1, T)).success;
      EXPECT_GE(p, prev_t - 1e-12);
      prev_t = p;
    }
    double prev_e = -1.0;
    for (double eta : {0.9, 0.95, 1.0}) {
      const double p = noon_success_exact(spec_of(Target::noon(n), 0.1, 0.98, eta)).success;
      EXPECT_GE(p, prev_e - 1e-12);
      prev_e = p;
    }
  }
}

TEST(Ordering, FockBeatsNoonWithLossAndMultiAddWidensGap) {
  for (int n : {2, 4})
    for (double T : {0.95, 0.97, 0.99}) {
      const auto f = spec_of(Target::fock(n), 0.1, T, 0.95);
      auto fm = f;
      fm.pump.multi_add_allowed = true;
      const double single = fock_success_exact(f).success;
      const double multi = fock_success_exact(fm).success;
      const double noon = noon_success_exact(spec_of(Target::noon(n), 0.1, T, 0.95)).success;
      EXPECT_GT(single, noon);
      EXPECT_GE(multi, single);
    }
}

TEST(Dispatch, SubtractionHasNoExactSolver) {
  ProtocolSpec s;
  s.target = Target::subtract(basis_state(1, 0, 1), 1, 0.1);
  EXPECT_THROW(exact_success(s), ArgumentError);
}

TEST(FockExact, UndetectedPairsCanRefillLosses) {
  // Fock success is count-based, so at T < 1 an unheralded pair may replace a
  // lost photon; weaker detection then helps.
  EXPECT_GT(fock_success_exact(spec_of(Target::fock(4), 0.1, 0.95, 0.9)).success,
            fock_success_exact(spec_of(Target::fock(4), 0.1, 0.95, 1.0)).success);
}

TEST(FockExact, StimulatedDoublesFavourNoonWithoutLoss) {
  // A N00N build rotates stored photons out of the pump mode, so its double
  // pair rate stays at the empty-cavity value; a Fock build does not.
  EXPECT_LT(fock_success_exact(spec_of(Target::fock(2), 0.1)).success,
            noon_success_exact(spec_of(Target::noon(2), 0.1)).success);
}
