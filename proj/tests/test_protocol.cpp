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
#include <numbers>

#include "photonloop/protocol.hpp"

using namespace photonloop;

namespace {

ProtocolSpec fock_spec(int n, double eps, double t = 1.0, double eta = 1.0) {
  ProtocolSpec s;
  s.target = Target::fock(n);
  s.pump = PumpPolicy::fixed(eps);
  s.cavity.transmission = t;
  s.detector.efficiency = eta;
  return s;
}

ProtocolSpec noon(int n, double eps, double t = 1.0) {
  ProtocolSpec s = fock_spec(n, eps, t);
  s.target = Target::noon(n);
  return s;
}

}  // namespace

TEST(Spec, ValidationRejectsInconsistentConfigurations) {
  ProtocolSpec s = fock_spec(2, 0.1);
  s.detector.mode = DetectorMode::Threshold;
  EXPECT_THROW(s.validate(), ConfigError);
  s.target = Target::fock(1);
  EXPECT_NO_THROW(s.validate());

  ProtocolSpec n = noon(3, 0.1);
  n.pump.multi_add_allowed = true;
  EXPECT_THROW(n.validate(), ConfigError);
  n.pump.multi_add_allowed = false;
  n.ordering = {0, 0, 1};
  EXPECT_THROW(n.validate(), ConfigError);
  n.ordering = {2, 0, 1};
  EXPECT_NO_THROW(n.validate());

  ProtocolSpec t = fock_spec(1, 0.1, 1.2);
  try {
    t.validate();
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_EQ(e.field(), "cavity");
  }
  EXPECT_THROW(fock_spec(1, 0.0).validate(), ConfigError);  // no default horizon without pumping
}

TEST(Spec, Defaults) {
  const ProtocolSpec s = fock_spec(4, 0.05);
  EXPECT_EQ(s.effective_cutoff(), 6);
  EXPECT_EQ(s.effective_max_passes(), 32000);  // ceil(20 * 4 / 0.0025)
  const ProtocolSpec p = [] {
    ProtocolSpec x = fock_spec(2, 0.1);
    x.pump = PumpPolicy::per_remaining({0.2, 0.1});
    return x;
  }();
  EXPECT_EQ(p.effective_max_passes(), 4000);  // smallest epsilon governs
}

TEST(Engine, SingleAdditionAlongPumpAxis) {
  ProtocolSpec s = fock_spec(1, 0.1);
  s.pump_axis = PolarizationCoefficients::linear(std::numbers::pi / 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rec = run_protocol(s, seed);
    if (!rec.success) continue;
    EXPECT_EQ(rec.heralded_total, 1);
    const auto expected = apply_creation(vacuum(3), s.pump_axis);
    EXPECT_NEAR(fidelity(rec.final_state, expected), 1.0, 1e-12);
  }
}

TEST(Engine, RunPassFromVacuumAddsOnePhoton) {
  const ProtocolSpec s = fock_spec(2, 0.3);
  const Engine e(s);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 400 && checked < 5; ++seed) {
    Rng rng(seed, 0);
    auto [out, next] = run_pass(e.initial_context(), s, rng);
    if (out.pairs_announced != 1) continue;
    ++checked;
    EXPECT_EQ(next.heralded_total, 1);
    EXPECT_EQ(next.true_total, 1);
    EXPECT_EQ(out.pass_index, 1);
    EXPECT_NEAR(std::abs(next.cavity_state.amplitude(1, 0)), 1.0, 1e-14);
  }
  EXPECT_EQ(checked, 5);
}

TEST(Engine, NullPassAppliesNormalizedNoPairMap) {
  // A two-photon superposition in the internal frame; no loss, no dark counts.
  const ProtocolSpec s = noon(4, 0.3);
  const Engine e(s);
  EngineContext ctx = e.initial_context();
  ctx.cavity_state = PolarizedFockState(e.cutoff());
  ctx.cavity_state.at(1, 1) = 1.0;
  ctx.cavity_state.at(0, 2) = std::sqrt(2.0);
  ctx.cavity_state.normalize();
  ctx.heralded_total = 2;
  ctx.true_total = 2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, 0);
    EngineContext c = ctx;
    const PassOutcome o = e.step(c, rng);
    if (!o.is_null()) continue;
    const double eps = 0.3;
    const double a11 = SpdcInstrument::k0_factor(eps, 1) / std::sqrt(SpdcInstrument::completion(eps, 1));
    const double a02 = SpdcInstrument::k0_factor(eps, 0) / std::sqrt(SpdcInstrument::completion(eps, 0));
    PolarizedFockState expected(e.cutoff());
    expected.at(1, 1) = a11;
    expected.at(0, 2) = a02 * std::sqrt(2.0);
    expected.normalize();
    EXPECT_NEAR(fidelity(c.cavity_state, expected), 1.0, 1e-14);
    EXPECT_EQ(c.heralded_total, 2);
    EXPECT_EQ(c.true_total, 2);
    return;
  }
  FAIL() << "no null pass drawn";
}

TEST(Engine, RotationAfterEveryAdditionButTheLast) {
  const ProtocolSpec s = noon(4, 0.1);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto rec = run_protocol(s, seed, 0, {.record_outcomes = true});
    if (!rec.success) continue;
    int additions = 0;
    for (const auto &o : rec.outcomes) {
      if (o.pairs_announced != 1) continue;
      ++additions;
      EXPECT_EQ(o.rotation_applied, additions < 4);
    }
    EXPECT_EQ(additions, 4);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Engine, OvershootOnAnnouncedDoublePair) {
  const ProtocolSpec s = noon(1, 0.5);
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 400 && !seen; ++seed) {
    const auto rec = run_protocol(s, seed);
    if (rec.terminated_reason != TerminationReason::Overshoot) continue;
    seen = true;
    EXPECT_FALSE(rec.success);
    EXPECT_EQ(rec.true_total, 2);
  }
  EXPECT_TRUE(seen);
}

TEST(Engine, TotalLossNeverSucceeds) {
  ProtocolSpec s = fock_spec(2, 0.1, 0.0);
  s.cavity.max_passes = 3000;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto rec = run_protocol(s, seed);
    EXPECT_FALSE(rec.success);
  }
}

TEST(Engine, CounterConservationEveryPass) {
  for (ProtocolSpec s : {fock_spec(3, 0.3, 0.9, 0.8), noon(3, 0.3, 0.95)}) {
    s.pump.multi_add_allowed = s.target.kind == TargetKind::Fock;
    const Engine e(s);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed, 0);
      EngineContext ctx = e.initial_context();
      while (!ctx.terminated()) {
        e.step(ctx, rng);
        if (ctx.reason == TerminationReason::Capacity) break;
        const auto n = ctx.cavity_state.definite_photon_number();
        ASSERT_TRUE(n.has_value());
        EXPECT_EQ(*n, ctx.true_total - ctx.lost_total);
      }
    }
  }
}

TEST(Engine, PerfectDetectionHeraldsEveryPair) {
  const ProtocolSpec s = fock_spec(3, 0.2, 0.97);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto rec = run_protocol(s, seed);
    if (rec.terminated_reason == TerminationReason::ReachedTarget) { EXPECT_EQ(rec.heralded_total, rec.true_total); }
  }
}

TEST(Engine, StepwiseAndSkipAheadAgreeStatistically) {
  const ProtocolSpec s = fock_spec(2, 0.15, 0.97, 0.9);
  const Engine e(s);
  const int trials = 6000;
  double a = 0, b = 0, pa = 0, pb = 0;
  for (int i = 0; i < trials; ++i) {
    Rng r1(1, static_cast<std::uint64_t>(i)), r2(2, static_cast<std::uint64_t>(i));
    const auto x = e.run(r1, {.stepwise = false});
    const auto y = e.run(r2, {.stepwise = true});
    a += x.success;
    b += y.success;
    pa += static_cast<double>(x.passes);
    pb += static_cast<double>(y.passes);
  }
  a /= trials;
  b /= trials;
  const double se = std::sqrt(a * (1 - a) / trials + b * (1 - b) / trials);
  EXPECT_LT(std::abs(a - b), 4 * se);
  EXPECT_LT(std::abs(pa - pb) / trials, 0.1 * pa / trials);
}

TEST(Engine, ExpandedTraceHasOneRowPerPass) {
  const ProtocolSpec s = noon(3, 0.1, 0.99);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rec = run_protocol(s, seed, 0, {.record_outcomes = true});
    const auto rows = expand_outcomes(rec, s);
    ASSERT_EQ(static_cast<long long>(rows.size()), rec.passes);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].pass_index, static_cast<long long>(i) + 1);
    int heralded = 0;
    for (const auto &r : rows) heralded += r.pairs_announced;
    EXPECT_EQ(heralded, rec.heralded_total);
  }
}

TEST(Engine, DeterministicPerSeedAndStream) {
  const ProtocolSpec s = noon(3, 0.1, 0.99);
  const auto a = run_protocol(s, 42, 7), b = run_protocol(s, 42, 7), c = run_protocol(s, 42, 8);
  EXPECT_EQ(a.passes, b.passes);
  EXPECT_EQ(a.fidelity_to_target, b.fidelity_to_target);
  EXPECT_FALSE(a.passes == c.passes && a.fidelity_to_target == c.fidelity_to_target);
}

TEST(Scoring, SuccessOfFollowsCounters) {
  const ProtocolSpec f = fock_spec(4, 0.1);
  TrajectoryRecord r;
  r.terminated_reason = TerminationReason::ReachedTarget;
  r.true_total = r.heralded_total = 4;
  EXPECT_TRUE(success_of(r, f));
  r.true_total = 5;  // one undetected extra photon ...
  r.lost_total = 1;  // ... compensated by one loss
  EXPECT_TRUE(success_of(r, f));
  r.lost_total = 0;
  EXPECT_FALSE(success_of(r, f));

  const ProtocolSpec n = noon(4, 0.1);
  TrajectoryRecord q;
  q.terminated_reason = TerminationReason::ReachedTarget;
  q.true_total = q.heralded_total = 4;
  EXPECT_TRUE(success_of(q, n));
  q.lost_total = 1;
  EXPECT_FALSE(success_of(q, n));
  q.lost_total = 0;
  q.terminated_reason = TerminationReason::MaxPasses;
  EXPECT_FALSE(success_of(q, n));
}

TEST(Fidelity, FockOutputsAreExactNumberStates) {
  const ProtocolSpec s = fock_spec(3, 0.2, 0.95, 0.9);
  int successes = 0;
  for (std::uint64_t i = 0; i < 300; ++i) {
    const auto rec = run_protocol(s, 9, i);
    if (!rec.success) continue;
    ++successes;
    EXPECT_NEAR(output_fidelity(rec, s), 1.0, 1e-12);
  }
  EXPECT_GT(successes, 10);
}

TEST(Fidelity, TwoPhotonNoonIsUndistorted) {
  const ProtocolSpec s = noon(2, 0.01);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto rec = run_protocol(s, 3, i);
    if (rec.success) { EXPECT_NEAR(rec.fidelity_to_target, 1.0, 1e-10); }
  }
}

TEST(Fidelity, FourPhotonNoonIsDistortedByWaiting) {
  const ProtocolSpec s = noon(4, 0.2);
  double worst = 1.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto rec = run_protocol(s, 5, i);
    if (rec.success) worst = std::min(worst, rec.fidelity_to_target);
  }
  EXPECT_LT(worst, 0.99);
}

TEST(Fidelity, ZeroNormIsUndefined) {
  TrajectoryRecord r;
  r.final_state = PolarizedFockState(2);
  EXPECT_THROW(output_fidelity(r, fock_spec(1, 0.1)), UndefinedFidelityError);
}

TEST(Subtraction, SinglePhotonRemoval) {
  ProtocolSpec s;
  s.target = Target::subtract(basis_state(2, 0, 2), 1, 0.01);
  int ok = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto rec = run_protocol(s, 1, i);
    if (!rec.success) continue;
    ++ok;
    EXPECT_NEAR(fidelity(rec.final_state, basis_state(1, 0, 2)), 1.0, 1e-12);
  }
  EXPECT_GT(ok, 190);
}

TEST(Subtraction, DiagonalAxisOnDiagonalPhotons) {
  const auto d = PolarizationCoefficients::linear(std::numbers::pi / 4);
  ProtocolSpec s;
  s.target = Target::subtract(apply_creation(apply_creation(vacuum(2), d), d), 1, 0.05, d);
  const auto rec = run_protocol(s, 4, 0);
  ASSERT_TRUE(rec.success);
  EXPECT_NEAR(fidelity(rec.final_state, apply_creation(vacuum(2), d)), 1.0, 1e-12);
}

TEST(Threshold, SinglePhotonWithClickDetector) {
  ProtocolSpec s = fock_spec(1, 0.1);
  s.detector.mode = DetectorMode::Threshold;
  int ok = 0;
  for (std::uint64_t i = 0; i < 100; ++i) ok += run_protocol(s, 2, i).success;
  EXPECT_GT(ok, 90);
}
