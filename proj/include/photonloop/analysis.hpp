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

// Decision-level tools: pump schedule optimization, analytic single-pass
// bounds, addition-order search for N00N fidelity, and parameter sweeps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "photonloop/channels.hpp"
#include "photonloop/error.hpp"
#include "photonloop/exact_solver.hpp"
#include "photonloop/fock_state.hpp"
#include "photonloop/parallel.hpp"
#include "photonloop/protocol.hpp"
#include "photonloop/sampler.hpp"

namespace photonloop {

// ---------------------------------------------------------------------------
// Single-pass bounds

struct SinglePassBounds {
  int n = 0;
  double thermal_max = 0.0;
  double thermal_argmax = 0.0;  ///< lambda* = n / (n + 1)
  double poisson_max = 0.0;
  double poisson_argmax = 0.0;  ///< mu* = n
};

/// Best single-shot probability of exactly n photons from a thermal
/// (heralded downconversion) or Poisson (attenuated laser) source.
inline SinglePassBounds single_pass_bounds(int n) {
  if (n < 1) throw ArgumentError("n must be >= 1");
  SinglePassBounds b;
  b.n = n;
  const double dn = n;
  b.thermal_argmax = dn / (dn + 1.0);
  b.thermal_max = std::exp(dn * std::log(dn) - (dn + 1.0) * std::log(dn + 1.0));
  b.poisson_argmax = dn;
  b.poisson_max = std::exp(-dn + dn * std::log(dn) - std::lgamma(dn + 1.0));
  return b;
}

// ---------------------------------------------------------------------------
// Scalar action of successive H and V no-pair maps

/// || K0_V K0_H s - (1 - (eps^2/2)(N' + 2)) s || for a state of definite photon
/// number N'. The exact remainder is (eps^4/4) || (n_H + 1)(n_V + 1) s ||.
inline double correction_scalar_check(const PolarizedFockState &s, double epsilon) {
  const std::optional<int> number = s.definite_photon_number();
  if (!number) throw ArgumentError("state must have a definite photon number");
  const SpdcInstrument h({.epsilon = epsilon, .pump_axis = PolarizationCoefficients::horizontal()});
  const SpdcInstrument v({.epsilon = epsilon, .pump_axis = PolarizationCoefficients::vertical()});
  const PolarizedFockState out = v.k0(h.k0(s));
  const double scalar = 1.0 - 0.5 * epsilon * epsilon * (*number + 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.amplitudes().size(); ++i)
    acc += std::norm(out.amplitudes()[i] - scalar * s.amplitudes()[i]);
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Pump schedule optimization

inline double exact_success_probability(const ProtocolSpec &spec) { return exact_success(spec).success; }

/// Per-remaining schedule maximizing the exact success probability over `grid`.
///
/// Starts from the best fixed value, then sweeps the levels (photons still
/// needed) one at a time, trying every grid value for that level with the
/// others held; repeats until a full sweep changes nothing. Ties keep the
/// smaller epsilon. The result is never worse than any fixed grid value.
inline PumpPolicy optimize_pump(const ProtocolSpec &spec, std::vector<double> grid, unsigned threads = 1) {
  if (grid.empty()) throw ArgumentError("epsilon grid is empty");
  for (double e : grid)
    if (!(e > 0.0 && e <= kMaxEpsilon)) throw ArgumentError("grid values must lie in (0, " + std::to_string(kMaxEpsilon) + "]");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const int levels = spec.target.heralds_needed();
  const bool multi = spec.pump.multi_add_allowed;

  const auto evaluate = [&](const std::vector<double> &values) {
    ProtocolSpec s = spec;
    s.pump = PumpPolicy{PumpKind::Optimized, values, multi};
    return exact_success_probability(s);
  };
  const auto better = [](double cand, double best) { return cand > best + 1e-13 * std::max(1.0, best); };

  std::vector<double> fixed_scores(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    fixed_scores[i] = evaluate(std::vector<double>(static_cast<std::size_t>(levels), grid[i]));
  });
  std::size_t best_fixed = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (better(fixed_scores[i], fixed_scores[best_fixed])) best_fixed = i;

  std::vector<double> values(static_cast<std::size_t>(levels), grid[best_fixed]);
  double best = fixed_scores[best_fixed];
  if (grid.size() > 1) {
    for (int sweep = 0; sweep < 20; ++sweep) {
      bool changed = false;
      for (int level = levels; level >= 1; --level) {
        std::vector<double> scores(grid.size());
        parallel_for(grid.size(), threads, [&](std::size_t i) {
          std::vector<double> trial = values;
          trial[static_cast<std::size_t>(level - 1)] = grid[i];
          scores[i] = evaluate(trial);
        });
        const double current = values[static_cast<std::size_t>(level - 1)];
        std::size_t pick = grid.size();
        double pick_score = best;
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (grid[i] == current) continue;
          // Strictly better, or equal and smaller.
          if (better(scores[i], pick_score) ||
              (pick == grid.size() && !better(best, scores[i]) && grid[i] < current && !better(scores[i], best)))
            pick = i, pick_score = std::max(pick_score, scores[i]);
        }
        if (pick != grid.size()) {
          values[static_cast<std::size_t>(level - 1)] = grid[pick];
          best = std::max(best, scores[pick]);
          changed = true;
        }
      }
      if (!changed) break;
    }
  }
  return PumpPolicy{PumpKind::Optimized, values, multi};
}

// ---------------------------------------------------------------------------
// Addition-order study

struct OrderingEstimate {
  std::vector<int> permutation;
  double mean_overlap = 0.0;        ///< mean |<psi|target>| over successes (sampled)
  double overlap_stderr = 0.0;
  double mean_fidelity_exact = 0.0; ///< mean |<psi|target>|^2 over successes (exact)
  double mean_field_overlap = 0.0;  ///< waiting passes replaced by their expectation
  long long successes = 0;
};

struct SensitivityRow {
  double epsilon = 0.0;
  OrderingEstimate baseline, best;
};

struct OrderingStudy {
  int n = 0;
  std::string mode;  ///< "exhaustive" or "heuristic"
  double epsilon_used = 0.0;
  long long trials = 0;
  std::uint64_t seed = 0;
  long long candidates_screened = 0;
  OrderingEstimate baseline;  ///< identity order
  OrderingEstimate best;
  std::vector<SensitivityRow> sensitivity;

  const std::vector<int> &permutation() const { return best.permutation; }
  double mean_overlap_default() const { return baseline.mean_overlap; }
  double mean_overlap_best() const { return best.mean_overlap; }
};

struct OrderingOptions {
  bool exhaustive = true;
  long long screen_trials = 300;     ///< per candidate, common random numbers
  std::size_t finalists = 6;
  long long min_successes = 10000;   ///< for baseline and finalists
  std::vector<double> sensitivity_eps{0.02, 0.05, 0.1};
  long long sensitivity_successes = 2000;
  unsigned threads = 0;
  /// Cavity and detector used while studying distortion (ideal by default).
  CavityModel cavity;
  DetectorModel detector;
};

inline constexpr int kMaxExhaustiveOrderingN = 8;

namespace detail {

inline ProtocolSpec ordering_spec(int n, double eps, const std::vector<int> &perm, const OrderingOptions &o) {
  ProtocolSpec s;
  s.target = Target::noon(n);
  s.pump = PumpPolicy::fixed(eps);
  s.ordering = perm;
  s.cavity = o.cavity;
  s.detector = o.detector;
  return s;
}

/// Deterministic evolution with each waiting period set to its expected length.
inline double mean_field_overlap(const ProtocolSpec &spec) {
  const int n = spec.target.heralds_needed();
  const int cutoff = spec.effective_cutoff();
  const auto dirs = spec.addition_directions();
  PolarizedFockState s = vacuum(cutoff);
  for (int k = 0; k < n; ++k) {
    const double eps = spec.pump.epsilon_for(n - k);
    double p1 = 0.0;
    for (int v = 0; v <= k; ++v) p1 += std::norm(s.amplitude(k - v, v)) * SpdcInstrument::pair_weight(eps, k - v, 1);
    const double wait = std::round((1.0 - p1) / p1);
    auto amps = s.mutable_amplitudes();
    for (int v = 0; v <= k; ++v) {
      const int h = k - v;
      const double a = SpdcInstrument::k0_factor(eps, h) / std::sqrt(SpdcInstrument::completion(eps, h));
      amps[PolarizedFockState::index(h, v)] *= std::pow(a, wait);
    }
    s.normalize();
    s = apply_creation(s, PolarizationCoefficients::horizontal());
    s.normalize();
    if (k + 1 < n)
      s = apply_rotation(s, JonesUnitary::carrying_h_to(dirs[static_cast<std::size_t>(k) + 1]).adjoint() *
                                JonesUnitary::carrying_h_to(dirs[static_cast<std::size_t>(k)]));
  }
  s = apply_rotation(s, JonesUnitary::carrying_h_to(dirs.back()));
  return amplitude_overlap(s, spec.target_state());
}

/// Samples until at least `min_successes` successes (trial count grows in
/// fixed steps so the result is a pure function of the arguments).
inline OrderingEstimate estimate_ordering(int n, double eps, const std::vector<int> &perm, long long min_successes,
                                          std::uint64_t seed, const OrderingOptions &o, long long *trials_used) {
  const ProtocolSpec spec = ordering_spec(n, eps, perm, o);
  const Engine engine(spec);
  SampleOptions so;
  so.threads = o.threads;
  so.measure = FidelityMeasure::Amplitude;
  long long trials = min_successes;
  SampleAggregate agg;
  for (int attempt = 0; attempt < 12; ++attempt) {
    agg = sample(engine, trials, seed, so);
    if (agg.successes >= min_successes) break;
    const double rate = std::max(agg.success_rate, 1e-3);
    trials = static_cast<long long>(std::ceil(1.1 * static_cast<double>(min_successes) / rate)) + 64;
  }
  if (trials_used) *trials_used = agg.trials;
  OrderingEstimate e;
  e.permutation = perm;
  e.successes = agg.successes;
  e.mean_overlap = agg.successes > 0 ? agg.mean_fidelity_given_success : 0.0;
  e.overlap_stderr = agg.fidelity_standard_error();
  e.mean_fidelity_exact = noon_success_exact(spec).mean_fidelity;
  e.mean_field_overlap = mean_field_overlap(spec);
  return e;
}

/// Canonical representatives of orderings under relabelling p -> p + c (mod N)
/// and p -> -p (mod N); both are global polarization symmetries of the target.
inline std::vector<std::vector<int>> ordering_classes(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> rest(static_cast<std::size_t>(n - 1));
  std::iota(rest.begin(), rest.end(), 1);
  do {
    std::vector<int> p{0};
    p.insert(p.end(), rest.begin(), rest.end());
    std::vector<int> mirror(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) mirror[i] = (n - p[i]) % n;
    if (p <= mirror) out.push_back(std::move(p));
  } while (std::next_permutation(rest.begin(), rest.end()));
  return out;
}

/// Greedy alternation: each next angle is the unused one closest to
/// orthogonal to the previous (angles are p * pi / N), lowest index on ties.
inline std::vector<int> alternating_ordering(int n) {
  std::vector<int> perm{0};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[0] = true;
  for (int step = 1; step < n; ++step) {
    const int prev = perm.back();
    int pick = -1;
    int best = std::numeric_limits<int>::max();
    for (int c = 0; c < n; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      // Distance from orthogonal, in units of pi/(2N): | 2|c - prev| - N |.
      const int score = std::abs(2 * std::abs(c - prev) - n);
      if (score < best) best = score, pick = c;
    }
    perm.push_back(pick);
    used[static_cast<std::size_t>(pick)] = true;
  }
  return perm;
}

}  // namespace detail

/// Searches addition orders of the linear N00N factors for the highest mean
/// output overlap. Exhaustive mode screens every symmetry class with a short
/// common-random-number run, then re-estimates the finalists with at least
/// `min_successes` successful trajectories each.
inline OrderingStudy ordering_search(int n, double epsilon, std::uint64_t seed, const OrderingOptions &o = {}) {
  if (n < 1) throw ArgumentError("N must be >= 1");
  if (o.exhaustive && n > kMaxExhaustiveOrderingN)
    throw ConfigError("N", "exhaustive ordering search supports N <= " + std::to_string(kMaxExhaustiveOrderingN) +
                               "; use heuristic mode");
  OrderingStudy study;
  study.n = n;
  study.mode = o.exhaustive ? "exhaustive" : "heuristic";
  study.epsilon_used = epsilon;
  study.seed = seed;

  std::vector<int> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), 0);

  std::vector<std::vector<int>> candidates;
  if (o.exhaustive && n > 1) candidates = detail::ordering_classes(n);
  else candidates.push_back(identity);
  const std::vector<int> alt = detail::alternating_ordering(n);
  if (std::find(candidates.begin(), candidates.end(), alt) == candidates.end()) candidates.push_back(alt);
  if (!o.exhaustive) {
    // Neighbourhood of the greedy order: all adjacent transpositions after the first slot.
    for (int i = 1; i + 1 < n; ++i) {
      std::vector<int> p = alt;
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i) + 1]);
      if (std::find(candidates.begin(), candidates.end(), p) == candidates.end()) candidates.push_back(p);
    }
  }
  study.candidates_screened = static_cast<long long>(candidates.size());

  // Screening: same seed for every candidate (common random numbers).
  std::vector<double> screen(candidates.size(), 0.0);
  if (candidates.size() > o.finalists) {
    SampleOptions so;
    so.threads = 1;
    so.measure = FidelityMeasure::Amplitude;
    parallel_for(candidates.size(), o.threads, [&](std::size_t i) {
      const auto agg = sample(Engine(detail::ordering_spec(n, epsilon, candidates[i], o)), o.screen_trials, seed, so);
      screen[i] = agg.successes > 0 ? agg.mean_fidelity_given_success : 0.0;
    });
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return screen[a] > screen[b]; });
  order.resize(std::min(order.size(), o.finalists));

  long long trials_used = 0;
  study.baseline = detail::estimate_ordering(n, epsilon, identity, o.min_successes, seed, o, &trials_used);
  study.trials = trials_used;
  study.best = study.baseline;
  for (std::size_t idx : order) {
    const auto &perm = candidates[idx];
    OrderingEstimate e = perm == identity ? study.baseline
                                          : detail::estimate_ordering(n, epsilon, perm, o.min_successes, seed, o, nullptr);
    if (e.mean_overlap > study.best.mean_overlap ||
        (e.mean_overlap == study.best.mean_overlap && e.permutation < study.best.permutation))
      study.best = std::move(e);
  }

  for (double eps : o.sensitivity_eps) {
    SensitivityRow row;
    row.epsilon = eps;
    row.baseline = detail::estimate_ordering(n, eps, identity, o.sensitivity_successes, seed, o, nullptr);
    row.best = detail::estimate_ordering(n, eps, study.best.permutation, o.sensitivity_successes, seed, o, nullptr);
    study.sensitivity.push_back(std::move(row));
  }
  return study;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepTarget {
  TargetKind kind = TargetKind::Fock;
  int n = 1;
  int mp = 0;  ///< mnm only; n is then m
};

struct SweepRow {
  std::string target;
  int n = 0;
  double transmission = 1.0;
  double eta = 1.0;
  std::string policy;
  double p_exact = 0.0;
  double p_mc = 0.0;
  double stderr_mc = 0.0;
  double mean_fidelity = 0.0;
  long long trials = 0;
  std::uint64_t seed = 0;
  double trunc_bound = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::uint64_t seed = 0;
  long long trials = 0;
};

struct SweepOptions {
  long long trials = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  DetectorModel detector;  ///< efficiency is overridden per row
  CavityModel cavity;      ///< transmission is overridden per row
};

inline ProtocolSpec sweep_spec(const SweepTarget &t, double transmission, double eta, const PumpPolicy &policy,
                               const SweepOptions &o) {
  ProtocolSpec s;
  switch (t.kind) {
    case TargetKind::Fock:
      s.target = Target::fock(t.n);
      break;
    case TargetKind::Noon:
      s.target = Target::noon(t.n);
      break;
    case TargetKind::MM:
      s.target = Target::mm(t.n, t.mp);
      break;
    case TargetKind::Subtract:
      throw ConfigError("targets", "sweeps support fock, noon and mm targets");
  }
  s.pump = policy;
  if (t.kind != TargetKind::Fock) s.pump.multi_add_allowed = false;
  s.detector = o.detector;
  s.detector.efficiency = eta;
  s.cavity = o.cavity;
  s.cavity.transmission = transmission;
  return s;
}

/// One row per (target, T, eta), in that nesting order.
inline SweepResult sweep(const std::vector<SweepTarget> &targets, const std::vector<double> &t_grid,
                         const std::vector<double> &eta_set, const PumpPolicy &policy, const SweepOptions &o) {
  if (targets.empty() || t_grid.empty() || eta_set.empty()) throw ConfigError("grid", "sweep grids must be non-empty");
  std::vector<ProtocolSpec> specs;
  for (const auto &t : targets)
    for (double tr : t_grid)
      for (double eta : eta_set) {
        specs.push_back(sweep_spec(t, tr, eta, policy, o));
        specs.back().validate();
      }
  SweepResult res;
  res.seed = o.seed;
  res.trials = o.trials;
  res.rows.resize(specs.size());
  parallel_for(specs.size(), o.threads, [&](std::size_t i) {
    const ProtocolSpec &s = specs[i];
    const ExactResult ex = exact_success(s);
    SampleOptions so;
    so.threads = 1;
    const SampleAggregate agg = sample(s, o.trials, o.seed, so);
    SweepRow &r = res.rows[i];
    r.target = to_string(s.target.kind);
    r.n = s.target.heralds_needed();
    r.transmission = s.cavity.transmission;
    r.eta = s.detector.efficiency;
    r.policy = s.pump.descriptor();
    r.p_exact = ex.success;
    r.p_mc = agg.success_rate;
    r.stderr_mc = agg.standard_error;
    r.mean_fidelity = agg.successes > 0 ? agg.mean_fidelity_given_success : 0.0;
    r.trials = agg.trials;
    r.seed = o.seed;
    r.trunc_bound = ex.truncation_bound;
  });
  return res;
}

}  // namespace photonloop
