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

// The cavity-loop state machine. Every pass applies round-trip loss to the
// stored photons, then the interaction (downconversion or weak beam splitter),
// then herald detection; the protocol rotates the cavity after each confirmed
// single addition and switches out once the heralded total reaches the target.
//
// The engine works in an internal frame in which the interaction axis is H.
// For targets built from a list of creation directions u_0..u_{N-1}, the
// internal state before addition k equals U(C(u_k))^dag applied to the logical
// state, where C(u) is a Jones unitary carrying H onto u. Adding an H photon
// therefore realizes factor u_k, the cavity rotation after that addition is
// C(u_{k+1})^dag C(u_k), and the switch-out optics apply C(u_{N-1}).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "photonloop/channels.hpp"
#include "photonloop/error.hpp"
#include "photonloop/fock_state.hpp"
#include "photonloop/pump_policy.hpp"
#include "photonloop/rng.hpp"

namespace photonloop {

enum class TargetKind { Fock, Noon, MM, Subtract };

inline std::string to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Fock:
      return "fock";
    case TargetKind::Noon:
      return "noon";
    case TargetKind::MM:
      return "mm";
    case TargetKind::Subtract:
      return "subtract";
  }
  return "?";
}

struct Target {
  TargetKind kind = TargetKind::Fock;
  int n = 1;  ///< photon number for Fock and N00N
  NoonVariant variant = NoonVariant::LinearHV;
  int m = 1, mp = 0;  ///< mnm occupations
  std::optional<PolarizedFockState> initial{};///< subtraction input (lab frame)
  int count = 1;                              ///< photons to subtract
  double reflectivity = 0.01;
  PolarizationCoefficients axis = PolarizationCoefficients::horizontal();  ///< subtraction axis

  static Target fock(int n) {
    Target t;
    t.n = n;
    return t;
  }
  static Target noon(int n, NoonVariant v = NoonVariant::LinearHV) {
    Target t;
    t.kind = TargetKind::Noon;
    t.n = n;
    t.variant = v;
    return t;
  }
  static Target mm(int m, int mp) {
    Target t;
    t.kind = TargetKind::MM;
    t.m = m;
    t.mp = mp;
    return t;
  }
  static Target subtract(PolarizedFockState initial, int count, double reflectivity,
                         PolarizationCoefficients axis = PolarizationCoefficients::horizontal()) {
    Target t;
    t.kind = TargetKind::Subtract;
    t.initial = std::move(initial);
    t.count = count;
    t.reflectivity = reflectivity;
    t.axis = axis;
    return t;
  }

  bool uses_spdc() const { return kind != TargetKind::Subtract; }
  /// Every loss, missed herald or dark count is a failure (no Fock exception).
  bool strict() const { return kind != TargetKind::Fock; }

  int heralds_needed() const {
    switch (kind) {
      case TargetKind::Fock:
      case TargetKind::Noon:
        return n;
      case TargetKind::MM:
        return m + mp;
      case TargetKind::Subtract:
        return count;
    }
    return 0;
  }
};

/// Full description of one protocol configuration.
struct ProtocolSpec {
  Target target;
  PumpPolicy pump;
  std::vector<int> ordering;  ///< order in which creation factors are realized; empty = identity
  DetectorModel detector;
  CavityModel cavity;
  PolarizationCoefficients pump_axis = PolarizationCoefficients::horizontal();
  int cutoff = 0;  ///< 0 = target photons + 2 for downconversion targets

  void validate() const {
    const int needed = target.heralds_needed();
    switch (target.kind) {
      case TargetKind::Fock:
      case TargetKind::Noon:
        if (target.n < 1) throw ConfigError("target.N", "photon number must be >= 1");
        break;
      case TargetKind::MM:
        if (target.mp < 0 || target.m <= target.mp) throw ConfigError("target.m", "mnm target needs m > m' >= 0");
        break;
      case TargetKind::Subtract: {
        if (!target.initial) throw ConfigError("target.initial", "subtraction needs an initial state");
        if (target.count < 1) throw ConfigError("target.count", "must subtract at least one photon");
        if (!(target.reflectivity > 0.0 && target.reflectivity <= 1.0))
          throw ConfigError("target.reflectivity", "reflectivity must lie in (0, 1]");
        const int top = target.initial->max_photon_number();
        if (top < target.count) throw ConfigError("target.count", "initial state holds fewer photons than requested");
        break;
      }
    }
    try {
      detector.validate();
    } catch (const ArgumentError &e) {
      throw ConfigError("detector", e.what());
    }
    try {
      cavity.validate();
    } catch (const ArgumentError &e) {
      throw ConfigError("cavity", e.what());
    }
    pump.validate();
    if (detector.mode == DetectorMode::Threshold && needed >= 2)
      throw ConfigError("detector.mode", "threshold detectors are only supported for single-photon targets");
    if (target.strict() && pump.multi_add_allowed)
      throw ConfigError("pump.multi_add", "multi-photon addition is only meaningful for Fock targets");
    if (!ordering.empty()) {
      if (target.kind != TargetKind::Noon && target.kind != TargetKind::MM)
        throw ConfigError("ordering", "orderings apply to N00N and mnm targets only");
      std::vector<bool> seen(static_cast<std::size_t>(needed), false);
      if (static_cast<int>(ordering.size()) != needed)
        throw ConfigError("ordering", "ordering must be a permutation of 0..N-1");
      for (int p : ordering) {
        if (p < 0 || p >= needed || seen[static_cast<std::size_t>(p)])
          throw ConfigError("ordering", "ordering must be a permutation of 0..N-1");
        seen[static_cast<std::size_t>(p)] = true;
      }
    }
    if (cutoff != 0 && cutoff < photon_capacity_floor())
      throw ConfigError("cutoff", "cutoff too small for the target");
    if (cavity.max_passes == 0 && interaction_rate_floor() <= 0.0)
      throw ConfigError("cavity.max_passes", "zero interaction strength requires an explicit max_passes");
  }

  int effective_cutoff() const {
    if (cutoff != 0) return cutoff;
    if (target.kind == TargetKind::Subtract) return target.initial->max_photon_number();
    return target.heralds_needed() + 2;
  }

  /// Explicit cap, or ceil(20 N / eps_min^2) (downconversion) and ceil(20 N / r) (subtraction).
  long long effective_max_passes() const {
    if (cavity.max_passes > 0) return cavity.max_passes;
    const double rate = interaction_rate_floor();
    return static_cast<long long>(std::ceil(20.0 * target.heralds_needed() / rate));
  }

  /// Logical creation factors in target order (downconversion targets).
  CreationSpec creation_spec() const {
    switch (target.kind) {
      case TargetKind::Fock:
        return CreationSpec(std::vector<PolarizationCoefficients>(static_cast<std::size_t>(target.n), pump_axis));
      case TargetKind::Noon:
        return noon_spec(target.n, target.variant);
      case TargetKind::MM:
        return mm_spec(target.m, target.mp);
      case TargetKind::Subtract:
        break;
    }
    throw ArgumentError("subtraction targets have no creation spec");
  }

  /// Directions in the order the photons are added.
  std::vector<PolarizationCoefficients> addition_directions() const {
    const CreationSpec spec = creation_spec();
    std::vector<PolarizationCoefficients> out;
    out.reserve(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k)
      out.push_back(spec[ordering.empty() ? k : static_cast<std::size_t>(ordering[k])]);
    return out;
  }

  /// The ideal output state in the lab frame.
  PolarizedFockState target_state() const {
    const int c = effective_cutoff();
    if (target.kind == TargetKind::MM) return mm_target(target.m, target.mp, c);
    if (target.kind == TargetKind::Subtract) {
      PolarizedFockState s = target.initial->with_cutoff(c);
      for (int k = 0; k < target.count; ++k) s = apply_annihilation(s, target.axis);
      if (s.squared_norm() == 0.0) throw ConfigError("target", "subtraction annihilates the initial state");
      s.normalize();
      return s;
    }
    return build_product_state(creation_spec(), c).state;
  }

 private:
  int photon_capacity_floor() const {
    if (target.kind == TargetKind::Subtract) return target.initial->max_photon_number();
    return target.heralds_needed();
  }
  double interaction_rate_floor() const {
    if (target.kind == TargetKind::Subtract) return target.reflectivity;
    const double e = pump.min_epsilon();
    return e * e;
  }
};

enum class TerminationReason { None, ReachedTarget, MaxPasses, Overshoot, Doomed, Capacity };

inline std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::None:
      return "running";
    case TerminationReason::ReachedTarget:
      return "reached-target";
    case TerminationReason::MaxPasses:
      return "max-passes";
    case TerminationReason::Overshoot:
      return "overshoot";
    case TerminationReason::Doomed:
      return "doomed";
    case TerminationReason::Capacity:
      return "capacity";
  }
  return "?";
}

struct PassOutcome {
  long long pass_index = 0;  ///< 1-based
  int pairs_true = 0;        ///< pairs created (or photons reflected, for subtraction)
  int pairs_detected = 0;    ///< of pairs_true, how many registered at the herald
  int dark_counts = 0;
  int pairs_announced = 0;
  int photons_lost = 0;
  bool rotation_applied = false;
  double epsilon_used = 0.0;

  bool is_null() const { return pairs_true == 0 && photons_lost == 0 && pairs_announced == 0 && dark_counts == 0; }
};

/// Per-trajectory mutable state. `true_total`, `undetected_total` and `dark_total`
/// are hidden bookkeeping used only for scoring.
struct EngineContext {
  PolarizedFockState cavity_state;
  int heralded_total = 0;
  int true_total = 0;
  int lost_total = 0;
  int undetected_total = 0;
  int dark_total = 0;
  long long pass_index = 0;
  std::vector<std::pair<long long, int>> photons_added_events{};
  TerminationReason reason = TerminationReason::None;

  bool terminated() const { return reason != TerminationReason::None; }
};

struct TrajectoryRecord {
  std::vector<PassOutcome> outcomes;  ///< non-null passes only; see expand_outcomes
  long long passes = 0;
  PolarizedFockState final_state{0};
  bool success = false;
  double fidelity_to_target = std::numeric_limits<double>::quiet_NaN();
  TerminationReason terminated_reason = TerminationReason::None;
  int heralded_total = 0;
  int true_total = 0;
  int lost_total = 0;
  int undetected_total = 0;
  int dark_total = 0;

  /// |<final|target>|, the square root of fidelity_to_target.
  double overlap() const { return std::sqrt(fidelity_to_target); }
};

/// Scores a finished record from its counters alone.
///
/// Downconversion targets other than Fock and subtraction require every event to
/// be heralded correctly with nothing lost. Fock targets succeed whenever the
/// cavity holds exactly N photons at the end, i.e. lost = true - heralded.
inline bool success_of(const TrajectoryRecord &r, const ProtocolSpec &spec) {
  if (r.terminated_reason != TerminationReason::ReachedTarget) return false;
  if (r.heralded_total != spec.target.heralds_needed()) return false;
  if (!spec.target.strict()) return r.lost_total == r.true_total - r.heralded_total;
  return r.lost_total == 0 && r.undetected_total == 0 && r.dark_total == 0;
}

inline double output_fidelity(const TrajectoryRecord &r, const ProtocolSpec &spec) {
  return fidelity(r.final_state, spec.target_state());
}

struct RunOptions {
  bool record_outcomes = false;
  /// Draw every pass individually instead of jumping over runs of null passes.
  bool stepwise = false;
};

/// Precomputed per-spec data; `run` and `step` are const and thread-safe.
class Engine {
 public:
  explicit Engine(ProtocolSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    cutoff_ = spec_.effective_cutoff();
    needed_ = spec_.target.heralds_needed();
    max_passes_ = spec_.effective_max_passes();
    target_state_ = spec_.target_state();
    const std::size_t size = PolarizedFockState::lattice_size(cutoff_);
    n_of_.resize(size);
    h_of_.resize(size);
    for (int n = 0; n <= cutoff_; ++n)
      for (int v = 0; v <= n; ++v) {
        n_of_[PolarizedFockState::index(n - v, v)] = n;
        h_of_[PolarizedFockState::index(n - v, v)] = n - v;
      }

    if (spec_.target.uses_spdc()) {
      const auto dirs = spec_.addition_directions();
      for (std::size_t k = 0; k + 1 < dirs.size(); ++k) {
        const JonesUnitary w =
            JonesUnitary::carrying_h_to(dirs[k + 1]).adjoint() * JonesUnitary::carrying_h_to(dirs[k]);
        rotations_.push_back(is_identity(w) ? std::nullopt : std::optional<InducedRotation>(std::in_place, w, cutoff_));
      }
      output_frame_ = JonesUnitary::carrying_h_to(dirs.back());
    } else {
      output_frame_ = JonesUnitary::carrying_h_to(spec_.target.axis);
    }
    output_rotation_.emplace(output_frame_, cutoff_);
  }

  const ProtocolSpec &spec() const { return spec_; }
  long long max_passes() const { return max_passes_; }
  int cutoff() const { return cutoff_; }
  const PolarizedFockState &target_state() const { return target_state_; }

  EngineContext initial_context() const {
    if (spec_.target.uses_spdc()) return EngineContext{vacuum(cutoff_)};
    PolarizedFockState s = spec_.target.initial->with_cutoff(cutoff_);
    InducedRotation(output_frame_.adjoint(), cutoff_).apply_inplace(s);
    s.normalize();
    return EngineContext{std::move(s)};
  }

  /// One pass drawn from its full outcome distribution.
  PassOutcome step(EngineContext &ctx, Rng &rng) const {
    if (ctx.terminated()) throw ArgumentError("trajectory already terminated");
    PassOutcome out;
    out.epsilon_used = current_epsilon(ctx);
    auto amps = ctx.cavity_state.mutable_amplitudes();
    out.photons_lost = sample_loss(amps, rng, false);
    sample_interaction_and_herald(amps, out, rng, /*exclude_null=*/false);
    resolve(ctx, out);
    return out;
  }

  TrajectoryRecord run(Rng &rng, const RunOptions &opts = {}) const {
    EngineContext ctx = initial_context();
    std::vector<PassOutcome> outcomes;
    while (!ctx.terminated()) {
      PassOutcome o = opts.stepwise ? step(ctx, rng) : skip_and_step(ctx, rng);
      if (opts.record_outcomes && (!o.is_null() || ctx.terminated()) && o.pass_index > 0) outcomes.push_back(o);
    }
    return finish(std::move(ctx), std::move(outcomes), rng);
  }

 private:
  static bool is_identity(const JonesUnitary &w) {
    return std::abs(w(0, 0) - 1.0) < 1e-14 && std::abs(w(1, 1) - 1.0) < 1e-14 && std::abs(w(0, 1)) < 1e-14 &&
           std::abs(w(1, 0)) < 1e-14;
  }

  double current_epsilon(const EngineContext &ctx) const {
    return spec_.target.uses_spdc() ? spec_.pump.epsilon_for(needed_ - ctx.heralded_total) : 0.0;
  }

  // Probability that a basis entry's photons all survive a round trip.
  double survive(int n) const {
    const double t = spec_.cavity.transmission;
    return n == 0 ? 1.0 : std::pow(t, n);
  }

  /// Null-pass amplitude factor for an entry: no loss, no interaction event.
  double null_amplitude(std::size_t i, double eps) const {
    const int n = n_of_[i], h = h_of_[i];
    const double loss = n == 0 ? 1.0 : std::pow(spec_.cavity.transmission, 0.5 * n);
    if (spec_.target.uses_spdc())
      return loss * SpdcInstrument::k0_factor(eps, h) / std::sqrt(SpdcInstrument::completion(eps, h));
    return loss * (h == 0 ? 1.0 : std::pow(1.0 - spec_.target.reflectivity, 0.5 * h));
  }

  // Returns photons lost; the state is left normalized.
  int sample_loss(std::span<Complex> amps, Rng &rng, bool exclude_no_loss) const {
    const double t = spec_.cavity.transmission;
    if (t == 1.0) return 0;
    int max_h = 0, max_v = 0;
    for (std::size_t i = 0; i < amps.size(); ++i)
      if (amps[i] != Complex(0.0)) {
        max_h = std::max(max_h, h_of_[i]);
        max_v = std::max(max_v, n_of_[i] - h_of_[i]);
      }
    const int cols = max_v + 1;
    std::vector<double> w(static_cast<std::size_t>((max_h + 1) * cols), 0.0);
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const double p = std::norm(amps[i]);
      if (p == 0.0) continue;
      const int h = h_of_[i], v = n_of_[i] - h;
      for (int lh = 0; lh <= h; ++lh) {
        const double fh = detail::damping_factor(h, lh, t, 1.0 - t);
        if (fh == 0.0) continue;
        for (int lv = 0; lv <= v; ++lv) {
          const double fv = detail::damping_factor(v, lv, t, 1.0 - t);
          w[static_cast<std::size_t>(lh * cols + lv)] += p * fh * fh * fv * fv;
        }
      }
    }
    if (exclude_no_loss) w[0] = 0.0;
    const std::size_t pick = rng.pick(w);
    const int lh = static_cast<int>(pick) / cols, lv = static_cast<int>(pick) % cols;
    if (lh == 0 && lv == 0 && !exclude_no_loss) {
      for (std::size_t i = 0; i < amps.size(); ++i)
        if (amps[i] != Complex(0.0)) amps[i] *= std::pow(t, 0.5 * n_of_[i]);
    } else {
      std::vector<Complex> next(amps.size(), 0.0);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if (amps[i] == Complex(0.0)) continue;
        const int h = h_of_[i], v = n_of_[i] - h;
        if (lh > h || lv > v) continue;
        const double f = detail::damping_factor(h, lh, t, 1.0 - t) * detail::damping_factor(v, lv, t, 1.0 - t);
        next[PolarizedFockState::index(h - lh, v - lv)] = amps[i] * f;
      }
      std::copy(next.begin(), next.end(), amps.begin());
    }
    normalize(amps);
    return lh + lv;
  }

  static void normalize(std::span<Complex> amps) {
    double acc = 0.0;
    for (const Complex &a : amps) acc += std::norm(a);
    const double inv = 1.0 / std::sqrt(acc);
    for (Complex &a : amps) a *= inv;
  }

  // Weights of k interaction events (pairs or reflected photons) on the current state.
  std::vector<double> interaction_weights(std::span<const Complex> amps, double eps) const {
    std::vector<double> w;
    if (spec_.target.uses_spdc()) {
      w.assign(eps > 0.0 ? 3 : 1, 0.0);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        for (std::size_t k = 0; k < w.size(); ++k)
          w[k] += p * SpdcInstrument::pair_weight(eps, h_of_[i], static_cast<int>(k));
      }
    } else {
      const double r = spec_.target.reflectivity;
      for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        const int h = h_of_[i];
        if (w.size() < static_cast<std::size_t>(h) + 1) w.resize(static_cast<std::size_t>(h) + 1, 0.0);
        for (int k = 0; k <= h; ++k) {
          const double f = detail::damping_factor(h, k, 1.0 - r, r);
          w[static_cast<std::size_t>(k)] += p * f * f;
        }
      }
      if (w.empty()) w.push_back(1.0);
    }
    return w;
  }

  // Applies interaction outcome k in place. Returns false on cutoff overflow.
  bool apply_interaction(std::span<Complex> amps, int k, double eps) const {
    if (spec_.target.uses_spdc()) {
      std::vector<Complex> next(amps.size(), 0.0);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if (amps[i] == Complex(0.0)) continue;
        const int h = h_of_[i], v = n_of_[i] - h;
        if (n_of_[i] + k > cutoff_) return false;
        const double inv_z = 1.0 / std::sqrt(SpdcInstrument::completion(eps, h));
        double f = 0.0;
        if (k == 0) f = SpdcInstrument::k0_factor(eps, h);
        else if (k == 1) f = -eps * std::sqrt(h + 1.0);
        else f = 0.5 * eps * eps * std::sqrt((h + 1.0) * (h + 2.0));
        next[PolarizedFockState::index(h + k, v)] = amps[i] * f * inv_z;
      }
      std::copy(next.begin(), next.end(), amps.begin());
    } else {
      const double r = spec_.target.reflectivity;
      std::vector<Complex> next(amps.size(), 0.0);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if (amps[i] == Complex(0.0)) continue;
        const int h = h_of_[i], v = n_of_[i] - h;
        if (k > h) continue;
        next[PolarizedFockState::index(h - k, v)] = amps[i] * detail::damping_factor(h, k, 1.0 - r, r);
      }
      std::copy(next.begin(), next.end(), amps.begin());
    }
    normalize(amps);
    return true;
  }

  int sample_poisson(double mean, Rng &rng, int at_least) const {
    if (mean == 0.0) return 0;
    // Inverse CDF restricted to [at_least, inf).
    double p = std::exp(-mean);
    double below = 0.0;
    int j = 0;
    for (; j < at_least; ++j) {
      below += p;
      p *= mean / (j + 1);
    }
    const double u = below + rng.uniform() * (1.0 - below);
    double acc = below;
    for (;; ++j) {
      acc += p;
      if (u < acc || p < 1e-300) return j;
      p *= mean / (j + 1);
    }
  }

  void sample_interaction_and_herald(std::span<Complex> amps, PassOutcome &out, Rng &rng, bool exclude_null) const {
    const double eps = out.epsilon_used;
    std::vector<double> w = interaction_weights(amps, eps);
    const double dark = spec_.detector.dark_rate;
    const double no_dark = std::exp(-dark);
    if (exclude_null) w[0] *= 1.0 - no_dark;
    const int k = static_cast<int>(rng.pick(w));
    out.pairs_true = k;
    if (!apply_interaction(amps, k, eps)) {
      out.pairs_announced = -1;  // flagged for resolve()
      return;
    }
    int detected = 0;
    for (int j = 0; j < k; ++j) detected += rng.uniform() < spec_.detector.efficiency ? 1 : 0;
    out.pairs_detected = detected;
    out.dark_counts = sample_poisson(dark, rng, (exclude_null && k == 0) ? 1 : 0);
    const int clicks = detected + out.dark_counts;
    out.pairs_announced = spec_.detector.mode == DetectorMode::Threshold ? (clicks > 0 ? 1 : 0) : clicks;
  }

  void resolve(EngineContext &ctx, PassOutcome &out) const {
    ctx.pass_index += 1;
    out.pass_index = ctx.pass_index;
    ctx.lost_total += out.photons_lost;
    if (out.pairs_announced < 0) {
      out.pairs_announced = 0;
      ctx.true_total += out.pairs_true;
      ctx.reason = TerminationReason::Capacity;
      return;
    }
    const int remaining = needed_ - ctx.heralded_total;
    const int announced = out.pairs_announced;
    ctx.true_total += out.pairs_true;
    ctx.undetected_total += out.pairs_true - out.pairs_detected;
    ctx.dark_total += out.dark_counts;
    ctx.heralded_total += announced;
    if (announced > 0) ctx.photons_added_events.emplace_back(ctx.pass_index, announced);

    const bool single_only = spec_.target.strict() || !spec_.pump.multi_add_allowed;
    const bool hidden_failure = spec_.target.strict() && (ctx.lost_total > 0 || ctx.undetected_total > 0 ||
                                                          ctx.dark_total > 0);
    if (announced > remaining || (single_only && announced >= 2)) {
      ctx.reason = TerminationReason::Overshoot;
    } else if (ctx.heralded_total == needed_) {
      ctx.reason = TerminationReason::ReachedTarget;
    } else if (hidden_failure) {
      ctx.reason = TerminationReason::Doomed;
    } else if (announced == 1 && spec_.target.uses_spdc()) {
      const auto &rot = rotations_[static_cast<std::size_t>(ctx.heralded_total - 1)];
      if (rot) {
        rot->apply_inplace(ctx.cavity_state);
        out.rotation_applied = true;
      }
    }
    if (!ctx.terminated() && ctx.pass_index >= max_passes_) ctx.reason = TerminationReason::MaxPasses;
  }

  /// Jumps over the run of null passes (exactly distributed), then draws the next
  /// non-null pass conditioned on being non-null.
  PassOutcome skip_and_step(EngineContext &ctx, Rng &rng) const {
    const double eps = current_epsilon(ctx);
    auto amps = ctx.cavity_state.mutable_amplitudes();
    const double null_herald = std::exp(-spec_.detector.dark_rate);
    const long long budget = max_passes_ - ctx.pass_index;

    std::vector<std::size_t> support;
    std::vector<double> pop, log_a2;
    std::vector<double> amp_factor;
    for (std::size_t i = 0; i < amps.size(); ++i) {
      if (amps[i] == Complex(0.0)) continue;
      const double a = null_amplitude(i, eps);
      support.push_back(i);
      pop.push_back(std::norm(amps[i]));
      amp_factor.push_back(a);
      log_a2.push_back(a == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(a * a * null_herald));
    }
    const auto survival = [&](long long m) {
      if (m == 0) return 1.0;
      double s = 0.0;
      for (std::size_t j = 0; j < pop.size(); ++j) s += pop[j] * std::exp(static_cast<double>(m) * log_a2[j]);
      return s;
    };
    const double u = rng.uniform();
    long long nulls;
    if (survival(budget) > u) {
      nulls = budget;
    } else {
      long long lo = 0, hi = budget;
      while (hi - lo > 1) {
        const long long mid = lo + (hi - lo) / 2;
        (survival(mid) > u ? lo : hi) = mid;
      }
      nulls = lo;
    }

    if (nulls > 0) {
      double max_log = -std::numeric_limits<double>::infinity();
      std::vector<double> logs(support.size());
      for (std::size_t j = 0; j < support.size(); ++j) {
        logs[j] = amp_factor[j] == 0.0 ? -std::numeric_limits<double>::infinity()
                                       : static_cast<double>(nulls) * std::log(std::abs(amp_factor[j]));
        max_log = std::max(max_log, logs[j]);
      }
      for (std::size_t j = 0; j < support.size(); ++j) {
        const double sign = (amp_factor[j] < 0.0 && nulls % 2 == 1) ? -1.0 : 1.0;
        amps[support[j]] *= sign * std::exp(logs[j] - max_log);
      }
      normalize(amps);
      ctx.pass_index += nulls;
    }
    if (nulls == budget) {
      ctx.reason = TerminationReason::MaxPasses;
      PassOutcome none;
      none.pass_index = ctx.pass_index;
      none.epsilon_used = eps;
      return none;
    }

    PassOutcome out;
    out.epsilon_used = eps;
    // Split the non-null event into "some loss" and "no loss, interaction or dark count".
    double p_keep = 0.0, p_quiet = 0.0;
    {
      std::vector<double> w;
      double keep_norm = 0.0;
      for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        const double kept = p * survive(n_of_[i]);
        keep_norm += kept;
        const double quiet = spec_.target.uses_spdc()
                                 ? SpdcInstrument::pair_weight(eps, h_of_[i], 0)
                                 : std::pow(1.0 - spec_.target.reflectivity, h_of_[i]);
        p_quiet += kept * quiet;
      }
      p_keep = keep_norm;
      p_quiet = keep_norm > 0.0 ? p_quiet / keep_norm * null_herald : 0.0;
    }
    const double p_null = p_keep * p_quiet;
    const double p_loss_given_event = (1.0 - p_keep) / (1.0 - p_null);
    if (rng.uniform() < p_loss_given_event) {
      out.photons_lost = sample_loss(amps, rng, true);
      sample_interaction_and_herald(amps, out, rng, false);
    } else {
      if (spec_.cavity.transmission != 1.0) {
        for (std::size_t i = 0; i < amps.size(); ++i)
          if (amps[i] != Complex(0.0)) amps[i] *= std::pow(spec_.cavity.transmission, 0.5 * n_of_[i]);
        normalize(amps);
      }
      sample_interaction_and_herald(amps, out, rng, true);
    }
    resolve(ctx, out);
    return out;
  }

  TrajectoryRecord finish(EngineContext ctx, std::vector<PassOutcome> outcomes, Rng &rng) const {
    TrajectoryRecord rec;
    rec.passes = ctx.pass_index;
    rec.terminated_reason = ctx.reason;
    if (ctx.reason == TerminationReason::ReachedTarget && spec_.cavity.t_out < 1.0 &&
        ctx.cavity_state.max_photon_number() > 0) {
      const double t = spec_.cavity.t_out;
      auto amps = ctx.cavity_state.mutable_amplitudes();
      // Switch-out loss, drawn like a round trip with transmission t_out.
      std::vector<OutcomeBranch> branches = apply_loss(ctx.cavity_state, t);
      std::vector<double> w;
      for (const auto &b : branches) w.push_back(b.weight);
      const auto &b = branches[rng.pick(w)];
      ctx.lost_total += b.label.lost_h + b.label.lost_v;
      std::copy(b.state.amplitudes().begin(), b.state.amplitudes().end(), amps.begin());
    }
    ctx.cavity_state.mark_normalized();
    output_rotation_->apply_inplace(ctx.cavity_state);
    rec.heralded_total = ctx.heralded_total;
    rec.true_total = ctx.true_total;
    rec.lost_total = ctx.lost_total;
    rec.undetected_total = ctx.undetected_total;
    rec.dark_total = ctx.dark_total;
    rec.outcomes = std::move(outcomes);
    rec.final_state = std::move(ctx.cavity_state);
    rec.success = success_of(rec, spec_);
    if (rec.final_state.squared_norm() > 0.0) rec.fidelity_to_target = fidelity(rec.final_state, target_state_);
    return rec;
  }

  ProtocolSpec spec_;
  int cutoff_ = 0;
  int needed_ = 0;
  long long max_passes_ = 0;
  PolarizedFockState target_state_{0};
  std::vector<int> n_of_, h_of_;
  std::vector<std::optional<InducedRotation>> rotations_;
  JonesUnitary output_frame_ = JonesUnitary::identity();
  std::optional<InducedRotation> output_rotation_;
};

/// Single pass from `ctx`, returning the outcome and the successor context.
inline std::pair<PassOutcome, EngineContext> run_pass(const EngineContext &ctx, const ProtocolSpec &spec, Rng &rng) {
  EngineContext next = ctx;
  PassOutcome out = Engine(spec).step(next, rng);
  return {out, std::move(next)};
}

/// One trajectory with the generator for stream `trial` of `seed`.
inline TrajectoryRecord run_protocol(const ProtocolSpec &spec, std::uint64_t seed, std::uint64_t trial = 0,
                                     const RunOptions &opts = {}) {
  Rng rng(seed, trial);
  return Engine(spec).run(rng, opts);
}

/// Every pass of a record, with the implied null passes filled in.
inline std::vector<PassOutcome> expand_outcomes(const TrajectoryRecord &rec, const ProtocolSpec &spec) {
  std::vector<PassOutcome> out;
  out.reserve(static_cast<std::size_t>(rec.passes));
  const int needed = spec.target.heralds_needed();
  int heralded = 0;
  std::size_t next = 0;
  for (long long p = 1; p <= rec.passes; ++p) {
    if (next < rec.outcomes.size() && rec.outcomes[next].pass_index == p) {
      out.push_back(rec.outcomes[next]);
      heralded += rec.outcomes[next].pairs_announced;
      ++next;
      continue;
    }
    PassOutcome o;
    o.pass_index = p;
    o.epsilon_used = spec.target.uses_spdc() ? spec.pump.epsilon_for(needed - heralded) : 0.0;
    out.push_back(o);
  }
  return out;
}

}  // namespace photonloop
