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

// Per-pass physical processes: the second-order downconversion interaction
// resolved by the signal outcome, round-trip loss, herald detection, in-cavity
// polarization rotation and weak-beam-splitter subtraction.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "photonloop/error.hpp"
#include "photonloop/fock_state.hpp"

namespace photonloop {

inline constexpr double kMaxEpsilon = 0.5;

struct SpdcCoupling {
  double epsilon = 0.0;
  PolarizationCoefficients pump_axis = PolarizationCoefficients::horizontal();

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= kMaxEpsilon))
      throw ArgumentError("epsilon must lie in [0, " + std::to_string(kMaxEpsilon) + "], got " +
                          std::to_string(epsilon));
  }
};

enum class DetectorMode { NumberResolving, Threshold };

inline std::string to_string(DetectorMode m) {
  return m == DetectorMode::NumberResolving ? "number-resolving" : "threshold";
}

struct DetectorModel {
  double efficiency = 1.0;
  DetectorMode mode = DetectorMode::NumberResolving;
  double dark_rate = 0.0;  ///< mean dark counts per pass (Poisson)

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw ArgumentError("detector efficiency must lie in [0, 1]");
    if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate)) throw ArgumentError("dark rate must be >= 0");
  }
};

struct CavityModel {
  double transmission = 1.0;  ///< per-photon round-trip survival probability
  double t_out = 1.0;         ///< switch-out transmission, applied once
  long long max_passes = 0;   ///< 0 selects the protocol default

  void validate() const {
    if (!(transmission >= 0.0 && transmission <= 1.0)) throw ArgumentError("transmission must lie in [0, 1]");
    if (!(t_out >= 0.0 && t_out <= 1.0)) throw ArgumentError("t_out must lie in [0, 1]");
    if (max_passes < 0) throw ArgumentError("max_passes must be >= 1 (or 0 for the default)");
  }
};

struct BranchLabel {
  int pairs = 0;
  int lost_h = 0;
  int lost_v = 0;
  int reflected = 0;

  friend bool operator==(const BranchLabel &, const BranchLabel &) = default;
};

/// One outcome of a channel: probability weight and the conditionally normalized state.
struct OutcomeBranch {
  BranchLabel label;
  double weight;
  PolarizedFockState state;
};

namespace detail {

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// sqrt(C(n,k) keep^(n-k) drop^k), the amplitude-damping Kraus factor; exact zero when it vanishes.
inline double damping_factor(int n, int k, double keep, double drop) {
  if (k < 0 || k > n) return 0.0;
  if (n - k > 0 && keep == 0.0) return 0.0;
  if (k > 0 && drop == 0.0) return 0.0;
  double log_amp = 0.5 * log_binomial(n, k);
  if (n - k > 0) log_amp += 0.5 * (n - k) * std::log(keep);
  if (k > 0) log_amp += 0.5 * k * std::log(drop);
  return std::exp(log_amp);
}

inline std::vector<OutcomeBranch> finalize_branches(std::vector<OutcomeBranch> raw, double input_norm) {
  std::vector<OutcomeBranch> out;
  for (auto &b : raw) {
    const double w = b.state.squared_norm();
    if (w == 0.0) continue;
    b.weight = w / input_norm;
    b.state.normalize();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

/// Downconversion interaction truncated at second order in epsilon, resolved on
/// the number of signal photons:
///   K0 = 1 - (eps^2/2) a_p a_p^dag,   K1 = -eps a_p^dag,   K2 = (eps^2/2) (a_p^dag)^2.
///
/// The raw operators do not sum to the identity (sum K_i^dag K_i = Z, diagonal in
/// n_p). `branches` uses the completed instrument K_i Z^{-1/2}, which makes the
/// outcome probabilities exactly normalized and linear in the state.
class SpdcInstrument {
 public:
  explicit SpdcInstrument(SpdcCoupling coupling)
      : coupling_(coupling),
        to_pump_(JonesUnitary::carrying_h_to(coupling.pump_axis)),
        pump_is_h_(coupling.pump_axis == PolarizationCoefficients::horizontal()) {
    coupling_.validate();
  }

  const SpdcCoupling &coupling() const { return coupling_; }
  double epsilon() const { return coupling_.epsilon; }

  /// Raw no-pair diagonal 1 - (eps^2/2)(n_p + 1).
  static double k0_factor(double eps, int n_p) { return 1.0 - 0.5 * eps * eps * (n_p + 1); }
  /// Diagonal of Z for n_p photons in the pump mode.
  static double completion(double eps, int n_p) {
    const double e2 = eps * eps;
    const double k0 = k0_factor(eps, n_p);
    return k0 * k0 + e2 * (n_p + 1) + 0.25 * e2 * e2 * (n_p + 1) * (n_p + 2);
  }
  /// Weight of k pairs for an occupation state with n_p pump-mode photons.
  static double pair_weight(double eps, int n_p, int k) {
    const double e2 = eps * eps;
    const double z = completion(eps, n_p);
    switch (k) {
      case 0: {
        const double k0 = k0_factor(eps, n_p);
        return k0 * k0 / z;
      }
      case 1:
        return e2 * (n_p + 1) / z;
      case 2:
        return 0.25 * e2 * e2 * (n_p + 1) * (n_p + 2) / z;
      default:
        return 0.0;
    }
  }

  PolarizedFockState k0(const PolarizedFockState &s) const {
    return in_pump_frame(s, [&](PolarizedFockState &t) { scale_diagonal(t, [&](int n_p) { return k0_factor(eps(), n_p); }); });
  }
  PolarizedFockState k1(const PolarizedFockState &s) const {
    PolarizedFockState out = apply_creation(s, coupling_.pump_axis);
    out.scale(-eps());
    return out;
  }
  PolarizedFockState k2(const PolarizedFockState &s) const {
    PolarizedFockState out = apply_creation(apply_creation(s, coupling_.pump_axis), coupling_.pump_axis);
    out.scale(0.5 * eps() * eps());
    return out;
  }

  /// Applies the raw operator for `pairs` in {0, 1, 2}.
  PolarizedFockState apply(const PolarizedFockState &s, int pairs) const {
    switch (pairs) {
      case 0:
        return k0(s);
      case 1:
        return k1(s);
      case 2:
        return k2(s);
      default:
        throw ArgumentError("the second-order interaction creates at most two pairs");
    }
  }

  /// Exhaustive outcome resolution with completed weights. Throws CapacityError
  /// when a populated outcome would exceed the cutoff.
  std::vector<OutcomeBranch> branches(const PolarizedFockState &s) const {
    const double norm = s.squared_norm();
    if (norm == 0.0) throw ArgumentError("cannot resolve outcomes of the zero vector");
    const PolarizedFockState pre = in_pump_frame(
        s, [&](PolarizedFockState &t) { scale_diagonal(t, [&](int n_p) { return 1.0 / std::sqrt(completion(eps(), n_p)); }); });
    std::vector<OutcomeBranch> raw;
    for (int k = 0; k <= 2; ++k) {
      if (k > 0 && eps() == 0.0) continue;
      raw.push_back({BranchLabel{.pairs = k}, 0.0, apply(pre, k)});
    }
    return detail::finalize_branches(std::move(raw), norm);
  }

 private:
  double eps() const { return coupling_.epsilon; }

  template <class Fn>
  static void scale_diagonal(PolarizedFockState &t, Fn factor_of_np) {
    auto amps = t.mutable_amplitudes();
    for (int n = 0; n <= t.cutoff(); ++n)
      for (int v = 0; v <= n; ++v) amps[PolarizedFockState::index(n - v, v)] *= factor_of_np(n - v);
  }

  template <class Fn>
  PolarizedFockState in_pump_frame(const PolarizedFockState &s, Fn op) const {
    if (pump_is_h_) {
      PolarizedFockState t = s;
      op(t);
      return t;
    }
    PolarizedFockState t = apply_rotation(s, to_pump_.adjoint());
    op(t);
    return apply_rotation(t, to_pump_);
  }

  SpdcCoupling coupling_;
  JonesUnitary to_pump_;
  bool pump_is_h_;
};

/// Polarization-independent loss: each photon survives with probability T.
/// Branches are indexed by (lost_h, lost_v).
inline std::vector<OutcomeBranch> apply_loss(const PolarizedFockState &s, double transmission) {
  if (!(transmission >= 0.0 && transmission <= 1.0)) throw ArgumentError("transmission must lie in [0, 1]");
  const double norm = s.squared_norm();
  if (norm == 0.0) throw ArgumentError("cannot resolve loss on the zero vector");
  const int cutoff = s.cutoff();
  const double drop = 1.0 - transmission;
  std::vector<OutcomeBranch> raw;
  for (int lh = 0; lh <= cutoff; ++lh) {
    for (int lv = 0; lh + lv <= cutoff; ++lv) {
      PolarizedFockState out(cutoff);
      bool any = false;
      for (int n = lh + lv; n <= cutoff; ++n) {
        for (int v = lv; v <= n - lh; ++v) {
          const int h = n - v;
          const Complex a = s.amplitude(h, v);
          if (a == Complex(0.0)) continue;
          const double f = detail::damping_factor(h, lh, transmission, drop) *
                           detail::damping_factor(v, lv, transmission, drop);
          if (f == 0.0) continue;
          out.at(h - lh, v - lv) = a * f;
          any = true;
        }
      }
      if (any) raw.push_back({BranchLabel{.lost_h = lh, .lost_v = lv}, 0.0, std::move(out)});
    }
  }
  return detail::finalize_branches(std::move(raw), norm);
}

/// Probability of each announced count (index) given `true_pairs` photons at the
/// detector. Number-resolving: Binomial(true_pairs, eta) plus Poisson(dark).
/// Threshold: index 0 = no click, index 1 = click.
inline std::vector<double> herald_distribution(int true_pairs, const DetectorModel &d) {
  if (true_pairs < 0) throw ArgumentError("true pair count must be non-negative");
  d.validate();
  const double eta = d.efficiency;
  const double no_dark = std::exp(-d.dark_rate);
  if (d.mode == DetectorMode::Threshold) {
    const double silent = std::pow(1.0 - eta, true_pairs) * no_dark;
    return {silent, 1.0 - silent};
  }
  std::vector<double> detected(static_cast<std::size_t>(true_pairs) + 1, 0.0);
  for (int k = 0; k <= true_pairs; ++k) {
    const double amp = detail::damping_factor(true_pairs, k, 1.0 - eta, eta);
    detected[static_cast<std::size_t>(k)] = amp * amp;
  }
  if (d.dark_rate == 0.0) return detected;

  std::vector<double> dark;
  double term = no_dark, acc = 0.0;
  for (int j = 0; acc < 1.0 - 1e-16 && j < 1000; ++j) {
    dark.push_back(term);
    acc += term;
    term *= d.dark_rate / (j + 1);
  }
  dark.back() += 1.0 - acc;
  std::vector<double> out(detected.size() + dark.size() - 1, 0.0);
  for (std::size_t i = 0; i < detected.size(); ++i)
    for (std::size_t j = 0; j < dark.size(); ++j) out[i + j] += detected[i] * dark[j];
  return out;
}

enum class RotationVariant { Linear, Poincare45 };

inline JonesUnitary cavity_rotation(double angle, RotationVariant variant) {
  return variant == RotationVariant::Linear ? JonesUnitary::rotation(angle) : JonesUnitary::poincare45(angle);
}

/// Rotates every photon in the cavity: a physical rotation by `angle`, or the
/// rotation about the 45 degree axis of the Poincare sphere.
inline PolarizedFockState rotate_cavity(const PolarizedFockState &s, double angle, RotationVariant variant) {
  return apply_rotation(s, cavity_rotation(angle, variant));
}

/// Weak beam splitter on `axis` with reflectivity r. Branch `reflected` = k carries
/// the amplitude-damping Kraus factor sqrt(C(n,k) r^k (1-r)^(n-k)); k = 0 is no-click.
inline std::vector<OutcomeBranch> subtract_attempt(const PolarizedFockState &s, double reflectivity,
                                                   const PolarizationCoefficients &axis =
                                                       PolarizationCoefficients::horizontal()) {
  if (!(reflectivity >= 0.0 && reflectivity <= 1.0)) throw ArgumentError("reflectivity must lie in [0, 1]");
  const double norm = s.squared_norm();
  if (norm == 0.0) throw ArgumentError("cannot resolve subtraction on the zero vector");
  const JonesUnitary frame = JonesUnitary::carrying_h_to(axis);
  const bool is_h = axis == PolarizationCoefficients::horizontal();
  const PolarizedFockState in = is_h ? s : apply_rotation(s, frame.adjoint());
  const int cutoff = s.cutoff();
  std::vector<OutcomeBranch> raw;
  for (int k = 0; k <= cutoff; ++k) {
    PolarizedFockState out(cutoff);
    bool any = false;
    for (int n = k; n <= cutoff; ++n) {
      for (int v = 0; v <= n - k; ++v) {
        const int h = n - v;
        const Complex a = in.amplitude(h, v);
        if (a == Complex(0.0)) continue;
        const double f = detail::damping_factor(h, k, 1.0 - reflectivity, reflectivity);
        if (f == 0.0) continue;
        out.at(h - k, v) = a * f;
        any = true;
      }
    }
    if (!any) continue;
    raw.push_back({BranchLabel{.reflected = k}, 0.0, is_h ? std::move(out) : apply_rotation(out, frame)});
  }
  return detail::finalize_branches(std::move(raw), norm);
}

}  // namespace photonloop
