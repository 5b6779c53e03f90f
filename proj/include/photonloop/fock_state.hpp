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

// Two-polarization-mode bosonic Fock space: states on the triangular lattice
// n_H + n_V <= cutoff, ladder operators, induced polarization rotations and the
// target-state constructors (product states, N00N, mnm).

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "photonloop/error.hpp"

namespace photonloop {

using Complex = std::complex<double>;

inline constexpr double kUnitTolerance = 1e-12;
/// Largest supported photon-number cutoff; keeps factorial-based factors exact in double.
inline constexpr int kMaxCutoff = 64;

/// Creation direction alpha*a_H^dag + beta*a_V^dag. Must be a unit vector.
class PolarizationCoefficients {
 public:
  PolarizationCoefficients(Complex alpha, Complex beta) : alpha_(alpha), beta_(beta) {
    const double norm = std::norm(alpha) + std::norm(beta);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitTolerance) {
      throw ArgumentError("polarization coefficients must satisfy |alpha|^2 + |beta|^2 = 1, got " +
                          std::to_string(norm));
    }
  }

  static PolarizationCoefficients horizontal() { return {1.0, 0.0}; }
  static PolarizationCoefficients vertical() { return {0.0, 1.0}; }
  /// Linear polarization at `angle` radians from H.
  static PolarizationCoefficients linear(double angle) { return {std::cos(angle), std::sin(angle)}; }

  Complex alpha() const { return alpha_; }
  Complex beta() const { return beta_; }

  friend bool operator==(const PolarizationCoefficients &, const PolarizationCoefficients &) = default;

 private:
  Complex alpha_;
  Complex beta_;
};

/// Ordered product of creation directions, applied factor 0 first.
class CreationSpec {
 public:
  explicit CreationSpec(std::vector<PolarizationCoefficients> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ArgumentError("creation spec needs at least one factor");
  }

  std::size_t size() const { return factors_.size(); }
  const PolarizationCoefficients &operator[](std::size_t i) const { return factors_[i]; }
  auto begin() const { return factors_.begin(); }
  auto end() const { return factors_.end(); }
  const std::vector<PolarizationCoefficients> &factors() const { return factors_; }

 private:
  std::vector<PolarizationCoefficients> factors_;
};

/// 2x2 unitary on the (H, V) creation operators. Column j is the image of mode j:
/// a_H^dag -> u(0,0) a_H^dag + u(1,0) a_V^dag, a_V^dag -> u(0,1) a_H^dag + u(1,1) a_V^dag.
class JonesUnitary {
 public:
  JonesUnitary(Complex u00, Complex u01, Complex u10, Complex u11) : m_{u00, u01, u10, u11} {
    const JonesUnitary &self = *this;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        Complex acc = 0.0;
        for (int k = 0; k < 2; ++k) acc += self(r, k) * std::conj(self(c, k));
        const double expected = r == c ? 1.0 : 0.0;
        if (!(std::abs(acc - expected) <= kUnitTolerance)) {
          throw ArgumentError("Jones matrix is not unitary");
        }
      }
    }
  }

  static JonesUnitary identity() { return {1.0, 0.0, 0.0, 1.0}; }

  /// Physical rotation of linear polarization by `angle` (H -> cos H + sin V).
  static JonesUnitary rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c, -s, s, c};
  }

  /// Rotation about the +45 degree axis of the Poincare sphere (H -> cos H + i sin V).
  static JonesUnitary poincare45(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c, Complex(0.0, s), Complex(0.0, s), c};
  }

  /// Some unitary with first column equal to `dir`, so that it carries H onto `dir`.
  static JonesUnitary carrying_h_to(const PolarizationCoefficients &dir) {
    const Complex a = dir.alpha(), b = dir.beta();
    return {a, -std::conj(b), b, std::conj(a)};
  }

  /// Columns are the right/left circular modes, R = (H + iV)/sqrt2, L = (H - iV)/sqrt2.
  static JonesUnitary circular() {
    const double r = std::numbers::sqrt2 / 2.0;
    return {r, r, Complex(0.0, r), Complex(0.0, -r)};
  }

  /// Columns are the +45 / -45 degree linear modes.
  static JonesUnitary diagonal() {
    const double r = std::numbers::sqrt2 / 2.0;
    return {r, r, r, -r};
  }

  Complex operator()(int row, int col) const { return m_[static_cast<std::size_t>(2 * row + col)]; }

  JonesUnitary adjoint() const {
    const JonesUnitary &u = *this;
    return {std::conj(u(0, 0)), std::conj(u(1, 0)), std::conj(u(0, 1)), std::conj(u(1, 1))};
  }

  friend JonesUnitary operator*(const JonesUnitary &a, const JonesUnitary &b) {
    std::array<Complex, 4> r{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        r[static_cast<std::size_t>(2 * i + j)] = a(i, 0) * b(0, j) + a(i, 1) * b(1, j);
    return {r[0], r[1], r[2], r[3]};
  }

  /// Image of a creation direction under the mode transformation.
  PolarizationCoefficients apply(const PolarizationCoefficients &c) const {
    const JonesUnitary &u = *this;
    return {u(0, 0) * c.alpha() + u(0, 1) * c.beta(), u(1, 0) * c.alpha() + u(1, 1) * c.beta()};
  }

 private:
  std::array<Complex, 4> m_;
};

/// Pure state over occupation pairs (n_H, n_V) with n_H + n_V <= cutoff.
///
/// Amplitudes are stored densely, sector by sector: photon number n occupies
/// indices [n(n+1)/2, (n+1)(n+2)/2) ordered by n_V. Operations returning new
/// states are free functions; the mutators here exist for hot loops that own
/// their state.
class PolarizedFockState {
 public:
  explicit PolarizedFockState(int cutoff) : cutoff_(checked_cutoff(cutoff)), amp_(lattice_size(cutoff_)) {}

  static std::size_t lattice_size(int cutoff) {
    const auto c = static_cast<std::size_t>(cutoff);
    return (c + 1) * (c + 2) / 2;
  }
  static std::size_t sector_offset(int n) {
    const auto k = static_cast<std::size_t>(n);
    return k * (k + 1) / 2;
  }
  static std::size_t index(int n_h, int n_v) { return sector_offset(n_h + n_v) + static_cast<std::size_t>(n_v); }

  int cutoff() const { return cutoff_; }
  std::size_t size() const { return amp_.size(); }

  Complex amplitude(int n_h, int n_v) const {
    if (n_h < 0 || n_v < 0 || n_h + n_v > cutoff_) return 0.0;
    return amp_[index(n_h, n_v)];
  }
  Complex &at(int n_h, int n_v) {
    if (n_h < 0 || n_v < 0 || n_h + n_v > cutoff_) throw CapacityError("occupation outside cutoff");
    normalized_ = false;
    return amp_[index(n_h, n_v)];
  }

  std::span<const Complex> amplitudes() const { return amp_; }
  std::span<Complex> mutable_amplitudes() {
    normalized_ = false;
    return amp_;
  }

  double squared_norm() const {
    double acc = 0.0;
    for (const Complex &a : amp_) acc += std::norm(a);
    return acc;
  }
  bool is_normalized() const { return normalized_; }

  /// Highest photon number with a nonzero amplitude, or -1 for the zero vector.
  int max_photon_number() const {
    for (int n = cutoff_; n >= 0; --n)
      for (int v = 0; v <= n; ++v)
        if (amp_[index(n - v, v)] != Complex(0.0)) return n;
    return -1;
  }

  /// The total photon number when the support lies in a single sector.
  std::optional<int> definite_photon_number() const {
    std::optional<int> found;
    for (int n = 0; n <= cutoff_; ++n) {
      for (int v = 0; v <= n; ++v) {
        if (amp_[index(n - v, v)] != Complex(0.0)) {
          if (found && *found != n) return std::nullopt;
          found = n;
          break;
        }
      }
    }
    return found;
  }

  void scale(Complex factor) {
    for (Complex &a : amp_) a *= factor;
    normalized_ = false;
  }

  /// Rescales to unit norm and marks the state normalized. Returns the prior norm.
  double normalize() {
    const double norm = std::sqrt(squared_norm());
    if (norm == 0.0) throw UndefinedFidelityError("cannot normalize the zero vector");
    for (Complex &a : amp_) a /= norm;
    normalized_ = true;
    return norm;
  }

  void mark_normalized() { normalized_ = true; }

  /// Same amplitudes on a lattice with a different cutoff. Shrinking must not drop support.
  PolarizedFockState with_cutoff(int cutoff) const {
    PolarizedFockState out(cutoff);
    for (int n = 0; n <= cutoff_; ++n) {
      for (int v = 0; v <= n; ++v) {
        const Complex a = amp_[index(n - v, v)];
        if (a == Complex(0.0)) continue;
        if (n > cutoff) throw CapacityError("cutoff reduction would drop populated occupations");
        out.amp_[index(n - v, v)] = a;
      }
    }
    out.normalized_ = normalized_;
    return out;
  }

 private:
  static int checked_cutoff(int cutoff) {
    if (cutoff < 0) throw ArgumentError("cutoff must be non-negative");
    if (cutoff > kMaxCutoff) throw ArgumentError("cutoff exceeds " + std::to_string(kMaxCutoff));
    return cutoff;
  }

  int cutoff_;
  std::vector<Complex> amp_;
  bool normalized_ = false;
};

inline PolarizedFockState vacuum(int cutoff) {
  PolarizedFockState s(cutoff);
  s.at(0, 0) = 1.0;
  s.mark_normalized();
  return s;
}

/// Normalized occupation state |n_h, n_v>.
inline PolarizedFockState basis_state(int n_h, int n_v, int cutoff) {
  if (n_h < 0 || n_v < 0) throw ArgumentError("occupations must be non-negative");
  if (n_h + n_v > cutoff) throw CapacityError("occupation exceeds cutoff");
  PolarizedFockState s(cutoff);
  s.at(n_h, n_v) = 1.0;
  s.mark_normalized();
  return s;
}

/// (alpha a_H^dag + beta a_V^dag) s. Throws CapacityError instead of truncating.
inline PolarizedFockState apply_creation(const PolarizedFockState &s, const PolarizationCoefficients &c) {
  const int cutoff = s.cutoff();
  PolarizedFockState out(cutoff);
  for (int n = 0; n <= cutoff; ++n) {
    for (int v = 0; v <= n; ++v) {
      const int h = n - v;
      const Complex a = s.amplitude(h, v);
      if (a == Complex(0.0)) continue;
      if (n == cutoff) throw CapacityError("creation would exceed cutoff " + std::to_string(cutoff));
      out.at(h + 1, v) += c.alpha() * std::sqrt(static_cast<double>(h + 1)) * a;
      out.at(h, v + 1) += c.beta() * std::sqrt(static_cast<double>(v + 1)) * a;
    }
  }
  return out;
}

/// (conj(alpha) a_H + conj(beta) a_V) s. The vacuum maps to the zero vector.
inline PolarizedFockState apply_annihilation(const PolarizedFockState &s, const PolarizationCoefficients &c) {
  const int cutoff = s.cutoff();
  PolarizedFockState out(cutoff);
  for (int n = 1; n <= cutoff; ++n) {
    for (int v = 0; v <= n; ++v) {
      const int h = n - v;
      const Complex a = s.amplitude(h, v);
      if (a == Complex(0.0)) continue;
      if (h > 0) out.at(h - 1, v) += std::conj(c.alpha()) * std::sqrt(static_cast<double>(h)) * a;
      if (v > 0) out.at(h, v - 1) += std::conj(c.beta()) * std::sqrt(static_cast<double>(v)) * a;
    }
  }
  return out;
}

/// Fock-space representation of a Jones unitary, one dense block per photon-number sector.
///
/// Block n maps input index v (state |n-v, v>) to output index v'. Entries come from
/// expanding (u00 X + u10 Y)^h (u01 X + u11 Y)^v / sqrt(h! v!) and rescaling the
/// coefficient of X^a Y^b by sqrt(a! b!).
class InducedRotation {
 public:
  InducedRotation(const JonesUnitary &u, int max_photons) : max_photons_(max_photons) {
    if (max_photons < 0 || max_photons > kMaxCutoff) throw ArgumentError("invalid sector range");
    std::vector<double> log_fact(static_cast<std::size_t>(max_photons) + 1, 0.0);
    for (int k = 1; k <= max_photons; ++k) log_fact[static_cast<std::size_t>(k)] = std::lgamma(k + 1.0);

    blocks_.reserve(static_cast<std::size_t>(max_photons) + 1);
    for (int n = 0; n <= max_photons; ++n) {
      const auto dim = static_cast<std::size_t>(n + 1);
      std::vector<Complex> block(dim * dim, 0.0);
      for (int v = 0; v <= n; ++v) {
        const int h = n - v;
        // Polynomial coefficients indexed by the power of Y.
        const std::vector<Complex> ph = binomial_power(u(0, 0), u(1, 0), h);
        const std::vector<Complex> pv = binomial_power(u(0, 1), u(1, 1), v);
        const double in_scale = std::exp(-0.5 * (log_fact[static_cast<std::size_t>(h)] +
                                                 log_fact[static_cast<std::size_t>(v)]));
        for (int i = 0; i <= h; ++i) {
          for (int j = 0; j <= v; ++j) {
            const int b = i + j;
            const double out_scale = std::exp(0.5 * (log_fact[static_cast<std::size_t>(n - b)] +
                                                     log_fact[static_cast<std::size_t>(b)]));
            block[static_cast<std::size_t>(b) * dim + static_cast<std::size_t>(v)] +=
                ph[static_cast<std::size_t>(i)] * pv[static_cast<std::size_t>(j)] * in_scale * out_scale;
          }
        }
      }
      blocks_.push_back(std::move(block));
    }
  }

  int max_photons() const { return max_photons_; }

  /// Row-major (n+1)x(n+1) block for sector n.
  std::span<const Complex> block(int n) const { return blocks_[static_cast<std::size_t>(n)]; }

  void apply_inplace(PolarizedFockState &s) const {
    const int top = s.max_photon_number();
    if (top > max_photons_) throw CapacityError("rotation table does not cover the state's photon number");
    std::vector<Complex> scratch;
    auto amps = s.mutable_amplitudes();
    for (int n = 0; n <= top; ++n) {
      const auto dim = static_cast<std::size_t>(n + 1);
      const std::size_t off = PolarizedFockState::sector_offset(n);
      scratch.assign(dim, 0.0);
      const auto blk = block(n);
      for (std::size_t r = 0; r < dim; ++r) {
        Complex acc = 0.0;
        for (std::size_t c = 0; c < dim; ++c) acc += blk[r * dim + c] * amps[off + c];
        scratch[r] = acc;
      }
      for (std::size_t r = 0; r < dim; ++r) amps[off + r] = scratch[r];
    }
  }

 private:
  // (x X + y Y)^k, coefficient list by power of Y.
  static std::vector<Complex> binomial_power(Complex x, Complex y, int k) {
    std::vector<Complex> p{1.0};
    for (int step = 0; step < k; ++step) {
      std::vector<Complex> next(p.size() + 1, 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) {
        next[i] += p[i] * x;
        next[i + 1] += p[i] * y;
      }
      p = std::move(next);
    }
    return p;
  }

  int max_photons_;
  std::vector<std::vector<Complex>> blocks_;
};

/// Induced action of `u` on the Fock space; norm-preserving.
inline PolarizedFockState apply_rotation(const PolarizedFockState &s, const JonesUnitary &u) {
  PolarizedFockState out = s;
  const bool was_normalized = s.is_normalized();
  InducedRotation(u, s.cutoff()).apply_inplace(out);
  if (was_normalized) out.mark_normalized();
  return out;
}

/// <a|b>, zero-padding the smaller lattice.
inline Complex overlap(const PolarizedFockState &a, const PolarizedFockState &b) {
  const auto aa = a.amplitudes();
  const auto bb = b.amplitudes();
  const std::size_t common = std::min(aa.size(), bb.size());
  Complex acc = 0.0;
  for (std::size_t i = 0; i < common; ++i) acc += std::conj(aa[i]) * bb[i];
  return acc;
}

/// |<a|b>|^2 / (|a|^2 |b|^2).
inline double fidelity(const PolarizedFockState &a, const PolarizedFockState &b) {
  const double na = a.squared_norm(), nb = b.squared_norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedFidelityError("fidelity with a zero-norm state");
  return std::min(1.0, std::norm(overlap(a, b)) / (na * nb));
}

/// |<a|b>| / (|a| |b|), the square root of `fidelity`.
inline double amplitude_overlap(const PolarizedFockState &a, const PolarizedFockState &b) {
  return std::sqrt(fidelity(a, b));
}

struct ProductState {
  PolarizedFockState state;
  double prenormalization_norm;
};

/// Applies the factors of `spec` to the vacuum in order, then normalizes.
inline ProductState build_product_state(const CreationSpec &spec, int cutoff) {
  if (static_cast<int>(spec.size()) > cutoff) {
    throw CapacityError("creation spec of length " + std::to_string(spec.size()) + " exceeds cutoff " +
                        std::to_string(cutoff));
  }
  PolarizedFockState s = vacuum(cutoff);
  for (const auto &factor : spec) s = apply_creation(s, factor);
  const double norm = s.normalize();
  return {std::move(s), norm};
}

enum class NoonVariant { LinearHV, Diagonal45 };

inline std::string to_string(NoonVariant v) { return v == NoonVariant::LinearHV ? "linear-HV" : "diagonal-45"; }

/// Creation directions whose product is a N00N state: linear polarizations spaced by
/// pi/N (LinearHV), or the elliptical family cos + i sin (Diagonal45).
inline CreationSpec noon_spec(int n, NoonVariant variant = NoonVariant::LinearHV) {
  if (n < 1) throw ArgumentError("N00N photon number must be >= 1");
  std::vector<PolarizationCoefficients> factors;
  factors.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double angle = k * std::numbers::pi / n;
    const double c = std::cos(angle), s = std::sin(angle);
    if (variant == NoonVariant::LinearHV)
      factors.emplace_back(c, s);
    else
      factors.emplace_back(c, Complex(0.0, s));
  }
  return CreationSpec(std::move(factors));
}

/// Factorization of ((a_H^dag)^d + (a_V^dag)^d)(a_H^dag)^mp (a_V^dag)^mp with d = m - mp:
/// mp H photons, mp V photons, then the roots of x^d + 1 as elliptical directions.
inline CreationSpec mm_spec(int m, int mp) {
  if (mp < 0) throw ArgumentError("m' must be non-negative");
  if (m <= mp) throw ArgumentError("mnm state requires m > m'");
  std::vector<PolarizationCoefficients> factors;
  for (int k = 0; k < mp; ++k) factors.push_back(PolarizationCoefficients::horizontal());
  for (int k = 0; k < mp; ++k) factors.push_back(PolarizationCoefficients::vertical());
  const int d = m - mp;
  const double r = std::numbers::sqrt2 / 2.0;
  for (int j = 0; j < d; ++j) {
    const Complex root = std::polar(1.0, std::numbers::pi * (2 * j + 1) / d);
    factors.emplace_back(r, -root * r);
  }
  return CreationSpec(std::move(factors));
}

/// Normalized mnm target built directly from its defining polynomial.
inline PolarizedFockState mm_target(int m, int mp, int cutoff) {
  if (mp < 0) throw ArgumentError("m' must be non-negative");
  if (m <= mp) throw ArgumentError("mnm state requires m > m'");
  if (m + mp > cutoff) throw CapacityError("mnm state exceeds cutoff");
  PolarizedFockState s(cutoff);
  const auto fact = [](int k) { return std::tgamma(k + 1.0); };
  // (a_H^dag)^m (a_V^dag)^mp |0> = sqrt(m! mp!) |m, mp>.
  s.at(m, mp) = std::sqrt(fact(m) * fact(mp));
  s.at(mp, m) = std::sqrt(fact(m) * fact(mp));
  s.normalize();
  return s;
}

using NumberDistribution = std::map<std::pair<int, int>, double>;

/// Occupation probabilities in the mode basis whose creation operators are the columns of `basis`.
inline NumberDistribution number_distribution(const PolarizedFockState &s, const JonesUnitary &basis) {
  const double norm = s.squared_norm();
  if (std::abs(norm - 1.0) > 1e-10) throw ArgumentError("number_distribution needs a normalized state");
  const PolarizedFockState rotated = apply_rotation(s, basis.adjoint());
  NumberDistribution out;
  for (int n = 0; n <= s.cutoff(); ++n)
    for (int v = 0; v <= n; ++v) {
      const double p = std::norm(rotated.amplitude(n - v, v));
      if (p > 0.0) out[{n - v, v}] = p;
    }
  return out;
}

/// Relative phase arg(c(0,N) / c(N,0)) of a state in the given mode basis.
inline double branch_phase(const PolarizedFockState &s, const JonesUnitary &basis, int n) {
  const PolarizedFockState rotated = apply_rotation(s, basis.adjoint());
  return std::arg(rotated.amplitude(0, n) / rotated.amplitude(n, 0));
}

}  // namespace photonloop
