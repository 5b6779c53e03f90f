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

// Deterministic success probabilities under the same pass model as the engine.
//
// Fock targets keep the cavity in |c, 0> of the pump frame, so a recursion over
// (heralded, in-cavity) counts is exact. Targets that forbid every loss and
// every misheralded event stay inside a single photon-number sector between
// additions; there the solver carries one small density matrix per sector,
// which also yields the exact mean fidelity of the produced state.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "photonloop/channels.hpp"
#include "photonloop/error.hpp"
#include "photonloop/fock_state.hpp"
#include "photonloop/protocol.hpp"

namespace photonloop {

struct ExactResult {
  double success = 0.0;
  double failure = 0.0;
  /// Transient mass left when the recursion stopped early; the true success
  /// probability lies in [success, success + truncation_bound].
  double truncation_bound = 0.0;
  double mean_passes = 0.0;
  /// Mean fidelity to the target conditioned on success.
  double mean_fidelity = 1.0;
  long long passes_evaluated = 0;
};

namespace detail {

inline constexpr double kTransientFloor = 1e-15;

inline double binomial_pmf(int n, int k, double p) {
  const double a = damping_factor(n, k, 1.0 - p, p);
  return a * a;
}

}  // namespace detail

/// Fock target, one count recursion per pass.
inline ExactResult fock_success_exact(const ProtocolSpec &spec) {
  spec.validate();
  if (spec.target.kind != TargetKind::Fock) throw ArgumentError("fock_success_exact needs a Fock target");
  const int n_target = spec.target.n;
  const int cutoff = spec.effective_cutoff();
  const long long max_passes = spec.effective_max_passes();
  const double t = spec.cavity.transmission;
  const bool multi = spec.pump.multi_add_allowed;

  // Herald distributions for 0..2 true pairs; independent of the pass.
  std::vector<std::vector<double>> herald(3);
  for (int k = 0; k < 3; ++k) herald[static_cast<std::size_t>(k)] = herald_distribution(k, spec.detector);

  // Loss kernel keep[c][s]: s of c photons survive.
  std::vector<std::vector<double>> keep(static_cast<std::size_t>(cutoff) + 1);
  for (int c = 0; c <= cutoff; ++c) {
    keep[static_cast<std::size_t>(c)].resize(static_cast<std::size_t>(c) + 1);
    for (int s = 0; s <= c; ++s) keep[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)] = detail::binomial_pmf(c, s, t);
  }
  const auto switch_out_ok = [&](int c) {
    return c < n_target ? 0.0 : detail::binomial_pmf(c, n_target, spec.cavity.t_out);
  };

  const auto rows = static_cast<std::size_t>(n_target);
  const auto cols = static_cast<std::size_t>(cutoff) + 1;
  std::vector<double> mass(rows * cols, 0.0), next(rows * cols, 0.0);
  mass[0] = 1.0;

  ExactResult r;
  double alive = 1.0;
  long long pass = 0;
  while (pass < max_passes && alive >= detail::kTransientFloor) {
    r.mean_passes += alive;
    std::fill(next.begin(), next.end(), 0.0);
    for (int h = 0; h < n_target; ++h) {
      const int remaining = n_target - h;
      const double eps = spec.pump.epsilon_for(remaining);
      for (int c = 0; c <= cutoff; ++c) {
        const double m = mass[static_cast<std::size_t>(h) * cols + static_cast<std::size_t>(c)];
        if (m == 0.0) continue;
        for (int s = 0; s <= c; ++s) {
          const double ms = m * keep[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
          if (ms == 0.0) continue;
          for (int k = 0; k <= 2; ++k) {
            const double mk = ms * SpdcInstrument::pair_weight(eps, s, k);
            if (mk == 0.0) continue;
            if (s + k > cutoff) {
              r.failure += mk;
              continue;
            }
            const auto &hd = herald[static_cast<std::size_t>(k)];
            for (std::size_t a = 0; a < hd.size(); ++a) {
              const double ma = mk * hd[a];
              if (ma == 0.0) continue;
              const int ai = static_cast<int>(a);
              if (ai > remaining || (!multi && ai >= 2)) {
                r.failure += ma;
              } else if (ai == remaining) {
                const double ok = switch_out_ok(s + k);
                r.success += ma * ok;
                r.failure += ma * (1.0 - ok);
              } else {
                next[static_cast<std::size_t>(h + ai) * cols + static_cast<std::size_t>(s + k)] += ma;
              }
            }
          }
        }
      }
    }
    mass.swap(next);
    ++pass;
    alive = 0.0;
    for (double m : mass) alive += m;
  }
  if (pass >= max_passes) {
    r.failure += alive;
  } else {
    r.truncation_bound = alive;
  }
  r.passes_evaluated = pass;
  r.mean_fidelity = 1.0;
  return r;
}

/// Targets that require every event to be perfect (N00N and mnm).
///
/// Between additions the cavity holds exactly k photons, so the unnormalized
/// state conditioned on "nothing went wrong yet" is a (k+1)x(k+1) density
/// matrix over the V occupation in the internal frame.
inline ExactResult noon_success_exact(const ProtocolSpec &spec) {
  spec.validate();
  if (spec.target.kind != TargetKind::Noon && spec.target.kind != TargetKind::MM)
    throw ArgumentError("noon_success_exact needs a N00N or mnm target");
  const int n_target = spec.target.heralds_needed();
  const int cutoff = spec.effective_cutoff();
  const long long max_passes = spec.effective_max_passes();
  const double t = spec.cavity.transmission;
  const double eta = spec.detector.efficiency;
  const double no_dark = std::exp(-spec.detector.dark_rate);
  const double t_out_all = std::pow(spec.cavity.t_out, n_target);
  // Threshold detection only arises with a single-photon target, where a click
  // from a real pair and no dark count is exactly the success event.

  const auto dirs = spec.addition_directions();
  std::vector<InducedRotation> rotations;
  for (std::size_t k = 0; k + 1 < dirs.size(); ++k)
    rotations.emplace_back(JonesUnitary::carrying_h_to(dirs[k + 1]).adjoint() * JonesUnitary::carrying_h_to(dirs[k]),
                           cutoff);
  const InducedRotation out_rot(JonesUnitary::carrying_h_to(dirs.back()), cutoff);
  const PolarizedFockState target = spec.target_state();
  // Target expressed in the internal frame, restricted to sector N.
  std::vector<Complex> target_internal(static_cast<std::size_t>(n_target) + 1, 0.0);
  {
    const auto blk = out_rot.block(n_target);
    const auto dim = static_cast<std::size_t>(n_target) + 1;
    const std::size_t off = PolarizedFockState::sector_offset(n_target);
    // internal = block^dag * lab
    for (std::size_t c = 0; c < dim; ++c) {
      Complex acc = 0.0;
      for (std::size_t r = 0; r < dim; ++r) acc += std::conj(blk[r * dim + c]) * target.amplitudes()[off + r];
      target_internal[c] = acc;
    }
  }

  using Matrix = std::vector<Complex>;  // row-major, sector k has dim k+1
  std::vector<Matrix> rho(static_cast<std::size_t>(n_target));
  for (int k = 0; k < n_target; ++k)
    rho[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>((k + 1) * (k + 1)), 0.0);
  rho[0][0] = 1.0;

  std::vector<Matrix> next = rho;
  ExactResult r;
  double fid_mass = 0.0;
  double alive = 1.0;
  long long pass = 0;
  Matrix grown, rotated;
  while (pass < max_passes && alive >= detail::kTransientFloor) {
    r.mean_passes += alive;
    for (auto &m : next) std::fill(m.begin(), m.end(), Complex(0.0));
    for (int k = 0; k < n_target; ++k) {
      const Matrix &cur = rho[static_cast<std::size_t>(k)];
      const auto dim = static_cast<std::size_t>(k) + 1;
      const double eps = spec.pump.epsilon_for(n_target - k);
      const double survive = std::pow(t, k) * no_dark;
      std::vector<double> c0(dim), c1(dim);
      for (std::size_t v = 0; v < dim; ++v) {
        const int h = k - static_cast<int>(v);
        const double inv_z = 1.0 / std::sqrt(SpdcInstrument::completion(eps, h));
        c0[v] = SpdcInstrument::k0_factor(eps, h) * inv_z;
        c1[v] = -eps * std::sqrt(h + 1.0) * inv_z;
      }
      Matrix &stay = next[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) stay[i * dim + j] += survive * c0[i] * c0[j] * cur[i * dim + j];

      // Single pair, detected: grow to sector k+1 (V index unchanged), then rotate.
      const auto gdim = dim + 1;
      grown.assign(gdim * gdim, 0.0);
      const double w = survive * eta;
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) grown[i * gdim + j] = w * c1[i] * c1[j] * cur[i * dim + j];
      if (k + 1 < n_target) {
        const auto blk = rotations[static_cast<std::size_t>(k)].block(k + 1);
        rotated.assign(gdim * gdim, 0.0);
        Matrix tmp(gdim * gdim, 0.0);
        for (std::size_t i = 0; i < gdim; ++i)
          for (std::size_t j = 0; j < gdim; ++j) {
            Complex acc = 0.0;
            for (std::size_t l = 0; l < gdim; ++l) acc += blk[i * gdim + l] * grown[l * gdim + j];
            tmp[i * gdim + j] = acc;
          }
        for (std::size_t i = 0; i < gdim; ++i)
          for (std::size_t j = 0; j < gdim; ++j) {
            Complex acc = 0.0;
            for (std::size_t l = 0; l < gdim; ++l) acc += tmp[i * gdim + l] * std::conj(blk[j * gdim + l]);
            rotated[i * gdim + j] = acc;
          }
        Matrix &up = next[static_cast<std::size_t>(k) + 1];
        for (std::size_t i = 0; i < gdim * gdim; ++i) up[i] += rotated[i];
      } else {
        double tr = 0.0;
        Complex f = 0.0;
        for (std::size_t i = 0; i < gdim; ++i) {
          tr += grown[i * gdim + i].real();
          for (std::size_t j = 0; j < gdim; ++j)
            f += std::conj(target_internal[i]) * grown[i * gdim + j] * target_internal[j];
        }
        r.success += tr * t_out_all;
        fid_mass += f.real() * t_out_all;
      }
    }
    rho.swap(next);
    ++pass;
    alive = 0.0;
    for (int k = 0; k < n_target; ++k) {
      const auto dim = static_cast<std::size_t>(k) + 1;
      for (std::size_t i = 0; i < dim; ++i) alive += rho[static_cast<std::size_t>(k)][i * dim + i].real();
    }
  }
  if (pass >= max_passes) r.failure = 1.0 - r.success;
  else {
    r.truncation_bound = alive;
    r.failure = 1.0 - r.success - alive;
  }
  r.passes_evaluated = pass;
  r.mean_fidelity = r.success > 0.0 ? fid_mass / r.success : 0.0;
  return r;
}

/// Dispatches on the target kind.
inline ExactResult exact_success(const ProtocolSpec &spec) {
  switch (spec.target.kind) {
    case TargetKind::Fock:
      return fock_success_exact(spec);
    case TargetKind::Noon:
    case TargetKind::MM:
      return noon_success_exact(spec);
    case TargetKind::Subtract:
      break;
  }
  throw ArgumentError("no exact solver for subtraction targets");
}

/// Expected terminating pass index.
inline double mean_passes(const ProtocolSpec &spec) { return exact_success(spec).mean_passes; }

}  // namespace photonloop
