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

// Seeded Monte Carlo over whole trajectories. Trial i always uses the
// generator for stream i of the seed, and trials are reduced in fixed-size
// blocks combined in block order, so results do not depend on the thread count.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "photonloop/error.hpp"
#include "photonloop/parallel.hpp"
#include "photonloop/protocol.hpp"
#include "photonloop/rng.hpp"

namespace photonloop {

/// Which fidelity figure to aggregate: |<psi|target>|^2 or |<psi|target>|.
enum class FidelityMeasure { Squared, Amplitude };

struct SampleOptions {
  unsigned threads = 0;  ///< 0 = hardware concurrency
  FidelityMeasure measure = FidelityMeasure::Squared;
  bool keep_fidelities = false;  ///< retain per-success values (in trial order)
  bool stepwise = false;         ///< disable null-pass skipping
};

struct SampleAggregate {
  long long trials = 0;
  long long successes = 0;
  double success_rate = 0.0;
  double standard_error = 0.0;
  double mean_fidelity_given_success = std::numeric_limits<double>::quiet_NaN();
  double fidelity_variance = std::numeric_limits<double>::quiet_NaN();
  double mean_passes = 0.0;
  double passes_standard_error = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> fidelities;

  /// Standard error of the conditional mean fidelity.
  double fidelity_standard_error() const {
    return successes > 1 ? std::sqrt(fidelity_variance / static_cast<double>(successes)) : 0.0;
  }
};

namespace detail {

inline constexpr long long kSampleBlock = 256;

struct BlockSums {
  long long successes = 0;
  double fid = 0.0, fid2 = 0.0;
  double passes = 0.0, passes2 = 0.0;
  std::vector<double> fidelities;
};

inline double measured(double fidelity, FidelityMeasure m) {
  return m == FidelityMeasure::Squared ? fidelity : std::sqrt(fidelity);
}

}  // namespace detail

inline SampleAggregate sample(const Engine &engine, long long trials, std::uint64_t seed,
                              const SampleOptions &opts = {}) {
  if (trials < 1) throw ArgumentError("trials must be >= 1");
  const long long blocks = (trials + detail::kSampleBlock - 1) / detail::kSampleBlock;
  std::vector<detail::BlockSums> sums(static_cast<std::size_t>(blocks));
  const RunOptions run_opts{.record_outcomes = false, .stepwise = opts.stepwise};
  parallel_for(static_cast<std::size_t>(blocks), opts.threads, [&](std::size_t b) {
    detail::BlockSums &s = sums[b];
    const long long begin = static_cast<long long>(b) * detail::kSampleBlock;
    const long long end = std::min(trials, begin + detail::kSampleBlock);
    for (long long i = begin; i < end; ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(i));
      const TrajectoryRecord rec = engine.run(rng, run_opts);
      const double p = static_cast<double>(rec.passes);
      s.passes += p;
      s.passes2 += p * p;
      if (!rec.success) continue;
      ++s.successes;
      const double f = detail::measured(rec.fidelity_to_target, opts.measure);
      s.fid += f;
      s.fid2 += f * f;
      if (opts.keep_fidelities) s.fidelities.push_back(f);
    }
  });

  SampleAggregate agg;
  agg.trials = trials;
  agg.seed = seed;
  double fid = 0.0, fid2 = 0.0, passes = 0.0, passes2 = 0.0;
  for (auto &s : sums) {
    agg.successes += s.successes;
    fid += s.fid;
    fid2 += s.fid2;
    passes += s.passes;
    passes2 += s.passes2;
    if (opts.keep_fidelities) agg.fidelities.insert(agg.fidelities.end(), s.fidelities.begin(), s.fidelities.end());
  }
  const double n = static_cast<double>(trials);
  agg.success_rate = static_cast<double>(agg.successes) / n;
  agg.standard_error = std::sqrt(agg.success_rate * (1.0 - agg.success_rate) / n);
  agg.mean_passes = passes / n;
  const double pass_var = std::max(0.0, passes2 / n - agg.mean_passes * agg.mean_passes);
  agg.passes_standard_error = std::sqrt(pass_var / n);
  if (agg.successes > 0) {
    const double k = static_cast<double>(agg.successes);
    agg.mean_fidelity_given_success = fid / k;
    agg.fidelity_variance =
        agg.successes > 1 ? std::max(0.0, (fid2 - fid * fid / k) / (k - 1.0)) : 0.0;
  }
  return agg;
}

inline SampleAggregate sample(const ProtocolSpec &spec, long long trials, std::uint64_t seed,
                              const SampleOptions &opts = {}) {
  return sample(Engine(spec), trials, seed, opts);
}

/// Histogram over [0, 1] of the fidelity of successful trajectories; a value
/// of exactly 1 lands in the top bin.
inline std::vector<long long> fidelity_histogram(const ProtocolSpec &spec, long long trials, std::uint64_t seed,
                                                 int bins, SampleOptions opts = {}) {
  if (bins < 1) throw ArgumentError("bins must be >= 1");
  opts.keep_fidelities = true;
  const SampleAggregate agg = sample(spec, trials, seed, opts);
  std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
  for (double f : agg.fidelities) {
    const int b = std::clamp(static_cast<int>(f * bins), 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

}  // namespace photonloop
