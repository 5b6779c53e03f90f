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

// Batch commands behind the command-line tool. Each command takes a validated
// RunConfig, writes its artifact (atomically when a path is given) and
// returns a process exit code.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <system_error>

#include "photonloop/analysis.hpp"
#include "photonloop/config.hpp"
#include "photonloop/exact_solver.hpp"
#include "photonloop/sampler.hpp"

namespace photonloop {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitModel = 3 };

inline constexpr long long kMaxTracedTrials = 1000;

inline const char *const kSweepCsvHeader =
    "target,N,T,eta,policy,p_exact,p_mc,stderr,mean_fidelity,trials,seed,trunc_bound";
inline const char *const kTraceCsvHeader = "trial,pass_index,pairs_true,pairs_announced,photons_lost,epsilon_used";

namespace detail {

inline std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

/// Writes to `path` through a sibling temporary file and a rename; empty path means stdout.
inline void write_output(const std::string &path, const std::string &content, std::ostream &stdout_stream) {
  if (path.empty()) {
    stdout_stream << content;
    stdout_stream.flush();
    return;
  }
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output", "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw ConfigError("output", "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ConfigError("output", "cannot move output into place at " + path);
  }
}

inline std::string format_of(const RunConfig &c, const char *fallback) { return c.format.empty() ? fallback : c.format; }

inline std::uint64_t resolve_seed(RunConfig &c) {
  if (!c.seed) {
    std::random_device rd;
    c.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return *c.seed;
}

inline Json nan_as_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace detail

struct CommandStreams {
  std::ostream &out = std::cout;
  std::ostream &err = std::cerr;
};

inline std::string sweep_csv(const SweepResult &r) {
  using detail::fmt9;
  std::string s = std::string(kSweepCsvHeader) + "\n";
  for (const auto &row : r.rows) {
    s += row.target + "," + std::to_string(row.n) + "," + fmt9(row.transmission) + "," + fmt9(row.eta) + "," +
         row.policy + "," + fmt9(row.p_exact) + "," + fmt9(row.p_mc) + "," + fmt9(row.stderr_mc) + "," +
         fmt9(row.mean_fidelity) + "," + std::to_string(row.trials) + "," + std::to_string(row.seed) + "," +
         fmt9(row.trunc_bound) + "\n";
  }
  return s;
}

inline int cmd_sweep(RunConfig c, CommandStreams io = {}) {
  c.command = "sweep";
  validate(c);
  const std::uint64_t seed = detail::resolve_seed(c);
  SweepOptions o;
  o.trials = c.trials;
  o.seed = seed;
  o.threads = c.threads;
  o.detector = c.detector;
  o.cavity = c.cavity;

  SweepResult res;
  if (c.sweep.optimize_grid.empty()) {
    res = sweep(c.sweep.targets, c.sweep.t_grid, c.sweep.eta_set, c.pump, o);
  } else {
    res.seed = seed;
    res.trials = c.trials;
    for (const auto &t : c.sweep.targets)
      for (double tr : c.sweep.t_grid)
        for (double eta : c.sweep.eta_set) {
          const PumpPolicy best = optimize_pump(sweep_spec(t, tr, eta, c.pump, o), c.sweep.optimize_grid, c.threads);
          const SweepResult one = sweep({t}, {tr}, {eta}, best, o);
          res.rows.push_back(one.rows.front());
        }
  }
  std::string body;
  if (detail::format_of(c, "csv") == "csv") {
    body = sweep_csv(res);
  } else {
    Json rows = Json::array();
    for (const auto &r : res.rows)
      rows.push_back({{"target", r.target}, {"N", r.n}, {"T", r.transmission}, {"eta", r.eta}, {"policy", r.policy},
                      {"p_exact", r.p_exact}, {"p_mc", r.p_mc}, {"stderr", r.stderr_mc},
                      {"mean_fidelity", r.mean_fidelity}, {"trials", r.trials}, {"seed", r.seed},
                      {"trunc_bound", r.trunc_bound}});
    Json j{{"seed", seed}, {"trials", c.trials}, {"rows", rows}, {"config", to_json(c)}};
    body = j.dump(2) + "\n";
  }
  detail::write_output(c.output, body, io.out);
  return kExitOk;
}

inline int cmd_simulate(RunConfig c, CommandStreams io = {}) {
  c.command = "simulate";
  validate(c);
  const std::uint64_t seed = detail::resolve_seed(c);
  const ProtocolSpec spec = to_protocol_spec(c);
  const Engine engine(spec);
  SampleOptions so;
  so.threads = c.threads;
  const SampleAggregate agg = sample(engine, c.trials, seed, so);

  std::string body;
  if (detail::format_of(c, "json") == "json") {
    Json j{{"target", to_string(spec.target.kind)},
           {"N", spec.target.heralds_needed()},
           {"policy", spec.pump.descriptor()},
           {"seed", seed},
           {"trials", agg.trials},
           {"successes", agg.successes},
           {"success_rate", agg.success_rate},
           {"stderr", agg.standard_error},
           {"mean_fidelity_given_success", detail::nan_as_null(agg.mean_fidelity_given_success)},
           {"fidelity_variance", detail::nan_as_null(agg.fidelity_variance)},
           {"mean_passes", agg.mean_passes},
           {"mean_passes_stderr", agg.passes_standard_error},
           {"max_passes", engine.max_passes()}};
    if (spec.target.kind != TargetKind::Subtract) {
      const ExactResult ex = exact_success(spec);
      j["exact"] = {{"success", ex.success},
                    {"truncation_bound", ex.truncation_bound},
                    {"mean_passes", ex.mean_passes},
                    {"mean_fidelity_given_success", ex.mean_fidelity}};
    }
    j["config"] = to_json(c);
    body = j.dump(2) + "\n";
  } else {
    using detail::fmt9;
    body = "target,N,T,eta,policy,trials,successes,success_rate,stderr,mean_fidelity_given_success,mean_passes,seed\n";
    body += to_string(spec.target.kind) + "," + std::to_string(spec.target.heralds_needed()) + "," +
            fmt9(spec.cavity.transmission) + "," + fmt9(spec.detector.efficiency) + "," + spec.pump.descriptor() + "," +
            std::to_string(agg.trials) + "," + std::to_string(agg.successes) + "," + fmt9(agg.success_rate) + "," +
            fmt9(agg.standard_error) + "," + fmt9(agg.mean_fidelity_given_success) + "," + fmt9(agg.mean_passes) +
            "," + std::to_string(seed) + "\n";
  }

  if (c.trace) {
    const long long traced = std::min(c.trials, kMaxTracedTrials);
    std::string trace = std::string(kTraceCsvHeader) + "\n";
    for (long long i = 0; i < traced; ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(i));
      const TrajectoryRecord rec = engine.run(rng, {.record_outcomes = true});
      for (const PassOutcome &o : expand_outcomes(rec, spec))
        trace += std::to_string(i) + "," + std::to_string(o.pass_index) + "," + std::to_string(o.pairs_true) + "," +
                 std::to_string(o.pairs_announced) + "," + std::to_string(o.photons_lost) + "," +
                 detail::fmt9(o.epsilon_used) + "\n";
    }
    if (c.trials > traced)
      io.err << "trace: only the first " << traced << " trajectories are logged\n";
    if (c.output.empty()) io.err << trace;
    else detail::write_output(c.output + ".trace.csv", trace, io.out);
  }
  detail::write_output(c.output, body, io.out);
  return kExitOk;
}

inline Json to_json(const OrderingEstimate &e) {
  return {{"permutation", e.permutation},
          {"mean_overlap", e.mean_overlap},
          {"stderr", e.overlap_stderr},
          {"mean_fidelity_exact", e.mean_fidelity_exact},
          {"mean_field_overlap", e.mean_field_overlap},
          {"successes", e.successes}};
}

inline int cmd_order_opt(RunConfig c, CommandStreams io = {}) {
  c.command = "order-opt";
  validate(c);
  const std::uint64_t seed = detail::resolve_seed(c);
  const auto &oc = c.order_opt;
  OrderingOptions o;
  o.exhaustive = oc.mode == "exhaustive";
  o.screen_trials = oc.screen_trials;
  o.finalists = static_cast<std::size_t>(oc.finalists);
  o.min_successes = oc.min_successes;
  o.sensitivity_eps = oc.sensitivity_eps;
  o.sensitivity_successes = oc.sensitivity_successes;
  o.threads = c.threads;
  o.cavity = c.cavity;
  o.detector = c.detector;
  const OrderingStudy st = ordering_search(oc.n, oc.epsilon, seed, o);

  std::string body;
  if (detail::format_of(c, "json") == "json") {
    Json sens = Json::array();
    for (const auto &row : st.sensitivity)
      sens.push_back({{"epsilon", row.epsilon},
                      {"mean_overlap_default", row.baseline.mean_overlap},
                      {"mean_overlap_default_stderr", row.baseline.overlap_stderr},
                      {"mean_overlap_best", row.best.mean_overlap},
                      {"mean_overlap_best_stderr", row.best.overlap_stderr},
                      {"mean_fidelity_default_exact", row.baseline.mean_fidelity_exact},
                      {"mean_fidelity_best_exact", row.best.mean_fidelity_exact},
                      {"mean_field_overlap_default", row.baseline.mean_field_overlap},
                      {"mean_field_overlap_best", row.best.mean_field_overlap}});
    Json j{{"N", st.n},
           {"mode", st.mode},
           {"epsilon_used", st.epsilon_used},
           {"trials", st.trials},
           {"seed", seed},
           {"candidates_screened", st.candidates_screened},
           {"permutation", st.best.permutation},
           {"mean_overlap_default", st.baseline.mean_overlap},
           {"mean_overlap_default_stderr", st.baseline.overlap_stderr},
           {"mean_overlap_best", st.best.mean_overlap},
           {"mean_overlap_best_stderr", st.best.overlap_stderr},
           {"improvement", st.best.mean_overlap - st.baseline.mean_overlap},
           {"baseline", to_json(st.baseline)},
           {"best", to_json(st.best)},
           {"sensitivity", sens},
           {"config", to_json(c)}};
    body = j.dump(2) + "\n";
  } else {
    using detail::fmt9;
    const auto perm_str = [](const std::vector<int> &p) {
      std::string s;
      for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + std::to_string(p[i]);
      return s;
    };
    body = "epsilon,permutation,mean_overlap_default,stderr_default,mean_overlap_best,stderr_best\n";
    body += fmt9(st.epsilon_used) + "," + perm_str(st.best.permutation) + "," + fmt9(st.baseline.mean_overlap) + "," +
            fmt9(st.baseline.overlap_stderr) + "," + fmt9(st.best.mean_overlap) + "," + fmt9(st.best.overlap_stderr) + "\n";
    for (const auto &row : st.sensitivity)
      body += fmt9(row.epsilon) + "," + perm_str(row.best.permutation) + "," + fmt9(row.baseline.mean_overlap) + "," +
              fmt9(row.baseline.overlap_stderr) + "," + fmt9(row.best.mean_overlap) + "," +
              fmt9(row.best.overlap_stderr) + "\n";
  }
  detail::write_output(c.output, body, io.out);
  return kExitOk;
}

inline int cmd_bounds(RunConfig c, CommandStreams io = {}) {
  c.command = "bounds";
  validate(c);
  const SinglePassBounds b = single_pass_bounds(c.bounds_n);
  char line[256];
  std::snprintf(line, sizeof line, "n=%d thermal_max=%.5f (lambda*=%.6g) poisson_max=%.5f (mu*=%.6g)\n", b.n,
                b.thermal_max, b.thermal_argmax, b.poisson_max, b.poisson_argmax);
  if (c.output.empty() && c.format.empty()) {
    io.out << line;
    return kExitOk;
  }
  std::string body;
  if (detail::format_of(c, "json") == "json") {
    Json j{{"n", b.n},
           {"thermal_max", b.thermal_max},
           {"thermal_argmax", b.thermal_argmax},
           {"poisson_max", b.poisson_max},
           {"poisson_argmax", b.poisson_argmax}};
    body = j.dump(2) + "\n";
  } else {
    using detail::fmt9;
    body = "n,thermal_max,thermal_argmax,poisson_max,poisson_argmax\n" + std::to_string(b.n) + "," +
           fmt9(b.thermal_max) + "," + fmt9(b.thermal_argmax) + "," + fmt9(b.poisson_max) + "," +
           fmt9(b.poisson_argmax) + "\n";
  }
  if (!c.output.empty()) io.out << line;
  detail::write_output(c.output, body, io.out);
  return kExitOk;
}

/// Dispatches on `c.command`, mapping failures onto exit codes with a
/// diagnostic on the error stream.
inline int run_command(const RunConfig &c, CommandStreams io = {}) {
  try {
    if (c.command == "sweep") return cmd_sweep(c, io);
    if (c.command == "simulate") return cmd_simulate(c, io);
    if (c.command == "order-opt") return cmd_order_opt(c, io);
    if (c.command == "bounds") return cmd_bounds(c, io);
    throw ConfigError("command", "unknown command '" + c.command + "'");
  } catch (const ConfigError &e) {
    io.err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError &e) {
    io.err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    io.err << "model error: " << e.what() << "\n";
    return kExitModel;
  }
}

}  // namespace photonloop
