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

// JSON run configuration: parsing with strict key checking, validation with
// field-path diagnostics, conversion to protocol objects, and an echo that
// parses back to an equivalent configuration.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "photonloop/analysis.hpp"
#include "photonloop/channels.hpp"
#include "photonloop/error.hpp"
#include "photonloop/fock_state.hpp"
#include "photonloop/protocol.hpp"
#include "photonloop/pump_policy.hpp"

namespace photonloop {

using Json = nlohmann::json;

struct AmplitudeEntry {
  int h = 0, v = 0;
  double re = 0.0, im = 0.0;
  friend bool operator==(const AmplitudeEntry &, const AmplitudeEntry &) = default;
};

struct TargetConfig {
  std::string kind = "fock";  ///< fock | noon | mm | subtract
  int n = 1;
  std::string variant = "linear-HV";
  int m = 2, m_prime = 1;
  std::vector<AmplitudeEntry> initial;
  int count = 1;
  double reflectivity = 0.01;
  std::string axis = "H";
  friend bool operator==(const TargetConfig &, const TargetConfig &) = default;
};

struct SweepConfig {
  std::vector<SweepTarget> targets{{TargetKind::Fock, 1, 0}, {TargetKind::Fock, 2, 0}, {TargetKind::Fock, 4, 0}};
  std::vector<double> t_grid{0.95, 0.955, 0.96, 0.965, 0.97, 0.975, 0.98, 0.985, 0.99, 0.995, 1.0};
  std::vector<double> eta_set{1.0, 0.95, 0.9};
  std::vector<double> optimize_grid;  ///< non-empty: optimize the pump per row target at T = 1 first
};

inline bool operator==(const SweepTarget &a, const SweepTarget &b) {
  return a.kind == b.kind && a.n == b.n && a.mp == b.mp;
}
inline bool operator==(const SweepConfig &a, const SweepConfig &b) {
  return a.targets == b.targets && a.t_grid == b.t_grid && a.eta_set == b.eta_set && a.optimize_grid == b.optimize_grid;
}

struct OrderOptConfig {
  int n = 8;
  double epsilon = 0.05;
  std::string mode = "exhaustive";  ///< exhaustive | heuristic
  long long min_successes = 10000;
  long long screen_trials = 300;
  int finalists = 6;
  std::vector<double> sensitivity_eps{0.02, 0.05, 0.1};
  long long sensitivity_successes = 2000;
  friend bool operator==(const OrderOptConfig &, const OrderOptConfig &) = default;
};

struct RunConfig {
  std::string command = "simulate";
  TargetConfig target;
  PumpPolicy pump;
  std::vector<int> ordering;
  DetectorModel detector;
  CavityModel cavity;
  std::string pump_axis = "H";
  int cutoff = 0;
  long long trials = 100000;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;  ///< execution only; not echoed
  std::string output;    ///< not echoed
  std::string format;  ///< empty = command default
  bool trace = false;
  SweepConfig sweep;
  OrderOptConfig order_opt;
  int bounds_n = 4;

  /// Equality over everything that affects results (threads and output path excluded).
  bool equivalent(const RunConfig &o) const {
    return command == o.command && target == o.target && pump == o.pump && ordering == o.ordering &&
           detector.efficiency == o.detector.efficiency && detector.mode == o.detector.mode &&
           detector.dark_rate == o.detector.dark_rate && cavity.transmission == o.cavity.transmission &&
           cavity.t_out == o.cavity.t_out && cavity.max_passes == o.cavity.max_passes && pump_axis == o.pump_axis &&
           cutoff == o.cutoff && trials == o.trials && seed == o.seed && format == o.format &&
           trace == o.trace && sweep == o.sweep && order_opt == o.order_opt && bounds_n == o.bounds_n;
  }
};

namespace detail {

inline const std::set<std::string> kCommands{"sweep", "simulate", "order-opt", "bounds"};

inline std::string join_path(const std::string &base, const std::string &key) {
  return base.empty() ? key : base + "." + key;
}

inline void reject_unknown(const Json &obj, const std::string &path, std::initializer_list<const char *> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto &item : obj.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(join_path(path, item.key()), "unknown key");
  }
}

inline double get_number(const Json &j, const std::string &path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

inline long long get_integer(const Json &j, const std::string &path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long long>();
}

inline std::string get_string(const Json &j, const std::string &path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const Json &j, const std::string &path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

inline std::vector<double> get_number_list(const Json &j, const std::string &path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// A list of numbers, or {"start", "stop", "points"} for an evenly spaced grid.
inline std::vector<double> get_grid(const Json &j, const std::string &path) {
  if (j.is_array()) return get_number_list(j, path);
  reject_unknown(j, path, {"start", "stop", "points"});
  for (const char *k : {"start", "stop", "points"})
    if (!j.contains(k)) throw ConfigError(join_path(path, k), "missing");
  const double a = get_number(j["start"], path + ".start"), b = get_number(j["stop"], path + ".stop");
  const long long n = get_integer(j["points"], path + ".points");
  if (n < 1) throw ConfigError(path + ".points", "must be >= 1");
  std::vector<double> out;
  for (long long i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

inline PolarizationCoefficients axis_from_label(const std::string &label, const std::string &path) {
  const double r = std::sqrt(0.5);
  if (label == "H") return PolarizationCoefficients::horizontal();
  if (label == "V") return PolarizationCoefficients::vertical();
  if (label == "D") return {r, r};
  if (label == "A") return {r, -r};
  if (label == "R") return {Complex(r), Complex(0.0, -r)};
  if (label == "L") return {Complex(r), Complex(0.0, r)};
  throw ConfigError(path, "expected one of H, V, D, A, R, L");
}

inline TargetKind kind_from_label(const std::string &s, const std::string &path) {
  if (s == "fock") return TargetKind::Fock;
  if (s == "noon") return TargetKind::Noon;
  if (s == "mm") return TargetKind::MM;
  if (s == "subtract") return TargetKind::Subtract;
  throw ConfigError(path, "expected fock, noon, mm or subtract");
}

inline void check_range(double x, double lo, double hi, const std::string &path) {
  if (!(x >= lo && x <= hi))
    throw ConfigError(path, "must lie in [" + Json(lo).dump() + ", " + Json(hi).dump() + "], got " + Json(x).dump());
}

inline void parse_target(const Json &j, TargetConfig &t) {
  reject_unknown(j, "target", {"kind", "N", "variant", "m", "m_prime", "initial", "count", "reflectivity", "axis"});
  if (j.contains("kind")) t.kind = get_string(j["kind"], "target.kind");
  kind_from_label(t.kind, "target.kind");
  if (j.contains("N")) t.n = static_cast<int>(get_integer(j["N"], "target.N"));
  if (j.contains("variant")) t.variant = get_string(j["variant"], "target.variant");
  if (j.contains("m")) t.m = static_cast<int>(get_integer(j["m"], "target.m"));
  if (j.contains("m_prime")) t.m_prime = static_cast<int>(get_integer(j["m_prime"], "target.m_prime"));
  if (j.contains("count")) t.count = static_cast<int>(get_integer(j["count"], "target.count"));
  if (j.contains("reflectivity")) t.reflectivity = get_number(j["reflectivity"], "target.reflectivity");
  if (j.contains("axis")) t.axis = get_string(j["axis"], "target.axis");
  if (j.contains("initial")) {
    const Json &arr = j["initial"];
    if (!arr.is_array()) throw ConfigError("target.initial", "expected an array of {h, v, re, im}");
    t.initial.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "target.initial[" + std::to_string(i) + "]";
      reject_unknown(arr[i], p, {"h", "v", "re", "im"});
      AmplitudeEntry e;
      if (arr[i].contains("h")) e.h = static_cast<int>(get_integer(arr[i]["h"], p + ".h"));
      if (arr[i].contains("v")) e.v = static_cast<int>(get_integer(arr[i]["v"], p + ".v"));
      if (arr[i].contains("re")) e.re = get_number(arr[i]["re"], p + ".re");
      if (arr[i].contains("im")) e.im = get_number(arr[i]["im"], p + ".im");
      t.initial.push_back(e);
    }
  }
}

inline std::string pump_kind_label(PumpKind k) { return to_string(k); }

inline void parse_pump(const Json &j, PumpPolicy &p) {
  reject_unknown(j, "pump", {"kind", "values", "epsilon", "multi_add"});
  if (j.contains("kind")) {
    const std::string k = get_string(j["kind"], "pump.kind");
    if (k == "fixed") p.kind = PumpKind::Fixed;
    else if (k == "per-remaining") p.kind = PumpKind::PerRemaining;
    else if (k == "optimized") p.kind = PumpKind::Optimized;
    else throw ConfigError("pump.kind", "expected fixed, per-remaining or optimized");
  }
  if (j.contains("epsilon") && j.contains("values")) throw ConfigError("pump.epsilon", "give either epsilon or values");
  if (j.contains("epsilon")) p.values = {get_number(j["epsilon"], "pump.epsilon")};
  if (j.contains("values")) p.values = get_number_list(j["values"], "pump.values");
  if (j.contains("multi_add")) p.multi_add_allowed = get_bool(j["multi_add"], "pump.multi_add");
  if (p.values.empty()) throw ConfigError("pump.values", "must not be empty");
  for (std::size_t i = 0; i < p.values.size(); ++i)
    check_range(p.values[i], 0.0, kMaxEpsilon, "pump.values[" + std::to_string(i) + "]");
}

inline void parse_sweep(const Json &j, SweepConfig &s) {
  reject_unknown(j, "sweep", {"targets", "T_grid", "eta_set", "optimize_grid"});
  if (j.contains("targets")) {
    const Json &arr = j["targets"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("sweep.targets", "expected a non-empty array");
    s.targets.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "sweep.targets[" + std::to_string(i) + "]";
      reject_unknown(arr[i], p, {"kind", "N", "m", "m_prime"});
      SweepTarget t;
      if (arr[i].contains("kind")) t.kind = kind_from_label(get_string(arr[i]["kind"], p + ".kind"), p + ".kind");
      if (t.kind == TargetKind::Subtract) throw ConfigError(p + ".kind", "sweeps support fock, noon and mm");
      if (t.kind == TargetKind::MM) {
        t.n = arr[i].contains("m") ? static_cast<int>(get_integer(arr[i]["m"], p + ".m")) : 2;
        t.mp = arr[i].contains("m_prime") ? static_cast<int>(get_integer(arr[i]["m_prime"], p + ".m_prime")) : 1;
        if (t.mp < 0 || t.n <= t.mp) throw ConfigError(p + ".m", "need m > m_prime >= 0");
      } else {
        if (arr[i].contains("N")) t.n = static_cast<int>(get_integer(arr[i]["N"], p + ".N"));
        if (t.n < 1 || t.n > kMaxCutoff - 2) throw ConfigError(p + ".N", "must lie in [1, " + std::to_string(kMaxCutoff - 2) + "]");
      }
      s.targets.push_back(t);
    }
  }
  if (j.contains("T_grid")) s.t_grid = get_grid(j["T_grid"], "sweep.T_grid");
  if (j.contains("eta_set")) s.eta_set = get_grid(j["eta_set"], "sweep.eta_set");
  if (j.contains("optimize_grid")) s.optimize_grid = get_number_list(j["optimize_grid"], "sweep.optimize_grid");
  if (s.t_grid.empty()) throw ConfigError("sweep.T_grid", "must not be empty");
  if (s.eta_set.empty()) throw ConfigError("sweep.eta_set", "must not be empty");
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) check_range(s.t_grid[i], 0.0, 1.0, "sweep.T_grid[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.eta_set.size(); ++i) check_range(s.eta_set[i], 0.0, 1.0, "sweep.eta_set[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.optimize_grid.size(); ++i)
    check_range(s.optimize_grid[i], 1e-6, kMaxEpsilon, "sweep.optimize_grid[" + std::to_string(i) + "]");
}

inline void parse_order_opt(const Json &j, OrderOptConfig &o) {
  reject_unknown(j, "order_opt", {"N", "epsilon", "mode", "min_successes", "screen_trials", "finalists",
                                  "sensitivity_eps", "sensitivity_successes"});
  if (j.contains("N")) o.n = static_cast<int>(get_integer(j["N"], "order_opt.N"));
  if (j.contains("epsilon")) o.epsilon = get_number(j["epsilon"], "order_opt.epsilon");
  if (j.contains("mode")) o.mode = get_string(j["mode"], "order_opt.mode");
  if (j.contains("min_successes")) o.min_successes = get_integer(j["min_successes"], "order_opt.min_successes");
  if (j.contains("screen_trials")) o.screen_trials = get_integer(j["screen_trials"], "order_opt.screen_trials");
  if (j.contains("finalists")) o.finalists = static_cast<int>(get_integer(j["finalists"], "order_opt.finalists"));
  if (j.contains("sensitivity_eps")) o.sensitivity_eps = get_number_list(j["sensitivity_eps"], "order_opt.sensitivity_eps");
  if (j.contains("sensitivity_successes"))
    o.sensitivity_successes = get_integer(j["sensitivity_successes"], "order_opt.sensitivity_successes");
}

}  // namespace detail

/// Range and consistency checks; throws ConfigError naming the field.
inline void validate(const RunConfig &c);

/// Parses a configuration document. Missing keys keep their defaults.
inline RunConfig parse_run_config(const Json &j) {
  using namespace detail;
  reject_unknown(j, "", {"command", "target", "pump", "ordering", "detector", "cavity", "pump_axis", "cutoff",
                         "trials", "seed", "output", "format", "trace", "sweep", "order_opt", "bounds"});
  RunConfig c;
  if (j.contains("command")) c.command = get_string(j["command"], "command");
  if (j.contains("target")) parse_target(j["target"], c.target);
  if (j.contains("pump")) parse_pump(j["pump"], c.pump);
  if (j.contains("ordering")) {
    if (!j["ordering"].is_array()) throw ConfigError("ordering", "expected an array of integers");
    for (std::size_t i = 0; i < j["ordering"].size(); ++i)
      c.ordering.push_back(static_cast<int>(get_integer(j["ordering"][i], "ordering[" + std::to_string(i) + "]")));
  }
  if (j.contains("detector")) {
    const Json &d = j["detector"];
    reject_unknown(d, "detector", {"efficiency", "mode", "dark_rate"});
    if (d.contains("efficiency")) c.detector.efficiency = get_number(d["efficiency"], "detector.efficiency");
    if (d.contains("dark_rate")) c.detector.dark_rate = get_number(d["dark_rate"], "detector.dark_rate");
    if (d.contains("mode")) {
      const std::string m = get_string(d["mode"], "detector.mode");
      if (m == "number-resolving") c.detector.mode = DetectorMode::NumberResolving;
      else if (m == "threshold") c.detector.mode = DetectorMode::Threshold;
      else throw ConfigError("detector.mode", "expected number-resolving or threshold");
    }
  }
  if (j.contains("cavity")) {
    const Json &d = j["cavity"];
    reject_unknown(d, "cavity", {"transmission", "t_out", "max_passes"});
    if (d.contains("transmission")) c.cavity.transmission = get_number(d["transmission"], "cavity.transmission");
    if (d.contains("t_out")) c.cavity.t_out = get_number(d["t_out"], "cavity.t_out");
    if (d.contains("max_passes")) c.cavity.max_passes = get_integer(d["max_passes"], "cavity.max_passes");
  }
  if (j.contains("pump_axis")) c.pump_axis = get_string(j["pump_axis"], "pump_axis");
  if (j.contains("cutoff")) c.cutoff = static_cast<int>(get_integer(j["cutoff"], "cutoff"));
  if (j.contains("trials")) c.trials = get_integer(j["trials"], "trials");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw ConfigError("seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) c.output = get_string(j["output"], "output");
  if (j.contains("format")) c.format = get_string(j["format"], "format");
  if (j.contains("trace")) c.trace = get_bool(j["trace"], "trace");
  if (j.contains("sweep")) parse_sweep(j["sweep"], c.sweep);
  if (j.contains("order_opt")) parse_order_opt(j["order_opt"], c.order_opt);
  if (j.contains("bounds")) {
    reject_unknown(j["bounds"], "bounds", {"n"});
    if (j["bounds"].contains("n")) c.bounds_n = static_cast<int>(get_integer(j["bounds"]["n"], "bounds.n"));
  }
  return c;
}

inline RunConfig parse_run_config_text(const std::string &text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

/// Builds the protocol description for simulate-style commands.
inline ProtocolSpec to_protocol_spec(const RunConfig &c) {
  ProtocolSpec s;
  const TargetKind kind = detail::kind_from_label(c.target.kind, "target.kind");
  NoonVariant variant = NoonVariant::LinearHV;
  if (c.target.variant == "diagonal-45") variant = NoonVariant::Diagonal45;
  else if (c.target.variant != "linear-HV") throw ConfigError("target.variant", "expected linear-HV or diagonal-45");
  const int limit = kMaxCutoff - 2;
  switch (kind) {
    case TargetKind::Fock:
    case TargetKind::Noon:
      if (c.target.n < 1 || c.target.n > limit) throw ConfigError("target.N", "must lie in [1, " + std::to_string(limit) + "]");
      s.target = kind == TargetKind::Fock ? Target::fock(c.target.n) : Target::noon(c.target.n, variant);
      break;
    case TargetKind::MM:
      if (c.target.m_prime < 0 || c.target.m <= c.target.m_prime) throw ConfigError("target.m", "need m > m_prime >= 0");
      if (c.target.m + c.target.m_prime > limit) throw ConfigError("target.m", "too many photons");
      s.target = Target::mm(c.target.m, c.target.m_prime);
      break;
    case TargetKind::Subtract: {
      if (c.target.initial.empty()) throw ConfigError("target.initial", "subtraction needs an initial state");
      int top = 0;
      for (std::size_t i = 0; i < c.target.initial.size(); ++i) {
        const auto &e = c.target.initial[i];
        if (e.h < 0 || e.v < 0) throw ConfigError("target.initial[" + std::to_string(i) + "]", "occupations must be >= 0");
        top = std::max(top, e.h + e.v);
      }
      if (top > kMaxCutoff) throw ConfigError("target.initial", "too many photons");
      PolarizedFockState init(std::max(top, c.cutoff));
      for (const auto &e : c.target.initial) init.at(e.h, e.v) += Complex(e.re, e.im);
      if (init.squared_norm() == 0.0) throw ConfigError("target.initial", "initial state is the zero vector");
      init.normalize();
      s.target = Target::subtract(std::move(init), c.target.count, c.target.reflectivity,
                                  detail::axis_from_label(c.target.axis, "target.axis"));
      break;
    }
  }
  s.pump = c.pump;
  s.ordering = c.ordering;
  s.detector = c.detector;
  s.cavity = c.cavity;
  s.pump_axis = detail::axis_from_label(c.pump_axis, "pump_axis");
  s.cutoff = c.cutoff;
  s.validate();
  return s;
}

inline void validate(const RunConfig &c) {
  using detail::check_range;
  if (!detail::kCommands.count(c.command)) throw ConfigError("command", "expected sweep, simulate, order-opt or bounds");
  check_range(c.detector.efficiency, 0.0, 1.0, "detector.efficiency");
  if (!(c.detector.dark_rate >= 0.0)) throw ConfigError("detector.dark_rate", "must be >= 0");
  check_range(c.cavity.transmission, 0.0, 1.0, "cavity.transmission");
  check_range(c.cavity.t_out, 0.0, 1.0, "cavity.t_out");
  if (c.cavity.max_passes < 0) throw ConfigError("cavity.max_passes", "must be >= 0 (0 selects the default)");
  if (c.cutoff < 0 || c.cutoff > kMaxCutoff) throw ConfigError("cutoff", "must lie in [0, " + std::to_string(kMaxCutoff) + "]");
  if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
  if (!c.format.empty() && c.format != "csv" && c.format != "json") throw ConfigError("format", "expected csv or json");
  for (std::size_t i = 0; i < c.pump.values.size(); ++i)
    check_range(c.pump.values[i], 0.0, kMaxEpsilon, "pump.values[" + std::to_string(i) + "]");
  detail::axis_from_label(c.pump_axis, "pump_axis");
  if (c.command == "simulate") to_protocol_spec(c);
  if (c.command == "sweep") {
    for (std::size_t i = 0; i < c.sweep.t_grid.size(); ++i)
      check_range(c.sweep.t_grid[i], 0.0, 1.0, "sweep.T_grid[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < c.sweep.eta_set.size(); ++i)
      check_range(c.sweep.eta_set[i], 0.0, 1.0, "sweep.eta_set[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < c.sweep.targets.size(); ++i) {
      const auto &t = c.sweep.targets[i];
      const int photons = t.kind == TargetKind::MM ? t.n + t.mp : t.n;
      if (c.detector.mode == DetectorMode::Threshold && photons >= 2)
        throw ConfigError("detector.mode", "threshold detectors are only supported for single-photon targets");
    }
    if (c.pump.min_epsilon() <= 0.0 && c.cavity.max_passes == 0)
      throw ConfigError("pump.values", "zero epsilon requires an explicit cavity.max_passes");
  }
  if (c.command == "order-opt") {
    const auto &o = c.order_opt;
    if (o.n < 1) throw ConfigError("order_opt.N", "must be >= 1");
    if (o.mode != "exhaustive" && o.mode != "heuristic") throw ConfigError("order_opt.mode", "expected exhaustive or heuristic");
    if (o.mode == "exhaustive" && o.n > kMaxExhaustiveOrderingN)
      throw ConfigError("order_opt.N", "exhaustive search supports N <= " + std::to_string(kMaxExhaustiveOrderingN) +
                                           "; set order_opt.mode to heuristic");
    if (o.n > kMaxCutoff - 2) throw ConfigError("order_opt.N", "too many photons");
    check_range(o.epsilon, 1e-6, kMaxEpsilon, "order_opt.epsilon");
    if (o.min_successes < 1) throw ConfigError("order_opt.min_successes", "must be >= 1");
    if (o.screen_trials < 1) throw ConfigError("order_opt.screen_trials", "must be >= 1");
    if (o.finalists < 1) throw ConfigError("order_opt.finalists", "must be >= 1");
    if (o.sensitivity_successes < 1) throw ConfigError("order_opt.sensitivity_successes", "must be >= 1");
    for (std::size_t i = 0; i < o.sensitivity_eps.size(); ++i)
      check_range(o.sensitivity_eps[i], 1e-6, kMaxEpsilon, "order_opt.sensitivity_eps[" + std::to_string(i) + "]");
  }
  if (c.command == "bounds" && c.bounds_n < 1) throw ConfigError("bounds.n", "must be >= 1");
}

/// Serializes every result-relevant field; `parse_run_config` inverts it.
inline Json to_json(const RunConfig &c) {
  Json j;
  j["command"] = c.command;
  Json t;
  t["kind"] = c.target.kind;
  t["N"] = c.target.n;
  t["variant"] = c.target.variant;
  t["m"] = c.target.m;
  t["m_prime"] = c.target.m_prime;
  t["count"] = c.target.count;
  t["reflectivity"] = c.target.reflectivity;
  t["axis"] = c.target.axis;
  t["initial"] = Json::array();
  for (const auto &e : c.target.initial) t["initial"].push_back({{"h", e.h}, {"v", e.v}, {"re", e.re}, {"im", e.im}});
  j["target"] = t;
  j["pump"] = {{"kind", to_string(c.pump.kind)}, {"values", c.pump.values}, {"multi_add", c.pump.multi_add_allowed}};
  j["ordering"] = c.ordering;
  j["detector"] = {{"efficiency", c.detector.efficiency},
                   {"mode", to_string(c.detector.mode)},
                   {"dark_rate", c.detector.dark_rate}};
  j["cavity"] = {{"transmission", c.cavity.transmission}, {"t_out", c.cavity.t_out}, {"max_passes", c.cavity.max_passes}};
  j["pump_axis"] = c.pump_axis;
  j["cutoff"] = c.cutoff;
  j["trials"] = c.trials;
  if (c.seed) j["seed"] = *c.seed;
  j["format"] = c.format;
  j["trace"] = c.trace;
  Json targets = Json::array();
  for (const auto &st : c.sweep.targets) {
    if (st.kind == TargetKind::MM) targets.push_back({{"kind", "mm"}, {"m", st.n}, {"m_prime", st.mp}});
    else targets.push_back({{"kind", to_string(st.kind)}, {"N", st.n}});
  }
  j["sweep"] = {{"targets", targets},
                {"T_grid", c.sweep.t_grid},
                {"eta_set", c.sweep.eta_set},
                {"optimize_grid", c.sweep.optimize_grid}};
  const auto &o = c.order_opt;
  j["order_opt"] = {{"N", o.n},
                    {"epsilon", o.epsilon},
                    {"mode", o.mode},
                    {"min_successes", o.min_successes},
                    {"screen_trials", o.screen_trials},
                    {"finalists", o.finalists},
                    {"sensitivity_eps", o.sensitivity_eps},
                    {"sensitivity_successes", o.sensitivity_successes}};
  j["bounds"] = {{"n", c.bounds_n}};
  return j;
}

}  // namespace photonloop
