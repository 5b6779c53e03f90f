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

// Command-line front end: photonloop {sweep|simulate|order-opt|bounds} [options]

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "photonloop/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long long> trials;
  std::optional<std::string> out;
  std::optional<std::string> format;
  bool trace = false;
  std::optional<unsigned> threads;
  std::optional<int> n;
  std::optional<double> epsilon;
  std::optional<std::string> mode;
};

void add_common(CLI::App *cmd, Flags &f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "base seed (drawn from entropy and echoed when omitted)");
  cmd->add_option("--trials", f.trials, "Monte Carlo trajectories (order-opt: successes per ordering)");
  cmd->add_option("--out", f.out, "output path (stdout when omitted)");
  cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", f.threads, "worker threads, 0 = all cores");
}

}  // namespace

int main(int argc, char **argv) {
  using namespace photonloop;
  CLI::App app{"Cavity-looped heralded photon source simulator"};
  app.require_subcommand(1);
  Flags f;
  CLI::App *sweep_cmd = app.add_subcommand("sweep", "exact and sampled success over a (target, T, eta) grid");
  CLI::App *sim_cmd = app.add_subcommand("simulate", "Monte Carlo aggregate for one configuration");
  CLI::App *order_cmd = app.add_subcommand("order-opt", "search addition orders for N00N fidelity");
  CLI::App *bounds_cmd = app.add_subcommand("bounds", "single-pass thermal and Poisson maxima");
  for (CLI::App *c : {sweep_cmd, sim_cmd, order_cmd, bounds_cmd}) add_common(c, f);
  sim_cmd->add_flag("--trace", f.trace, "log every pass of the first trajectories to <out>.trace.csv");
  order_cmd->add_option("--n", f.n, "photon number N");
  order_cmd->add_option("--epsilon", f.epsilon, "interaction strength");
  order_cmd->add_option("--mode", f.mode, "exhaustive or heuristic");
  bounds_cmd->add_option("-n,--n", f.n, "photon number");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw ConfigError("--config", "cannot read " + f.config);
      std::stringstream buf;
      buf << in.rdbuf();
      cfg = parse_run_config_text(buf.str());
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const CLI::App *chosen = app.get_subcommands().front();
  cfg.command = chosen->get_name();
  if (f.seed) cfg.seed = *f.seed;
  if (f.trials) {
    if (cfg.command == "order-opt") cfg.order_opt.min_successes = *f.trials;
    else cfg.trials = *f.trials;
  }
  if (f.out) cfg.output = *f.out;
  if (f.format) cfg.format = *f.format;
  if (f.trace) cfg.trace = true;
  if (f.threads) cfg.threads = *f.threads;
  if (f.n) {
    if (cfg.command == "bounds") cfg.bounds_n = *f.n;
    else cfg.order_opt.n = *f.n;
  }
  if (f.epsilon) cfg.order_opt.epsilon = *f.epsilon;
  if (f.mode) cfg.order_opt.mode = *f.mode;
  return run_command(cfg);
}
