// bumpmpc command-line front end.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bumpmpc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"speed-bump trajectory planner (MIQP-MPC)"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string output_dir = "out";
  bool human_behavior = false, strict_indicators = false, trace = false;
  int horizon = 0, sim_steps = 0, trials = 50;
  std::uint64_t seed = 42;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_path, "scenario config file")->required();
    cmd->add_flag("--human-behavior", human_behavior, "enable the turning binaries");
    cmd->add_flag("--strict-indicators", strict_indicators,
                  "biconditional speed-cap indicator");
    cmd->add_option("--horizon", horizon, "override horizon_n");
  };

  CLI::App* run = app.add_subcommand("run", "run the closed-loop simulation");
  add_common(run);
  run->add_option("--sim-steps", sim_steps, "override sim_steps");
  run->add_option("-o,--output", output_dir, "output directory");
  run->add_flag("--trace", trace, "write a per-node solver trace");

  CLI::App* oracle = app.add_subcommand(
      "oracle-compare", "compare branch-and-bound with exhaustive enumeration");
  add_common(oracle);
  oracle->add_option("--trials", trials, "number of randomized initial states");
  oracle->add_option("--seed", seed, "randomization seed");

  CLI::App* check = app.add_subcommand("check", "validate a scenario file");
  check->add_option("scenario", scenario_path, "scenario config file")->required();

  CLI11_PARSE(app, argc, argv);

  auto fill_flags = [&](CLI::App* cmd) {
    bumpmpc::RunFlags flags;
    if (cmd->count("--human-behavior") > 0) flags.human_behavior = human_behavior;
    if (cmd->count("--strict-indicators") > 0) flags.strict_indicators = strict_indicators;
    return flags;
  };

  if (run->parsed()) {
    bumpmpc::RunFlags flags = fill_flags(run);
    if (run->count("--horizon") > 0) flags.horizon = horizon;
    if (run->count("--sim-steps") > 0) flags.sim_steps = sim_steps;
    flags.trace = trace;
    return bumpmpc::cmd_run(scenario_path, output_dir, flags, std::cout, std::cerr).exit_code;
  }
  if (oracle->parsed()) {
    bumpmpc::RunFlags flags = fill_flags(oracle);
    const int oc_horizon = oracle->count("--horizon") > 0 ? horizon : 2;
    return bumpmpc::cmd_oracle_compare(scenario_path, oc_horizon, trials, seed, flags,
                                       std::cout, std::cerr);
  }
  return bumpmpc::cmd_check(scenario_path, std::cout, std::cerr);
}
