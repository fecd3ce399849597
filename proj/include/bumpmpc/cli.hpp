/// Command front end: run scenarios, compare the solver against the
/// enumeration oracle, and validate configs. The functions return the
/// process exit code (0 ok / 1 compliance failure / 2 solver failure /
/// 3 config error) so a thin main can forward them.

#ifndef BUMPMPC_CLI_HPP
#define BUMPMPC_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace bumpmpc {

/// Command-line overrides; each one set here wins over the scenario file
/// (the override is logged).
struct RunFlags {
  std::optional<bool> human_behavior;
  std::optional<bool> strict_indicators;
  std::optional<int> horizon;
  std::optional<int> sim_steps;
  bool trace = false;
};

struct RunArtifacts {
  std::string trajectory_path;
  std::string report_path;
  std::string plot_path;
  std::optional<std::string> trace_path;
  int exit_code = 0;
};

RunArtifacts cmd_run(const std::string& scenario_path, const std::string& output_dir,
                     const RunFlags& flags, std::ostream& out, std::ostream& err);

int cmd_oracle_compare(const std::string& scenario_path, int horizon, int trials,
                       std::uint64_t seed, const RunFlags& flags, std::ostream& out,
                       std::ostream& err);

int cmd_check(const std::string& scenario_path, std::ostream& out, std::ostream& err);

}  // namespace bumpmpc

#endif  // BUMPMPC_CLI_HPP
