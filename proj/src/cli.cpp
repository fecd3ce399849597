#include "bumpmpc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "bumpmpc/bnb_solver.hpp"
#include "bumpmpc/miqp_builder.hpp"
#include "bumpmpc/mpc_sim.hpp"
#include "bumpmpc/run_io.hpp"
#include "bumpmpc/scenario.hpp"

namespace bumpmpc {

namespace {

Scenario load_with_overrides(const std::string& path, const RunFlags& flags,
                             std::ostream& out) {
  Scenario s = load_scenario_file(path);
  auto log_override = [&out](const std::string& key, const std::string& value,
                             const char* flag) {
    out << "override: " << key << " = " << value << " (from " << flag << ")\n";
  };
  if (flags.human_behavior) {
    s.human_behavior_mode = *flags.human_behavior;
    log_override("human_behavior_mode", *flags.human_behavior ? "true" : "false",
                 "--human-behavior");
  }
  if (flags.strict_indicators) {
    s.strict_indicators = *flags.strict_indicators;
    log_override("strict_indicators", *flags.strict_indicators ? "true" : "false",
                 "--strict-indicators");
  }
  if (flags.horizon) {
    s.horizon_n = *flags.horizon;
    log_override("horizon_n", std::to_string(*flags.horizon), "--horizon");
  }
  if (flags.sim_steps) {
    s.sim_steps = *flags.sim_steps;
    log_override("sim_steps", std::to_string(*flags.sim_steps), "--sim-steps");
  }
  auto violations = validate(s);
  if (!violations.empty()) throw ScenarioValidationError(std::move(violations));
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

}  // namespace

RunArtifacts cmd_run(const std::string& scenario_path, const std::string& output_dir,
                     const RunFlags& flags, std::ostream& out, std::ostream& err) {
  RunArtifacts art;
  Scenario scenario;
  try {
    scenario = load_with_overrides(scenario_path, flags, out);
    std::filesystem::create_directories(output_dir);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    art.exit_code = 3;
    return art;
  }

  art.trajectory_path = output_dir + "/trajectory.csv";
  art.report_path = output_dir + "/report.json";
  art.plot_path = output_dir + "/plot.dat";

  std::ofstream trace_stream;
  BnbConfig config;
  if (flags.trace) {
    art.trace_path = output_dir + "/trace.log";
    trace_stream.open(*art.trace_path);
    config.trace = &trace_stream;
  }

  Trajectory traj;
  try {
    traj = run_mpc(scenario, config);
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    art.exit_code = 2;
    return art;
  }

  try {
    ComplianceReport rep = check_trajectory(traj, scenario);
    write_file(art.trajectory_path, trajectory_csv(traj, scenario.human_behavior_mode));
    write_file(art.report_path, report_json(rep, traj));
    write_file(art.plot_path, plot_data(traj));

    char line[256];
    std::snprintf(line, sizeof(line),
                  "run: %zu steps, bump_ok=%s worst_violation=%.6g m/s "
                  "final_dv=%.6g final_dy=%.6g p50=%.3gms p95=%.3gms\n",
                  traj.records.size(), rep.bump_speed_ok ? "yes" : "no",
                  rep.worst_bump_violation, rep.final_speed_error, rep.final_lateral_error,
                  rep.solve_time_p50 * 1e3, rep.solve_time_p95 * 1e3);
    out << line;

    if (traj.solver_failed) {
      err << "solver failure: infeasible step " << traj.failed_step << "\n";
      art.exit_code = 2;
    } else if (!rep.bump_speed_ok) {
      err << "compliance failure: bump speed exceeded by " << rep.worst_bump_violation
          << " m/s\n";
      art.exit_code = 1;
    } else {
      art.exit_code = 0;
    }
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    art.exit_code = 2;
  }
  return art;
}

int cmd_oracle_compare(const std::string& scenario_path, int horizon, int trials,
                       std::uint64_t seed, const RunFlags& flags, std::ostream& out,
                       std::ostream& err) {
  Scenario scenario;
  try {
    scenario = load_with_overrides(scenario_path, flags, out);
    scenario.horizon_n = horizon;
    auto violations = validate(scenario);
    if (!violations.empty()) throw ScenarioValidationError(std::move(violations));
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  }

  const VariableLayout lay = layout(horizon, scenario.human_behavior_mode);
  if (lay.n_binary() > 20) {
    err << "config error: oracle cap exceeded (" << lay.n_binary()
        << " binaries, limit 20)\n";
    return 3;
  }

  out << "# oracle-compare seed=" << seed << " horizon=" << horizon
      << " trials=" << trials << " mode="
      << (scenario.human_behavior_mode ? "on" : "off") << "\n";
  if (trials <= 0) {
    out << "warning: no trials requested; vacuous pass\n";
    return 0;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x0_dist(scenario.bump_start - 8.0,
                                                 scenario.bump_end + 2.0);
  std::uniform_real_distribution<double> vx0_dist(
      std::max(scenario.limits.vx_min, 0.3 * scenario.v_max_bump),
      std::min(scenario.limits.vx_max, scenario.v_ref));
  const double lane_lo = scenario.lateral_margin;
  const double lane_hi = scenario.road_width - scenario.lateral_margin;
  std::uniform_real_distribution<double> y0_dist(lane_lo, lane_hi);
  std::uniform_real_distribution<double> vy0_dist(-0.3, 0.3);

  double max_gap = 0.0;
  int disagreements = 0;
  for (int t = 0; t < trials; ++t) {
    VehicleState x0;
    x0.x = x0_dist(rng);
    x0.vx = vx0_dist(rng);
    x0.y = y0_dist(rng);
    const double vy_cap = x0.vx * std::tan(scenario.theta_max);
    x0.vy = std::clamp(vy0_dist(rng), -vy_cap, vy_cap);

    MiqpProblem problem = assemble(scenario, x0);
    MiqpSolution bnb;
    MiqpSolution oracle;
    try {
      bnb = solve_miqp(problem);
      oracle = enumerate_oracle(problem);
    } catch (const std::exception& e) {
      err << "solver failure on trial " << t << ": " << e.what() << "\n";
      return 2;
    }

    char line[256];
    if (bnb.status != oracle.status) {
      ++disagreements;
      std::snprintf(line, sizeof(line), "trial %02d x0=%.4f vx0=%.4f bnb=%s oracle=%s DISAGREE\n",
                    t, x0.x, x0.vx, to_string(bnb.status), to_string(oracle.status));
      out << line;
      continue;
    }
    if (bnb.status == MiqpStatus::optimal) {
      const double gap = std::abs(bnb.objective - oracle.objective) /
                         (1.0 + std::abs(oracle.objective));
      max_gap = std::max(max_gap, gap);
      std::snprintf(line, sizeof(line),
                    "trial %02d x0=%.4f vx0=%.4f bnb=%.9f oracle=%.9f gap=%.3e\n", t, x0.x,
                    x0.vx, bnb.objective, oracle.objective, gap);
    } else {
      std::snprintf(line, sizeof(line), "trial %02d x0=%.4f vx0=%.4f both infeasible\n", t,
                    x0.x, x0.vx);
    }
    out << line;
  }

  char tail[128];
  std::snprintf(tail, sizeof(tail), "max relative gap = %.3e, disagreements = %d\n",
                max_gap, disagreements);
  out << tail;
  return (max_gap <= 1e-6 && disagreements == 0) ? 0 : 1;
}

int cmd_check(const std::string& scenario_path, std::ostream& out, std::ostream& err) {
  try {
    load_scenario_file(scenario_path);
  } catch (const ScenarioValidationError& e) {
    for (const Violation& v : e.violations()) out << v.field << ": " << v.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  }
  out << "ok\n";
  return 0;
}

}  // namespace bumpmpc
