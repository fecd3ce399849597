/// Receding-horizon loop: assemble the MIQP at the current state, solve,
/// apply the first control, propagate the plant, repeat; plus the
/// compliance checks run over the logged trajectory.

#ifndef BUMPMPC_MPC_SIM_HPP
#define BUMPMPC_MPC_SIM_HPP

#include <string>
#include <vector>

#include "bumpmpc/bnb_solver.hpp"
#include "bumpmpc/dynamics.hpp"
#include "bumpmpc/scenario.hpp"

namespace bumpmpc {

/// One applied step: the state the control was computed at, the applied
/// control, the step-0 binary activations, and solver statistics.
struct TrajectoryRecord {
  int step = 0;
  double time = 0.0;
  VehicleState state;
  ControlInput control;
  int delta1 = 0, delta2 = 0, delta3 = 0;
  int turn_left = 0, turn_right = 0, is_turning = 0;  // mode on only
  MiqpStatus status = MiqpStatus::optimal;
  double solve_time = 0.0;  ///< seconds
  std::int64_t nodes_explored = 0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  bool solver_failed = false;
  int failed_step = -1;
  QpCertSummary cert;  ///< aggregated over every QP solved in the run
};

/// Tolerance applied when judging bump-speed compliance [m/s].
inline constexpr double kBumpSpeedTolerance = 1e-3;

struct ComplianceReport {
  bool bump_speed_ok = true;
  double worst_bump_violation = 0.0;  ///< max(vx - v_max_bump) in-window [m/s]
  double max_abs_jx = 0.0, max_abs_jy = 0.0;
  double final_speed_error = 0.0;    ///< |vx - v_ref| at the last record
  double final_lateral_error = 0.0;  ///< |y - y_ref| at the last record
  double solve_time_p50 = 0.0, solve_time_p95 = 0.0, solve_time_max = 0.0;  ///< seconds
};

/// Runs the closed loop for scenario.sim_steps iterations with horizon
/// scenario.horizon_n, shifting the previous plan as the warm start. An
/// infeasible step terminates the run with the partial trajectory and a
/// failure marker.
Trajectory run_mpc(const Scenario& scenario, const BnbConfig& bnb_config = {});

/// Pure function over the logs. Throws std::invalid_argument on an empty
/// trajectory.
ComplianceReport check_trajectory(const Trajectory& trajectory, const Scenario& scenario);

}  // namespace bumpmpc

#endif  // BUMPMPC_MPC_SIM_HPP
