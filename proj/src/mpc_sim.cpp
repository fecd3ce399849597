#include "bumpmpc/mpc_sim.hpp"

#include <algorithm>
#include <cmath>

#include "bumpmpc/miqp_builder.hpp"

namespace bumpmpc {

namespace {

// Shifts the solved plan one step forward: states/jerks move up, the tail
// repeats the last state under zero jerk, and the binaries are re-derived
// from the shifted states' predicates so the seed is always logic-consistent.
Eigen::VectorXd shift_plan(const Eigen::VectorXd& prev, const Scenario& s,
                           const VariableLayout& lay, const StepMatrices& m) {
  const int n = lay.horizon_n();
  Eigen::VectorXd ws = prev;

  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 6; ++i) {
      ws[lay.state(k, static_cast<StateVar>(i))] =
          prev[lay.state(k + 1, static_cast<StateVar>(i))];
    }
  }
  Eigen::Matrix<double, 6, 1> tail;
  for (int i = 0; i < 6; ++i) tail[i] = prev[lay.state(n, static_cast<StateVar>(i))];
  tail = m.a_block * tail;
  for (int i = 0; i < 6; ++i) ws[lay.state(n, static_cast<StateVar>(i))] = tail[i];

  for (int k = 0; k + 1 < n; ++k) {
    ws[lay.input(k, InputVar::jx)] = prev[lay.input(k + 1, InputVar::jx)];
    ws[lay.input(k, InputVar::jy)] = prev[lay.input(k + 1, InputVar::jy)];
  }
  ws[lay.input(n - 1, InputVar::jx)] = 0.0;
  ws[lay.input(n - 1, InputVar::jy)] = 0.0;

  for (int k = 0; k <= n; ++k) {
    const double x = ws[lay.state(k, StateVar::x)];
    const double vx = ws[lay.state(k, StateVar::vx)];
    const double vy = ws[lay.state(k, StateVar::vy)];
    const bool d1 = x >= s.bump_start;
    const bool d2 = x <= s.bump_end;
    const bool d3 = s.strict_indicators ? (vx <= s.v_max_bump) : (d1 && d2);
    ws[lay.binary(k, BinaryVar::delta1)] = d1 ? 1.0 : 0.0;
    ws[lay.binary(k, BinaryVar::delta2)] = d2 ? 1.0 : 0.0;
    ws[lay.binary(k, BinaryVar::delta3)] = d3 ? 1.0 : 0.0;
    if (lay.human_behavior_mode()) {
      const bool tl = vy >= s.v_turn;
      const bool tr = vy <= -s.v_turn;
      ws[lay.binary(k, BinaryVar::turn_left)] = tl ? 1.0 : 0.0;
      ws[lay.binary(k, BinaryVar::turn_right)] = tr ? 1.0 : 0.0;
      ws[lay.binary(k, BinaryVar::is_turning)] = (tl || tr) ? 1.0 : 0.0;
    }
  }
  return ws;
}

int rounded_binary(const MiqpSolution& sol, const VariableLayout& lay, int k, BinaryVar v) {
  return static_cast<int>(std::round(std::clamp(sol.primal[lay.binary(k, v)], 0.0, 1.0)));
}

}  // namespace

Trajectory run_mpc(const Scenario& scenario, const BnbConfig& bnb_config) {
  Trajectory traj;
  traj.records.reserve(scenario.sim_steps);

  VehicleState state{scenario.x0, scenario.y0, scenario.vx0, scenario.vy0,
                     scenario.ax0, scenario.ay0, scenario.theta0};
  const StepMatrices matrices = build_step_matrices(scenario.dt);
  std::optional<Eigen::VectorXd> prev_plan;

  for (int k = 0; k < scenario.sim_steps; ++k) {
    MiqpProblem problem = assemble(scenario, state);

    BnbConfig step_config = bnb_config;
    if (prev_plan) {
      step_config.warm_start = shift_plan(*prev_plan, scenario, problem.layout, matrices);
    }

    MiqpSolution sol = solve_miqp(problem, step_config);
    traj.cert.merge(sol.cert);

    TrajectoryRecord rec;
    rec.step = k;
    rec.time = k * scenario.dt;
    rec.state = state;
    rec.status = sol.status;
    rec.solve_time = sol.solve_time;
    rec.nodes_explored = sol.nodes_explored;

    if (sol.status != MiqpStatus::optimal) {
      traj.solver_failed = true;
      traj.failed_step = k;
      traj.records.push_back(rec);
      break;
    }

    const VariableLayout& lay = problem.layout;
    rec.control = {sol.primal[lay.input(0, InputVar::jx)],
                   sol.primal[lay.input(0, InputVar::jy)]};
    rec.delta1 = rounded_binary(sol, lay, 0, BinaryVar::delta1);
    rec.delta2 = rounded_binary(sol, lay, 0, BinaryVar::delta2);
    rec.delta3 = rounded_binary(sol, lay, 0, BinaryVar::delta3);
    if (lay.human_behavior_mode()) {
      rec.turn_left = rounded_binary(sol, lay, 0, BinaryVar::turn_left);
      rec.turn_right = rounded_binary(sol, lay, 0, BinaryVar::turn_right);
      rec.is_turning = rounded_binary(sol, lay, 0, BinaryVar::is_turning);
    }
    traj.records.push_back(rec);

    state = propagate(state, rec.control, scenario.dt);
    prev_plan = sol.primal;
  }
  return traj;
}

ComplianceReport check_trajectory(const Trajectory& traj, const Scenario& scenario) {
  if (traj.records.empty()) {
    throw std::invalid_argument("check_trajectory: empty trajectory");
  }

  ComplianceReport rep;
  std::vector<double> times;
  times.reserve(traj.records.size());

  for (const TrajectoryRecord& rec : traj.records) {
    const VehicleState& s = rec.state;
    if (s.x >= scenario.bump_start && s.x <= scenario.bump_end) {
      rep.worst_bump_violation =
          std::max(rep.worst_bump_violation, s.vx - scenario.v_max_bump);
    }
    rep.max_abs_jx = std::max(rep.max_abs_jx, std::abs(rec.control.jx));
    rep.max_abs_jy = std::max(rep.max_abs_jy, std::abs(rec.control.jy));
    times.push_back(rec.solve_time);
  }
  rep.worst_bump_violation = std::max(rep.worst_bump_violation, 0.0);
  rep.bump_speed_ok = rep.worst_bump_violation <= kBumpSpeedTolerance;

  const VehicleState& last = traj.records.back().state;
  rep.final_speed_error = std::abs(last.vx - scenario.v_ref);
  rep.final_lateral_error = std::abs(last.y - scenario.y_ref);

  std::sort(times.begin(), times.end());
  auto nearest_rank = [&](double q) {
    const size_t n = times.size();
    const size_t idx = static_cast<size_t>(std::ceil(q * n));
    return times[std::min(idx == 0 ? 0 : idx - 1, n - 1)];
  };
  rep.solve_time_p50 = nearest_rank(0.50);
  rep.solve_time_p95 = nearest_rank(0.95);
  rep.solve_time_max = times.back();
  return rep;
}

}  // namespace bumpmpc
