#include "bumpmpc/run_io.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace bumpmpc {

namespace {

std::string g12(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj, bool human_behavior_mode) {
  std::ostringstream os;
  os << "k,t,x,y,vx,vy,ax,ay,jx,jy,theta,delta1,delta2,delta3,"
        "turn_left,turn_right,is_turning,status,solve_time_ms,nodes\n";
  for (const TrajectoryRecord& r : traj.records) {
    const VehicleState& s = r.state;
    os << r.step << ',' << g12(r.time) << ',' << g12(s.x) << ',' << g12(s.y) << ','
       << g12(s.vx) << ',' << g12(s.vy) << ',' << g12(s.ax) << ',' << g12(s.ay) << ','
       << g12(r.control.jx) << ',' << g12(r.control.jy) << ',' << g12(s.theta) << ','
       << r.delta1 << ',' << r.delta2 << ',' << r.delta3 << ',';
    if (human_behavior_mode) {
      os << r.turn_left << ',' << r.turn_right << ',' << r.is_turning << ',';
    } else {
      os << ",,,";
    }
    os << to_string(r.status) << ',' << ',' << r.nodes_explored << '\n';
  }
  return os.str();
}

std::string report_json(const ComplianceReport& rep, const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["bump_speed_ok"] = rep.bump_speed_ok;
  j["worst_bump_violation_mps"] = rep.worst_bump_violation;
  j["max_abs_jerk_x"] = rep.max_abs_jx;
  j["max_abs_jerk_y"] = rep.max_abs_jy;
  j["final_speed_error_mps"] = rep.final_speed_error;
  j["final_lateral_error_m"] = rep.final_lateral_error;
  j["solve_time_ms"] = {{"p50", rep.solve_time_p50 * 1e3},
                        {"p95", rep.solve_time_p95 * 1e3},
                        {"max", rep.solve_time_max * 1e3}};
  j["steps"] = traj.records.size();
  j["solver_failed"] = traj.solver_failed;
  if (traj.solver_failed) j["failed_step"] = traj.failed_step;
  j["qp_certification"] = {{"optimal_solves", traj.cert.optimal_solves},
                           {"certified_solves", traj.cert.certified_solves},
                           {"worst_stationarity", traj.cert.worst.stationarity},
                           {"worst_primal", traj.cert.worst.primal},
                           {"worst_complementarity", traj.cert.worst.complementarity}};
  return j.dump(2) + "\n";
}

std::string plot_data(const Trajectory& traj) {
  std::ostringstream os;
  os << "# t x y vx vy ax ay jx jy\n";
  for (const TrajectoryRecord& r : traj.records) {
    const VehicleState& s = r.state;
    os << g12(r.time) << ' ' << g12(s.x) << ' ' << g12(s.y) << ' ' << g12(s.vx) << ' '
       << g12(s.vy) << ' ' << g12(s.ax) << ' ' << g12(s.ay) << ' ' << g12(r.control.jx)
       << ' ' << g12(r.control.jy) << '\n';
  }
  return os.str();
}

}  // namespace bumpmpc
