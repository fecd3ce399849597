/// Writers for the run artifacts: trajectory CSV, compliance report JSON,
/// and the plot-ready data file. All numeric fields are formatted at 12
/// significant digits so identical runs serialize byte-identically.

#ifndef BUMPMPC_RUN_IO_HPP
#define BUMPMPC_RUN_IO_HPP

#include <string>

#include "bumpmpc/mpc_sim.hpp"

namespace bumpmpc {

/// Header: k,t,x,y,vx,vy,ax,ay,jx,jy,theta,delta1,delta2,delta3,turn_left,
/// turn_right,is_turning,status,solve_time_ms,nodes. The turning columns are
/// empty-valued when the mode is off; solve_time_ms is always empty-valued
/// (wall time cannot be byte-reproducible; timings live in the report).
std::string trajectory_csv(const Trajectory& trajectory, bool human_behavior_mode);

/// JSON document mirroring the ComplianceReport fields (times in ms).
std::string report_json(const ComplianceReport& report, const Trajectory& trajectory);

/// Whitespace-separated columns t x y vx vy ax ay jx jy for external plotting.
std::string plot_data(const Trajectory& trajectory);

}  // namespace bumpmpc

#endif  // BUMPMPC_RUN_IO_HPP
