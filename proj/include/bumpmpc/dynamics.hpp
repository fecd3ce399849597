/// Discrete-time triple-integrator vehicle model: step matrices, state
/// propagation, and the decoupled heading post-process.

#ifndef BUMPMPC_DYNAMICS_HPP
#define BUMPMPC_DYNAMICS_HPP

#include <Eigen/Dense>

namespace bumpmpc {

/// Kinematic state. Heading is carried along but updated outside the
/// linear model (see update_heading).
struct VehicleState {
  double x = 0.0, y = 0.0;     ///< position [m]
  double vx = 0.0, vy = 0.0;   ///< velocity [m/s]
  double ax = 0.0, ay = 0.0;   ///< acceleration [m/s^2]
  double theta = 0.0;          ///< heading [rad]

  bool operator==(const VehicleState&) const = default;

  /// Ordering used throughout the planner: (x, vx, ax, y, vy, ay).
  Eigen::Matrix<double, 6, 1> kinematic() const {
    Eigen::Matrix<double, 6, 1> s;
    s << x, vx, ax, y, vy, ay;
    return s;
  }
};

struct ControlInput {
  double jx = 0.0, jy = 0.0;  ///< jerk [m/s^3]

  bool operator==(const ControlInput&) const = default;
};

/// Single-axis discrete matrices and their two-axis block compositions.
struct StepMatrices {
  Eigen::Matrix3d a_d;
  Eigen::Vector3d b_d;
  Eigen::Matrix<double, 6, 6> a_block;
  Eigen::Matrix<double, 6, 2> b_block;
};

/// Below this longitudinal speed the heading update is frozen instead of
/// dividing by vx.
inline constexpr double kHeadingSpeedFloor = 0.1;

/// a_d = [[1, dt, dt^2/2], [0, 1, dt], [0, 0, 1]], b_d = [dt^3/6, dt^2/2, dt],
/// with the block forms acting on (x, vx, ax, y, vy, ay) and (jx, jy).
/// Throws std::invalid_argument for dt <= 0.
StepMatrices build_step_matrices(double dt);

/// theta + dt * vy / vx, frozen when vx < kHeadingSpeedFloor.
double update_heading(double theta, double vx, double vy, double dt);

/// Advances the state one step with the componentwise update equations;
/// heading via update_heading. Throws std::invalid_argument for dt <= 0.
VehicleState propagate(const VehicleState& state, const ControlInput& control, double dt);

}  // namespace bumpmpc

#endif  // BUMPMPC_DYNAMICS_HPP
