#include "bumpmpc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace bumpmpc {

StepMatrices build_step_matrices(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("build_step_matrices: dt must be > 0");

  StepMatrices m;
  m.a_d << 1.0, dt, 0.5 * dt * dt,
           0.0, 1.0, dt,
           0.0, 0.0, 1.0;
  m.b_d << dt * dt * dt / 6.0, 0.5 * dt * dt, dt;

  m.a_block.setZero();
  m.a_block.topLeftCorner<3, 3>() = m.a_d;
  m.a_block.bottomRightCorner<3, 3>() = m.a_d;
  m.b_block.setZero();
  m.b_block.col(0).head<3>() = m.b_d;
  m.b_block.col(1).tail<3>() = m.b_d;
  return m;
}

double update_heading(double theta, double vx, double vy, double dt) {
  if (vx < kHeadingSpeedFloor) return theta;
  return theta + dt * (vy / vx);
}

VehicleState propagate(const VehicleState& s, const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be > 0");

  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;

  VehicleState next;
  next.x = s.x + s.vx * dt + 0.5 * s.ax * dt2 + u.jx * dt3 / 6.0;
  next.y = s.y + s.vy * dt + 0.5 * s.ay * dt2 + u.jy * dt3 / 6.0;
  next.vx = s.vx + s.ax * dt + 0.5 * u.jx * dt2;
  next.vy = s.vy + s.ay * dt + 0.5 * u.jy * dt2;
  next.ax = s.ax + u.jx * dt;
  next.ay = s.ay + u.jy * dt;
  next.theta = update_heading(s.theta, s.vx, s.vy, dt);
  return next;
}

}  // namespace bumpmpc
