/// Deterministic column layout of the horizon decision vector.
///
/// Continuous block first: states (x, vx, ax, y, vy, ay) for k = 0..N,
/// then jerks (jx, jy) for k = 0..N-1. Binary block after: delta1..delta3
/// for k = 0..N, then (human-behavior mode only) turn_left, turn_right,
/// is_turning for k = 0..N.

#ifndef BUMPMPC_VARIABLE_LAYOUT_HPP
#define BUMPMPC_VARIABLE_LAYOUT_HPP

#include <stdexcept>
#include <string>

namespace bumpmpc {

enum class StateVar { x = 0, vx, ax, y, vy, ay };
enum class InputVar { jx = 0, jy };
enum class BinaryVar { delta1 = 0, delta2, delta3, turn_left, turn_right, is_turning };

class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(int horizon_n, bool human_behavior_mode);

  int horizon_n() const { return horizon_n_; }
  bool human_behavior_mode() const { return human_behavior_mode_; }

  int n_continuous() const { return n_continuous_; }
  int n_binary() const { return n_binary_; }
  int n_total() const { return n_continuous_ + n_binary_; }

  /// Column of a state component, k in 0..N.
  int state(int k, StateVar v) const;
  /// Column of a jerk component, k in 0..N-1.
  int input(int k, InputVar v) const;
  /// Column of a binary, k in 0..N; turning binaries require the mode.
  int binary(int k, BinaryVar v) const;

  /// Human-readable column label, e.g. "vx[3]" or "delta1[0]".
  std::string column_name(int col) const;

  bool operator==(const VariableLayout&) const = default;

 private:
  int horizon_n_ = 0;
  bool human_behavior_mode_ = false;
  int n_continuous_ = 0;
  int n_binary_ = 0;
  int jerk_base_ = 0;
  int binary_base_ = 0;
  int turn_base_ = 0;
};

/// Builds the layout; throws std::invalid_argument for horizon_n < 1.
VariableLayout layout(int horizon_n, bool human_behavior_mode);

}  // namespace bumpmpc

#endif  // BUMPMPC_VARIABLE_LAYOUT_HPP
