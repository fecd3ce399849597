#include "bumpmpc/variable_layout.hpp"

namespace bumpmpc {

namespace {
const char* kStateNames[] = {"x", "vx", "ax", "y", "vy", "ay"};
const char* kInputNames[] = {"jx", "jy"};
const char* kBinaryNames[] = {"delta1", "delta2", "delta3",
                              "turn_left", "turn_right", "is_turning"};
}  // namespace

VariableLayout::VariableLayout(int horizon_n, bool human_behavior_mode)
    : horizon_n_(horizon_n), human_behavior_mode_(human_behavior_mode) {
  if (horizon_n < 1) throw std::invalid_argument("layout: horizon_n must be >= 1");
  const int n = horizon_n;
  jerk_base_ = 6 * (n + 1);
  n_continuous_ = 6 * (n + 1) + 2 * n;
  binary_base_ = n_continuous_;
  turn_base_ = binary_base_ + 3 * (n + 1);
  n_binary_ = human_behavior_mode ? 6 * (n + 1) : 3 * (n + 1);
}

int VariableLayout::state(int k, StateVar v) const {
  if (k < 0 || k > horizon_n_) throw std::out_of_range("layout: state step out of range");
  return 6 * k + static_cast<int>(v);
}

int VariableLayout::input(int k, InputVar v) const {
  if (k < 0 || k >= horizon_n_) throw std::out_of_range("layout: input step out of range");
  return jerk_base_ + 2 * k + static_cast<int>(v);
}

int VariableLayout::binary(int k, BinaryVar v) const {
  if (k < 0 || k > horizon_n_) throw std::out_of_range("layout: binary step out of range");
  const int idx = static_cast<int>(v);
  if (idx < 3) return binary_base_ + 3 * k + idx;
  if (!human_behavior_mode_) {
    throw std::logic_error("layout: turning binaries only exist in human-behavior mode");
  }
  return turn_base_ + 3 * k + (idx - 3);
}

std::string VariableLayout::column_name(int col) const {
  if (col < 0 || col >= n_total()) throw std::out_of_range("layout: column out of range");
  if (col < jerk_base_) {
    return std::string(kStateNames[col % 6]) + "[" + std::to_string(col / 6) + "]";
  }
  if (col < binary_base_) {
    const int off = col - jerk_base_;
    return std::string(kInputNames[off % 2]) + "[" + std::to_string(off / 2) + "]";
  }
  if (col < turn_base_ || !human_behavior_mode_) {
    const int off = col - binary_base_;
    return std::string(kBinaryNames[off % 3]) + "[" + std::to_string(off / 3) + "]";
  }
  const int off = col - turn_base_;
  return std::string(kBinaryNames[3 + off % 3]) + "[" + std::to_string(off / 3) + "]";
}

VariableLayout layout(int horizon_n, bool human_behavior_mode) {
  return VariableLayout(horizon_n, human_behavior_mode);
}

}  // namespace bumpmpc
