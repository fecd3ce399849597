/// Scenario definition: every parameter a planning run consumes, loaded from
/// a flat key/value config file and validated against the model's invariants.

#ifndef BUMPMPC_SCENARIO_HPP
#define BUMPMPC_SCENARIO_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bumpmpc {

/// Cost coefficients of the tracking objective (all dimensionless, >= 0).
struct Weights {
  double q1 = 0.0;  ///< longitudinal velocity deviation
  double q2 = 0.0;  ///< longitudinal acceleration
  double q3 = 0.0;  ///< lateral position deviation
  double q4 = 0.0;  ///< lateral velocity
  double q5 = 0.0;  ///< lateral acceleration
  double r1 = 0.0;  ///< longitudinal jerk
  double r2 = 0.0;  ///< lateral jerk

  bool operator==(const Weights&) const = default;
};

/// Per-component box bounds on states (x, vx, ax, y, vy, ay) and
/// controls (jx, jy). Units follow the component.
struct Limits {
  double x_min = -10.0, x_max = 10000.0;
  double vx_min = 0.0, vx_max = 20.0;
  double ax_min = -3.0, ax_max = 3.0;
  double y_min = 0.0, y_max = 1e30;  // y_max defaults to road_width at parse
  double vy_min = -3.0, vy_max = 3.0;
  double ay_min = -4.0, ay_max = 4.0;
  double jx_min = -10.0, jx_max = 10.0;
  double jy_min = -10.0, jy_max = 10.0;

  bool operator==(const Limits&) const = default;
};

struct Scenario {
  // timing
  double dt = 0.0;      ///< step length [s]
  int horizon_n = 30;   ///< prediction steps per solve
  int sim_steps = 0;    ///< closed-loop iterations

  // road geometry
  double road_width = 0.0;      ///< [m]
  double lateral_margin = 0.25; ///< keep-in shrink per side [m]

  // initial state
  double x0 = 0.0, y0 = 0.0;        ///< [m]
  double vx0 = 0.0, vy0 = 0.0;      ///< [m/s]
  double ax0 = 0.0, ay0 = 0.0;      ///< [m/s^2]
  double theta0 = 0.0;              ///< [rad]

  // references
  double v_ref = 0.0;  ///< [m/s]
  double y_ref = 0.0;  ///< [m]; defaults to y0 when absent from the file

  // speed bump window
  double bump_start = 0.0, bump_end = 0.0;  ///< [m]
  double v_max_bump = 0.0;                  ///< speed cap on the bump [m/s]
  double v_turn = 0.0;                      ///< turn-detection threshold [m/s]

  // steering geometry (wheelbase is stored for config fidelity; the linear
  // model never reads it)
  double wheelbase = 2.7;       ///< [m]
  double theta_min = -0.5236;   ///< [rad]
  double theta_max = 0.5236;    ///< [rad]
  double omega_max = 0.5;       ///< steering-rate bound [rad/s]

  Weights weights;
  Limits limits;

  bool human_behavior_mode = false;  ///< enables the turning binaries
  bool strict_indicators = false;    ///< biconditional delta3 encoding

  double big_m = 1000.0;
  double epsilon = 1e-4;

  bool operator==(const Scenario&) const = default;
};

/// One violated invariant; `field` names the offending scenario key.
struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Thrown on malformed config text (syntax, unknown/duplicate keys,
/// non-numeric values, missing required keys).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a parsed scenario fails validation; carries the full list.
class ScenarioValidationError : public ScenarioError {
 public:
  explicit ScenarioValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Parses the flat `key = value` format (one pair per line, `#` comments).
/// Missing optional keys take the documented defaults; the result is
/// validated and a ScenarioValidationError is thrown if any invariant fails.
Scenario parse_scenario(std::string_view config_text);

/// Returns every violated invariant, ordered by field name (empty = valid).
std::vector<Violation> validate(const Scenario& scenario);

/// Emits the complete key/value form; parse_scenario(serialize_scenario(s))
/// reproduces s exactly (numerals at 17 significant digits).
std::string serialize_scenario(const Scenario& scenario);

/// Reads and parses a scenario file from disk.
Scenario load_scenario_file(const std::string& path);

}  // namespace bumpmpc

#endif  // BUMPMPC_SCENARIO_HPP
