#include "bumpmpc/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace bumpmpc {

namespace {

struct KeySpec {
  const char* name = nullptr;
  bool required = false;
  bool Scenario::* flag = nullptr;                // boolean keys
  std::function<double*(Scenario&)> nested = {};  // numeric keys
};

// Canonical key order; also the serialization order.
std::vector<KeySpec> key_table() {
  auto n = [](const char* name, bool req, auto member) {
    KeySpec k;
    k.name = name;
    k.required = req;
    k.nested = [member](Scenario& s) -> double* { return &(s.*member); };
    return k;
  };
  auto w = [](const char* name, double Weights::* member) {
    KeySpec k;
    k.name = name;
    k.required = true;
    k.nested = [member](Scenario& s) -> double* { return &(s.weights.*member); };
    return k;
  };
  auto l = [](const char* name, double Limits::* member) {
    KeySpec k;
    k.name = name;
    k.nested = [member](Scenario& s) -> double* { return &(s.limits.*member); };
    return k;
  };
  auto b = [](const char* name, bool Scenario::* member) {
    KeySpec k;
    k.name = name;
    k.flag = member;
    return k;
  };
  std::vector<KeySpec> t;
  t.push_back(n("dt", true, &Scenario::dt));
  {
    KeySpec k;  // handled as an integer below
    k.name = "horizon_n";
    t.push_back(k);
  }
  {
    KeySpec k;
    k.name = "sim_steps";
    k.required = true;
    t.push_back(k);
  }
  t.push_back(n("road_width", true, &Scenario::road_width));
  t.push_back(n("lateral_margin", false, &Scenario::lateral_margin));
  t.push_back(n("x0", true, &Scenario::x0));
  t.push_back(n("y0", true, &Scenario::y0));
  t.push_back(n("vx0", true, &Scenario::vx0));
  t.push_back(n("vy0", false, &Scenario::vy0));
  t.push_back(n("ax0", false, &Scenario::ax0));
  t.push_back(n("ay0", false, &Scenario::ay0));
  t.push_back(n("theta0", false, &Scenario::theta0));
  t.push_back(n("v_ref", true, &Scenario::v_ref));
  t.push_back(n("y_ref", false, &Scenario::y_ref));
  t.push_back(n("bump_start", true, &Scenario::bump_start));
  t.push_back(n("bump_end", true, &Scenario::bump_end));
  t.push_back(n("v_max_bump", true, &Scenario::v_max_bump));
  t.push_back(n("v_turn", true, &Scenario::v_turn));
  t.push_back(n("wheelbase", false, &Scenario::wheelbase));
  t.push_back(n("theta_min", false, &Scenario::theta_min));
  t.push_back(n("theta_max", false, &Scenario::theta_max));
  t.push_back(n("omega_max", false, &Scenario::omega_max));
  t.push_back(w("q1", &Weights::q1));
  t.push_back(w("q2", &Weights::q2));
  t.push_back(w("q3", &Weights::q3));
  t.push_back(w("q4", &Weights::q4));
  t.push_back(w("q5", &Weights::q5));
  t.push_back(w("r1", &Weights::r1));
  t.push_back(w("r2", &Weights::r2));
  t.push_back(l("x_min", &Limits::x_min));
  t.push_back(l("x_max", &Limits::x_max));
  t.push_back(l("vx_min", &Limits::vx_min));
  t.push_back(l("vx_max", &Limits::vx_max));
  t.push_back(l("ax_min", &Limits::ax_min));
  t.push_back(l("ax_max", &Limits::ax_max));
  t.push_back(l("y_min", &Limits::y_min));
  t.push_back(l("y_max", &Limits::y_max));
  t.push_back(l("vy_min", &Limits::vy_min));
  t.push_back(l("vy_max", &Limits::vy_max));
  t.push_back(l("ay_min", &Limits::ay_min));
  t.push_back(l("ay_max", &Limits::ay_max));
  t.push_back(l("jx_min", &Limits::jx_min));
  t.push_back(l("jx_max", &Limits::jx_max));
  t.push_back(l("jy_min", &Limits::jy_min));
  t.push_back(l("jy_max", &Limits::jy_max));
  t.push_back(b("human_behavior_mode", &Scenario::human_behavior_mode));
  t.push_back(b("strict_indicators", &Scenario::strict_indicators));
  t.push_back(n("big_m", false, &Scenario::big_m));
  t.push_back(n("epsilon", false, &Scenario::epsilon));
  return t;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view value, int line, const std::string& key) {
  std::string buf(value);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end == buf.c_str() || *end != '\0') {
    throw ScenarioError("line " + std::to_string(line) + ": non-numeric value for key " + key);
  }
  return v;
}

bool parse_bool(std::string_view value, int line, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ScenarioError("line " + std::to_string(line) + ": expected true/false for key " + key);
}

int parse_count(std::string_view value, int line, const std::string& key) {
  double v = parse_number(value, line, key);
  double r = std::nearbyint(v);
  if (!std::isfinite(v) || std::abs(v - r) > 0.0) {
    throw ScenarioError("line " + std::to_string(line) + ": expected an integer for key " + key);
  }
  return static_cast<int>(r);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check(std::vector<Violation>& out, bool ok, std::string field, std::string message) {
  if (!ok) out.push_back({std::move(field), std::move(message)});
}

}  // namespace

ScenarioValidationError::ScenarioValidationError(std::vector<Violation> violations)
    : ScenarioError([&violations] {
        std::string msg = "invalid scenario:";
        for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
        return msg;
      }()),
      violations_(std::move(violations)) {}

Scenario parse_scenario(std::string_view config_text) {
  const auto table = key_table();
  Scenario s;
  std::set<std::string> seen;
  bool saw_y_ref = false, saw_y_max = false;

  int line_no = 0;
  std::string_view rest = config_text;
  while (!rest.empty()) {
    ++line_no;
    auto nl = rest.find('\n');
    std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);

    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ScenarioError("line " + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ScenarioError("line " + std::to_string(line_no) + ": expected `key = value`");
    }
    if (!seen.insert(key).second) {
      throw ScenarioError("line " + std::to_string(line_no) + ": duplicate key " + key);
    }

    auto it = std::find_if(table.begin(), table.end(),
                           [&](const KeySpec& k) { return key == k.name; });
    if (it == table.end()) {
      throw ScenarioError("line " + std::to_string(line_no) + ": unknown key " + key);
    }
    if (key == "horizon_n") {
      s.horizon_n = parse_count(value, line_no, key);
    } else if (key == "sim_steps") {
      s.sim_steps = parse_count(value, line_no, key);
    } else if (it->flag != nullptr) {
      s.*(it->flag) = parse_bool(value, line_no, key);
    } else {
      *(it->nested(s)) = parse_number(value, line_no, key);
    }
    if (key == "y_ref") saw_y_ref = true;
    if (key == "y_max") saw_y_max = true;
  }

  for (const auto& k : table) {
    if (k.required && seen.find(k.name) == seen.end()) {
      throw ScenarioError(std::string("missing required key ") + k.name);
    }
  }

  if (!saw_y_ref) s.y_ref = s.y0;
  if (!saw_y_max) s.limits.y_max = s.road_width;

  auto violations = validate(s);
  if (!violations.empty()) throw ScenarioValidationError(std::move(violations));
  return s;
}

std::vector<Violation> validate(const Scenario& s) {
  std::vector<Violation> out;

  check(out, s.dt > 0.0, "dt", "must be > 0 (got " + fmt17(s.dt) + ")");
  check(out, s.horizon_n >= 1, "horizon_n", "must be >= 1");
  check(out, s.sim_steps >= 1, "sim_steps", "must be >= 1");

  check(out, s.bump_start < s.bump_end, "bump_start",
        "must be < bump_end (got [" + fmt17(s.bump_start) + ", " + fmt17(s.bump_end) + "])");
  if (!(s.v_max_bump > 0.0)) {
    out.push_back({"v_max_bump", "must be > 0"});
  } else {
    check(out, s.v_max_bump <= s.limits.vx_max, "v_max_bump",
          "must be <= vx_max (" + fmt17(s.limits.vx_max) + ")");
  }
  check(out, s.v_turn > 0.0, "v_turn", "must be > 0");

  check(out, s.lateral_margin >= 0.0, "lateral_margin", "must be >= 0");
  check(out, s.road_width - 2.0 * s.lateral_margin > 0.0, "road_width",
        "road_width - 2*lateral_margin must be > 0");
  const double lane_lo = s.lateral_margin;
  const double lane_hi = s.road_width - s.lateral_margin;
  check(out, s.y0 >= lane_lo && s.y0 <= lane_hi, "y0",
        "must lie in [" + fmt17(lane_lo) + ", " + fmt17(lane_hi) + "]");
  check(out, s.y_ref >= lane_lo && s.y_ref <= lane_hi, "y_ref",
        "must lie in [" + fmt17(lane_lo) + ", " + fmt17(lane_hi) + "]");

  check(out, s.theta_min < 0.0, "theta_min", "must be < 0");
  check(out, s.theta_max > 0.0, "theta_max", "must be > 0");
  check(out, s.omega_max > 0.0, "omega_max", "must be > 0");
  check(out, s.big_m > 0.0, "big_m", "must be > 0");
  check(out, s.epsilon > 0.0 && s.epsilon < 1.0, "epsilon", "must lie in (0, 1)");

  const std::pair<const char*, double> weights[] = {
      {"q1", s.weights.q1}, {"q2", s.weights.q2}, {"q3", s.weights.q3},
      {"q4", s.weights.q4}, {"q5", s.weights.q5}, {"r1", s.weights.r1},
      {"r2", s.weights.r2}};
  double weight_sum = 0.0;
  for (const auto& [name, v] : weights) {
    check(out, v >= 0.0, name, "must be >= 0");
    weight_sum += v;
  }
  check(out, weight_sum > 0.0, "weights", "at least one cost coefficient must be > 0");

  const std::tuple<const char*, double, double> boxes[] = {
      {"x", s.limits.x_min, s.limits.x_max},   {"vx", s.limits.vx_min, s.limits.vx_max},
      {"ax", s.limits.ax_min, s.limits.ax_max}, {"y", s.limits.y_min, s.limits.y_max},
      {"vy", s.limits.vy_min, s.limits.vy_max}, {"ay", s.limits.ay_min, s.limits.ay_max},
      {"jx", s.limits.jx_min, s.limits.jx_max}, {"jy", s.limits.jy_min, s.limits.jy_max}};
  for (const auto& [name, lo, hi] : boxes) {
    check(out, lo <= hi, std::string(name) + "_min", "lower bound exceeds upper bound");
  }
  check(out, s.limits.vx_min >= 0.0, "vx_min", "must be >= 0 (no reversing)");

  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return a.field == b.field ? a.message < b.message : a.field < b.field;
  });
  return out;
}

std::string serialize_scenario(const Scenario& s) {
  // const_cast is confined to reading through the accessor table
  Scenario& m = const_cast<Scenario&>(s);
  std::string out;
  for (const auto& k : key_table()) {
    out += k.name;
    out += " = ";
    if (std::string_view(k.name) == "horizon_n") {
      out += std::to_string(s.horizon_n);
    } else if (std::string_view(k.name) == "sim_steps") {
      out += std::to_string(s.sim_steps);
    } else if (k.flag != nullptr) {
      out += (s.*(k.flag)) ? "true" : "false";
    } else {
      out += fmt17(*(k.nested(m)));
    }
    out += '\n';
  }
  return out;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace bumpmpc
