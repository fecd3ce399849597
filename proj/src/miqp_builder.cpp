#include "bumpmpc/miqp_builder.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace bumpmpc {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMat make_sparse(int rows, int cols, const Triplets& t) {
  SparseMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

// One-sided indicator encodings, G z <= g form. `var` is the constrained
// continuous column, `bin` the indicator column.
struct RowSink {
  Triplets* t;
  std::vector<double>* rhs;
  void add2(int var, double a, int bin, double b, double g) {
    const int r = static_cast<int>(rhs->size());
    t->emplace_back(r, var, a);
    t->emplace_back(r, bin, b);
    rhs->push_back(g);
  }
  void add3(int c0, double a0, int c1, double a1, int c2, double a2, double g) {
    const int r = static_cast<int>(rhs->size());
    t->emplace_back(r, c0, a0);
    t->emplace_back(r, c1, a1);
    t->emplace_back(r, c2, a2);
    rhs->push_back(g);
  }
};

struct Interval {
  double lo, hi;
  bool empty() const { return lo > hi; }
};

// Branch intervals of an indicator encoding over the variable's box.
Interval active_ge(double c, double lo, double hi, double m, double eps) {
  return {std::max(lo, c), std::min(hi, c - eps + m)};
}
Interval inactive_ge(double c, double lo, double hi, double m, double eps) {
  return {std::max(lo, c - m), std::min(hi, c - eps)};
}
Interval active_le(double c, double lo, double hi, double m, double eps) {
  return {std::max(lo, c + eps - m), std::min(hi, c)};
}
Interval inactive_le(double c, double lo, double hi, double m, double eps) {
  return {std::max(lo, c + eps), std::min(hi, c + m)};
}

// Rejects encodings whose branch becomes unsatisfiable because of the
// chosen big_m (a branch empty for geometric reasons, e.g. a threshold
// outside the box, just pins the binary and is allowed).
void check_indicator(const char* name, bool ge, bool two_sided, double c,
                     double lo, double hi, double m, double eps) {
  const double m_ref = (hi - lo) + 2.0 * eps + 1.0;
  auto reject = [&](const char* branch) {
    throw BuildError(std::string("build_bump_logic: big_m=") + std::to_string(m) +
                     " leaves the " + branch + " branch of " + name +
                     " unsatisfiable over its box");
  };
  if (ge) {
    if (active_ge(c, lo, hi, m, eps).empty() && !active_ge(c, lo, hi, m_ref, eps).empty())
      reject("active");
    if (inactive_ge(c, lo, hi, m, eps).empty() && !inactive_ge(c, lo, hi, m_ref, eps).empty())
      reject("inactive");
  } else {
    Interval a = two_sided ? active_le(c, lo, hi, m, eps) : Interval{lo, std::min(hi, c)};
    Interval a_ref = two_sided ? active_le(c, lo, hi, m_ref, eps) : a;
    if (a.empty() && !a_ref.empty()) reject("active");
    Interval i = two_sided ? inactive_le(c, lo, hi, m, eps)
                           : Interval{lo, std::min(hi, c + m)};
    Interval i_ref = two_sided ? inactive_le(c, lo, hi, m_ref, eps)
                               : Interval{lo, std::min(hi, c + m_ref)};
    if (i.empty() && !i_ref.empty()) reject("inactive");
  }
}

}  // namespace

ObjectiveTerms build_objective(const Scenario& s, const VariableLayout& lay) {
  const int n = lay.horizon_n();
  Triplets t;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(lay.n_total());
  const Weights& w = s.weights;

  for (int k = 0; k < n; ++k) {
    auto diag = [&](int col, double q) {
      if (q != 0.0) t.emplace_back(col, col, 2.0 * q);
    };
    diag(lay.state(k, StateVar::vx), w.q1);
    diag(lay.state(k, StateVar::ax), w.q2);
    diag(lay.state(k, StateVar::y), w.q3);
    diag(lay.state(k, StateVar::vy), w.q4);
    diag(lay.state(k, StateVar::ay), w.q5);
    diag(lay.input(k, InputVar::jx), w.r1);
    diag(lay.input(k, InputVar::jy), w.r2);
    h[lay.state(k, StateVar::vx)] = -2.0 * w.q1 * s.v_ref;
    h[lay.state(k, StateVar::y)] = -2.0 * w.q3 * s.y_ref;
  }

  ObjectiveTerms out;
  out.h_matrix = make_sparse(lay.n_total(), lay.n_total(), t);
  out.h_vec = std::move(h);
  out.constant = n * (w.q1 * s.v_ref * s.v_ref + w.q3 * s.y_ref * s.y_ref);
  return out;
}

EqualityRows build_dynamics_constraints(const VehicleState& x0, const Scenario& s,
                                        const VariableLayout& lay) {
  const int n = lay.horizon_n();
  const StepMatrices m = build_step_matrices(s.dt);
  Triplets t;
  std::vector<double> rhs;

  const Eigen::Matrix<double, 6, 1> s0 = x0.kinematic();
  for (int i = 0; i < 6; ++i) {
    t.emplace_back(i, lay.state(0, static_cast<StateVar>(i)), 1.0);
    rhs.push_back(s0[i]);
  }

  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 6; ++i) {
      const int row = static_cast<int>(rhs.size());
      t.emplace_back(row, lay.state(k + 1, static_cast<StateVar>(i)), 1.0);
      for (int j = 0; j < 6; ++j) {
        const double a = m.a_block(i, j);
        if (a != 0.0) t.emplace_back(row, lay.state(k, static_cast<StateVar>(j)), -a);
      }
      for (int j = 0; j < 2; ++j) {
        const double b = m.b_block(i, j);
        if (b != 0.0) t.emplace_back(row, lay.input(k, static_cast<InputVar>(j)), -b);
      }
      rhs.push_back(0.0);
    }
  }

  EqualityRows out;
  out.f_matrix = make_sparse(static_cast<int>(rhs.size()), lay.n_total(), t);
  out.f_vec = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<int>(rhs.size()));
  return out;
}

BoxBounds build_bounds(const Scenario& s, const VariableLayout& lay) {
  const int n = lay.horizon_n();
  const Limits& L = s.limits;
  BoxBounds b;
  b.lb = Eigen::VectorXd::Zero(lay.n_total());
  b.ub = Eigen::VectorXd::Zero(lay.n_total());

  const double y_lo = std::max(L.y_min, s.lateral_margin);
  const double y_hi = std::min(L.y_max, s.road_width - s.lateral_margin);

  for (int k = 0; k <= n; ++k) {
    auto box = [&](StateVar v, double lo, double hi) {
      b.lb[lay.state(k, v)] = lo;
      b.ub[lay.state(k, v)] = hi;
    };
    box(StateVar::x, L.x_min, L.x_max);
    box(StateVar::vx, L.vx_min, L.vx_max);
    box(StateVar::ax, L.ax_min, L.ax_max);
    box(StateVar::y, y_lo, y_hi);
    box(StateVar::vy, L.vy_min, L.vy_max);
    box(StateVar::ay, L.ay_min, L.ay_max);
  }
  for (int k = 0; k < n; ++k) {
    b.lb[lay.input(k, InputVar::jx)] = L.jx_min;
    b.ub[lay.input(k, InputVar::jx)] = L.jx_max;
    b.lb[lay.input(k, InputVar::jy)] = L.jy_min;
    b.ub[lay.input(k, InputVar::jy)] = L.jy_max;
  }
  for (int col = lay.n_continuous(); col < lay.n_total(); ++col) {
    b.lb[col] = 0.0;
    b.ub[col] = 1.0;
  }
  return b;
}

InequalityRows build_nonholonomic(const Scenario& s, const VariableLayout& lay) {
  const int n = lay.horizon_n();
  const double tan_max = std::tan(s.theta_max);
  const double tan_min = std::tan(s.theta_min);
  Triplets t;
  std::vector<double> rhs;
  RowSink sink{&t, &rhs};

  for (int k = 0; k <= n; ++k) {
    const int vx = lay.state(k, StateVar::vx);
    const int vy = lay.state(k, StateVar::vy);
    const int ay = lay.state(k, StateVar::ay);
    sink.add2(vy, 1.0, vx, -tan_max, 0.0);   // vy <= tan(theta_max) vx
    sink.add2(vy, -1.0, vx, tan_min, 0.0);   // vy >= tan(theta_min) vx
    sink.add2(ay, 1.0, vx, -s.omega_max, 0.0);
    sink.add2(ay, -1.0, vx, -s.omega_max, 0.0);
  }

  InequalityRows out;
  out.g_matrix = make_sparse(static_cast<int>(rhs.size()), lay.n_total(), t);
  out.g_vec = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<int>(rhs.size()));
  return out;
}

BumpLogicRows build_bump_logic(const Scenario& s, const VariableLayout& lay) {
  const int n = lay.horizon_n();
  const double m = s.big_m;
  const double eps = s.epsilon;
  const Limits& L = s.limits;

  check_indicator("delta1 (x >= bump_start)", true, true, s.bump_start, L.x_min, L.x_max, m, eps);
  check_indicator("delta2 (x <= bump_end)", false, true, s.bump_end, L.x_min, L.x_max, m, eps);
  check_indicator("delta3 (vx <= v_max_bump)", false, s.strict_indicators, s.v_max_bump,
                  L.vx_min, L.vx_max, m, eps);
  if (lay.human_behavior_mode()) {
    check_indicator("turn_left (vy >= v_turn)", true, true, s.v_turn, L.vy_min, L.vy_max, m, eps);
    check_indicator("turn_right (vy <= -v_turn)", false, true, -s.v_turn, L.vy_min, L.vy_max, m,
                    eps);
  }

  Triplets t;
  std::vector<double> rhs;
  RowSink sink{&t, &rhs};

  for (int k = 0; k <= n; ++k) {
    const int x = lay.state(k, StateVar::x);
    const int vx = lay.state(k, StateVar::vx);
    const int d1 = lay.binary(k, BinaryVar::delta1);
    const int d2 = lay.binary(k, BinaryVar::delta2);
    const int d3 = lay.binary(k, BinaryVar::delta3);

    // delta1 = 1  <=>  x >= bump_start
    sink.add2(x, -1.0, d1, m, m - s.bump_start);
    sink.add2(x, 1.0, d1, -m, s.bump_start - eps);
    // delta2 = 1  <=>  x <= bump_end
    sink.add2(x, 1.0, d2, m, s.bump_end + m);
    sink.add2(x, -1.0, d2, -m, -(s.bump_end + eps));
    // delta3 = 1  =>  vx <= v_max_bump (both directions when strict)
    sink.add2(vx, 1.0, d3, m, s.v_max_bump + m);
    if (s.strict_indicators) {
      sink.add2(vx, -1.0, d3, -m, -(s.v_max_bump + eps));
    }
    // linking rows
    sink.add2(d3, 1.0, d1, -1.0, 0.0);
    sink.add2(d3, 1.0, d2, -1.0, 0.0);
    sink.add3(d1, 1.0, d2, 1.0, d3, -1.0, 1.0);

    if (lay.human_behavior_mode()) {
      const int vy = lay.state(k, StateVar::vy);
      const int tl = lay.binary(k, BinaryVar::turn_left);
      const int tr = lay.binary(k, BinaryVar::turn_right);
      const int it = lay.binary(k, BinaryVar::is_turning);

      // turn_left = 1  <=>  vy >= v_turn
      sink.add2(vy, -1.0, tl, m, m - s.v_turn);
      sink.add2(vy, 1.0, tl, -m, s.v_turn - eps);
      // turn_right = 1  <=>  vy <= -v_turn
      sink.add2(vy, 1.0, tr, m, -s.v_turn + m);
      sink.add2(vy, -1.0, tr, -m, s.v_turn - eps);
      // is_turning = turn_left OR turn_right
      sink.add2(tl, 1.0, it, -1.0, 0.0);
      sink.add2(tr, 1.0, it, -1.0, 0.0);
      sink.add3(it, 1.0, tl, -1.0, tr, -1.0, 0.0);
      // on the bump the plan must be turning
      sink.add3(d1, 1.0, d2, 1.0, it, -1.0, 1.0);
    }
  }

  BumpLogicRows out;
  out.rows.g_matrix = make_sparse(static_cast<int>(rhs.size()), lay.n_total(), t);
  out.rows.g_vec = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<int>(rhs.size()));
  out.integer_set.reserve(lay.n_binary());
  for (int col = lay.n_continuous(); col < lay.n_total(); ++col) out.integer_set.push_back(col);
  return out;
}

MiqpProblem assemble(const Scenario& s, const VehicleState& x0_state) {
  const VariableLayout lay = layout(s.horizon_n, s.human_behavior_mode);

  ObjectiveTerms obj = build_objective(s, lay);
  EqualityRows eq = build_dynamics_constraints(x0_state, s, lay);
  BoxBounds box = build_bounds(s, lay);
  InequalityRows nh = build_nonholonomic(s, lay);
  BumpLogicRows bump = build_bump_logic(s, lay);

  const int m_nh = static_cast<int>(nh.g_vec.size());
  const int m_bump = static_cast<int>(bump.rows.g_vec.size());
  Triplets t;
  for (int outer = 0; outer < nh.g_matrix.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(nh.g_matrix, outer); it; ++it) {
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int outer = 0; outer < bump.rows.g_matrix.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(bump.rows.g_matrix, outer); it; ++it) {
      t.emplace_back(static_cast<int>(it.row()) + m_nh, static_cast<int>(it.col()), it.value());
    }
  }

  MiqpProblem p;
  p.h_matrix = std::move(obj.h_matrix);
  p.h_vec = std::move(obj.h_vec);
  p.g_matrix = make_sparse(m_nh + m_bump, lay.n_total(), t);
  p.g_vec.resize(m_nh + m_bump);
  p.g_vec.head(m_nh) = nh.g_vec;
  p.g_vec.tail(m_bump) = bump.rows.g_vec;
  p.f_matrix = std::move(eq.f_matrix);
  p.f_vec = std::move(eq.f_vec);
  p.lb = std::move(box.lb);
  p.ub = std::move(box.ub);
  p.integer_set = std::move(bump.integer_set);
  p.layout = lay;
  p.objective_constant = obj.constant;
  return p;
}

namespace {

void dump_sparse(std::ostringstream& os, const char* name, const SparseMat& m) {
  os << name << " " << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int outer = 0; outer < m.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(m, outer); it; ++it) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      os << it.row() << " " << it.col() << " " << buf << "\n";
    }
  }
}

void dump_vec(std::ostringstream& os, const char* name, const Eigen::VectorXd& v) {
  os << name << " " << v.size() << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << buf << "\n";
  }
}

}  // namespace

std::string dump_problem(const MiqpProblem& p) {
  std::ostringstream os;
  os << "miqp n=" << p.n_cols() << " continuous=" << p.layout.n_continuous()
     << " binary=" << p.layout.n_binary() << " horizon=" << p.layout.horizon_n()
     << " mode=" << (p.layout.human_behavior_mode() ? "on" : "off") << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", p.objective_constant);
  os << "objective_constant " << buf << "\n";
  dump_sparse(os, "H", p.h_matrix);
  dump_vec(os, "h", p.h_vec);
  dump_sparse(os, "G", p.g_matrix);
  dump_vec(os, "g", p.g_vec);
  dump_sparse(os, "F", p.f_matrix);
  dump_vec(os, "f", p.f_vec);
  dump_vec(os, "lb", p.lb);
  dump_vec(os, "ub", p.ub);
  os << "integers " << p.integer_set.size() << "\n";
  for (int col : p.integer_set) os << col << "\n";
  return os.str();
}

}  // namespace bumpmpc
