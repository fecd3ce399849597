#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bumpmpc/miqp_builder.hpp"

using namespace bumpmpc;

namespace {

Scenario table1() {
  return parse_scenario(
      "dt = 0.1\nsim_steps = 200\nroad_width = 2.0\nx0 = 0\ny0 = 0.75\nvx0 = 10\n"
      "v_ref = 10\nbump_start = 30\nbump_end = 35\nv_max_bump = 5\nv_turn = 0.1\n"
      "q1 = 1\nq2 = 1\nq3 = 1\nq4 = 2\nq5 = 4\nr1 = 4\nr2 = 4\n");
}

// test-side oracle: the tracking cost evaluated directly, term by term
double tracking_cost(const Scenario& s, const VariableLayout& lay,
                     const Eigen::VectorXd& z) {
  double j = 0.0;
  for (int k = 0; k < lay.horizon_n(); ++k) {
    const double vx = z[lay.state(k, StateVar::vx)];
    const double ax = z[lay.state(k, StateVar::ax)];
    const double y = z[lay.state(k, StateVar::y)];
    const double vy = z[lay.state(k, StateVar::vy)];
    const double ay = z[lay.state(k, StateVar::ay)];
    const double jx = z[lay.input(k, InputVar::jx)];
    const double jy = z[lay.input(k, InputVar::jy)];
    j += s.weights.q1 * (vx - s.v_ref) * (vx - s.v_ref) + s.weights.q2 * ax * ax +
         s.weights.q3 * (y - s.y_ref) * (y - s.y_ref) + s.weights.q4 * vy * vy +
         s.weights.q5 * ay * ay + s.weights.r1 * jx * jx + s.weights.r2 * jy * jy;
  }
  return j;
}

double quad_form(const ObjectiveTerms& obj, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(obj.h_matrix * z) + obj.h_vec.dot(z);
}

double row_eval(const SparseMat& g, const Eigen::VectorXd& z, int row) {
  double v = 0.0;
  for (int outer = 0; outer < g.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(g, outer); it; ++it) {
      if (it.row() == row) v += it.value() * z[it.col()];
    }
  }
  return v;
}

}  // namespace

TEST_CASE("layout column counts") {
  CHECK(layout(1, false).n_total() == 20);
  CHECK(layout(1, false).n_continuous() == 14);
  CHECK(layout(1, true).n_total() == 26);
  CHECK(layout(20, false).n_continuous() == 166);
  CHECK(layout(20, false).n_binary() == 63);
  CHECK_THROWS_AS(layout(0, false), std::invalid_argument);
}

TEST_CASE("layout is a bijection with the continuous block first") {
  for (bool mode : {false, true}) {
    VariableLayout lay = layout(4, mode);
    std::vector<char> hit(lay.n_total(), 0);
    for (int k = 0; k <= 4; ++k) {
      for (int i = 0; i < 6; ++i) hit[lay.state(k, static_cast<StateVar>(i))]++;
    }
    for (int k = 0; k < 4; ++k) {
      hit[lay.input(k, InputVar::jx)]++;
      hit[lay.input(k, InputVar::jy)]++;
    }
    const int n_kinds = mode ? 6 : 3;
    for (int k = 0; k <= 4; ++k) {
      for (int b = 0; b < n_kinds; ++b) {
        const int col = lay.binary(k, static_cast<BinaryVar>(b));
        CHECK(col >= lay.n_continuous());
        hit[col]++;
      }
    }
    for (int col = 0; col < lay.n_total(); ++col) CHECK(hit[col] == 1);
  }
}

TEST_CASE("objective: reference state collapses to minus the dropped constant") {
  Scenario s = table1();
  s.horizon_n = 5;
  VariableLayout lay = layout(s.horizon_n, false);
  ObjectiveTerms obj = build_objective(s, lay);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
  for (int k = 0; k <= s.horizon_n; ++k) {
    z[lay.state(k, StateVar::vx)] = s.v_ref;
    z[lay.state(k, StateVar::y)] = s.y_ref;
  }
  const double expected =
      -(s.weights.q1 * s.v_ref * s.v_ref + s.weights.q3 * s.y_ref * s.y_ref) * s.horizon_n;
  CHECK(quad_form(obj, z) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(obj.constant == doctest::Approx(-expected).epsilon(1e-12));
}

TEST_CASE("objective: one unit of speed deviation costs exactly q1") {
  Scenario s = table1();
  s.horizon_n = 1;
  VariableLayout lay = layout(1, false);
  ObjectiveTerms obj = build_objective(s, lay);

  Eigen::VectorXd ref = Eigen::VectorXd::Zero(lay.n_total());
  for (int k = 0; k <= 1; ++k) {
    ref[lay.state(k, StateVar::vx)] = s.v_ref;
    ref[lay.state(k, StateVar::y)] = s.y_ref;
  }
  Eigen::VectorXd off = ref;
  off[lay.state(0, StateVar::vx)] = s.v_ref + 1.0;
  CHECK(quad_form(obj, off) - quad_form(obj, ref) ==
        doctest::Approx(s.weights.q1).epsilon(1e-12));
}

TEST_CASE("objective: x, terminal-step, and binary columns carry no cost") {
  Scenario s = table1();
  s.horizon_n = 3;
  VariableLayout lay = layout(3, false);
  ObjectiveTerms obj = build_objective(s, lay);

  Eigen::MatrixXd dense = Eigen::MatrixXd(obj.h_matrix);
  for (int k = 0; k <= 3; ++k) {
    const int xc = lay.state(k, StateVar::x);
    CHECK(dense.row(xc).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dense.col(xc).cwiseAbs().maxCoeff() == 0.0);
    CHECK(obj.h_vec[xc] == 0.0);
  }
  for (int i = 0; i < 6; ++i) {
    const int tc = lay.state(3, static_cast<StateVar>(i));
    CHECK(dense.row(tc).cwiseAbs().maxCoeff() == 0.0);
    CHECK(obj.h_vec[tc] == 0.0);
  }
  for (int col = lay.n_continuous(); col < lay.n_total(); ++col) {
    CHECK(dense.row(col).cwiseAbs().maxCoeff() == 0.0);
    CHECK(obj.h_vec[col] == 0.0);
  }
}

TEST_CASE("objective is PSD: nonnegative diagonal, zero off-diagonal") {
  Scenario s = table1();
  s.horizon_n = 4;
  VariableLayout lay = layout(4, true);
  s.human_behavior_mode = true;
  ObjectiveTerms obj = build_objective(s, lay);
  for (int outer = 0; outer < obj.h_matrix.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(obj.h_matrix, outer); it; ++it) {
      CHECK(it.row() == it.col());
      CHECK(it.value() >= 0.0);
    }
  }
}

TEST_CASE("objective equivalence against the direct evaluation") {
  Scenario s = table1();
  s.horizon_n = 5;
  VariableLayout lay = layout(5, false);
  ObjectiveTerms obj = build_objective(s, lay);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 15.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd z(lay.n_total());
    for (int i = 0; i < z.size(); ++i) z[i] = u(rng);
    const double via_matrix = quad_form(obj, z) + obj.constant;
    const double direct = tracking_cost(s, lay, z);
    CHECK(via_matrix == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("dynamics rows: counts and the pinned initial state") {
  Scenario s = table1();
  s.horizon_n = 1;
  VariableLayout lay = layout(1, false);
  VehicleState x0;
  x0.vx = 10.0;
  EqualityRows eq = build_dynamics_constraints(x0, s, lay);
  CHECK(eq.f_vec.size() == 12);  // 6 pinning + 6 step rows

  // the vx(0) pinning row is a unit row with rhs 10
  const int vx0_col = lay.state(0, StateVar::vx);
  CHECK(row_eval(eq.f_matrix, Eigen::VectorXd::Unit(lay.n_total(), vx0_col), 1) == 1.0);
  CHECK(eq.f_vec[1] == 10.0);
}

TEST_CASE("dynamics rows: rollouts satisfy the equalities") {
  Scenario s = table1();
  s.horizon_n = 8;
  VariableLayout lay = layout(8, false);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int trial = 0; trial < 50; ++trial) {
    VehicleState x0{30.0 * u(rng), 0.75 + 0.5 * u(rng), 8.0 + 2.0 * u(rng),
                    0.5 * u(rng),  u(rng),               u(rng), 0.0};
    EqualityRows eq = build_dynamics_constraints(x0, s, lay);

    Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
    VehicleState cur = x0;
    for (int k = 0; k <= 8; ++k) {
      z[lay.state(k, StateVar::x)] = cur.x;
      z[lay.state(k, StateVar::vx)] = cur.vx;
      z[lay.state(k, StateVar::ax)] = cur.ax;
      z[lay.state(k, StateVar::y)] = cur.y;
      z[lay.state(k, StateVar::vy)] = cur.vy;
      z[lay.state(k, StateVar::ay)] = cur.ay;
      if (k < 8) {
        ControlInput c{10.0 * u(rng), 10.0 * u(rng)};
        z[lay.input(k, InputVar::jx)] = c.jx;
        z[lay.input(k, InputVar::jy)] = c.jy;
        cur = propagate(cur, c, s.dt);
      }
    }
    CHECK((eq.f_matrix * z - eq.f_vec).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("bounds: corridor, jerk boxes, binary boxes") {
  Scenario s = table1();
  s.horizon_n = 3;
  VariableLayout lay = layout(3, false);
  BoxBounds b = build_bounds(s, lay);
  for (int k = 0; k <= 3; ++k) {
    CHECK(b.lb[lay.state(k, StateVar::y)] == 0.25);
    CHECK(b.ub[lay.state(k, StateVar::y)] == 1.75);
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(b.lb[lay.input(k, InputVar::jx)] == -10.0);
    CHECK(b.ub[lay.input(k, InputVar::jx)] == 10.0);
  }
  CHECK(b.lb[lay.binary(0, BinaryVar::delta1)] == 0.0);
  CHECK(b.ub[lay.binary(0, BinaryVar::delta1)] == 1.0);
}

TEST_CASE("nonholonomic rows bound vy and ay by vx") {
  Scenario s = table1();
  s.horizon_n = 1;
  VariableLayout lay = layout(1, false);
  InequalityRows nh = build_nonholonomic(s, lay);
  CHECK(nh.g_vec.size() == 8);  // 4 rows per step, steps 0 and 1

  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
  z[lay.state(0, StateVar::vx)] = 10.0;
  z[lay.state(0, StateVar::vy)] = 5.7735;  // 10 tan(0.5236) = 5.77350
  CHECK(row_eval(nh.g_matrix, z, 0) <= 0.0);
  z[lay.state(0, StateVar::vy)] = 5.7736;
  CHECK(row_eval(nh.g_matrix, z, 0) > 0.0);

  // cone apex: vx = 0 forces vy = ay = 0
  z.setZero();
  z[lay.state(0, StateVar::vy)] = 0.1;
  CHECK(row_eval(nh.g_matrix, z, 0) > 0.0);
  z[lay.state(0, StateVar::vy)] = -0.1;
  CHECK(row_eval(nh.g_matrix, z, 1) > 0.0);
  z.setZero();
  z[lay.state(0, StateVar::ay)] = 0.1;
  CHECK(row_eval(nh.g_matrix, z, 2) > 0.0);

  // symmetric steering bounds give a symmetric vy interval
  Eigen::VectorXd zp = Eigen::VectorXd::Zero(lay.n_total());
  zp[lay.state(0, StateVar::vx)] = 7.0;
  zp[lay.state(0, StateVar::vy)] = 2.0;
  Eigen::VectorXd zm = zp;
  zm[lay.state(0, StateVar::vy)] = -2.0;
  CHECK(row_eval(nh.g_matrix, zp, 0) == doctest::Approx(row_eval(nh.g_matrix, zm, 1)));
}

TEST_CASE("bump logic: boundary forces delta1 = 1") {
  Scenario s = table1();
  s.horizon_n = 1;
  VariableLayout lay = layout(1, false);
  BumpLogicRows bump = build_bump_logic(s, lay);

  // rows for k=0: 0: -x + M d1 <= M - 30, 1: x - M d1 <= 30 - eps
  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
  z[lay.state(0, StateVar::x)] = 30.0;
  z[lay.binary(0, BinaryVar::delta1)] = 0.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 1) > bump.rows.g_vec[1]);  // violated
  z[lay.binary(0, BinaryVar::delta1)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 0) <= bump.rows.g_vec[0]);
  CHECK(row_eval(bump.rows.g_matrix, z, 1) <= bump.rows.g_vec[1]);
}

TEST_CASE("bump logic: on-bump binaries force the speed cap") {
  Scenario s = table1();
  s.horizon_n = 1;
  VariableLayout lay = layout(1, false);
  BumpLogicRows bump = build_bump_logic(s, lay);

  // delta1 = delta2 = 1, delta3 = 0 violates row 7 (d1 + d2 - d3 <= 1)
  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
  z[lay.binary(0, BinaryVar::delta1)] = 1.0;
  z[lay.binary(0, BinaryVar::delta2)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 7) > bump.rows.g_vec[7]);
  z[lay.binary(0, BinaryVar::delta3)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 7) <= bump.rows.g_vec[7]);

  // with delta3 = 1 the cap row binds: vx <= v_max_bump
  z[lay.state(0, StateVar::vx)] = 5.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 4) <= bump.rows.g_vec[4]);
  z[lay.state(0, StateVar::vx)] = 5.1;
  CHECK(row_eval(bump.rows.g_matrix, z, 4) > bump.rows.g_vec[4]);
}

TEST_CASE("bump logic: human mode forces turning on the bump") {
  Scenario s = table1();
  s.human_behavior_mode = true;
  s.horizon_n = 1;
  VariableLayout lay = layout(1, true);
  BumpLogicRows bump = build_bump_logic(s, lay);
  // per-k rows: 0..4 delta encodings, 5..7 links, 8..11 turn encodings,
  // 12..14 or-rows, 15 on-bump-turning row
  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.n_total());
  z[lay.binary(0, BinaryVar::delta1)] = 1.0;
  z[lay.binary(0, BinaryVar::delta2)] = 1.0;
  z[lay.binary(0, BinaryVar::delta3)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 15) > bump.rows.g_vec[15]);
  z[lay.binary(0, BinaryVar::is_turning)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 15) <= bump.rows.g_vec[15]);
  // is_turning = 1 with both turn flags zero violates the or-row
  CHECK(row_eval(bump.rows.g_matrix, z, 14) > bump.rows.g_vec[14]);
  z[lay.binary(0, BinaryVar::turn_left)] = 1.0;
  CHECK(row_eval(bump.rows.g_matrix, z, 14) <= bump.rows.g_vec[14]);
  // turn_left = 1 requires vy >= v_turn
  CHECK(row_eval(bump.rows.g_matrix, z, 8) > bump.rows.g_vec[8]);
  z[lay.state(0, StateVar::vy)] = s.v_turn;
  CHECK(row_eval(bump.rows.g_matrix, z, 8) <= bump.rows.g_vec[8]);

  CHECK(bump.integer_set.size() == 12);
}

TEST_CASE("bump logic: big_m below epsilon is rejected") {
  Scenario s = table1();
  s.big_m = 5e-5;  // below epsilon = 1e-4: both branches collapse
  s.horizon_n = 1;
  CHECK_THROWS_AS(build_bump_logic(s, layout(1, false)), BuildError);
  // defaults are fine even though big_m < the x box diameter
  Scenario ok = table1();
  CHECK_NOTHROW(build_bump_logic(ok, layout(1, false)));
}

TEST_CASE("assemble: column counts and row-count formulas for N = 1..30") {
  Scenario s = table1();
  VehicleState x0{0.0, 0.75, 10.0, 0.0, 0.0, 0.0, 0.0};
  for (int n : {1, 2, 5, 12, 20, 30}) {
    for (bool mode : {false, true}) {
      for (bool strict : {false, true}) {
        s.horizon_n = n;
        s.human_behavior_mode = mode;
        s.strict_indicators = strict;
        MiqpProblem p = assemble(s, x0);
        CHECK(p.layout.n_continuous() == 6 * (n + 1) + 2 * n);
        CHECK(p.layout.n_binary() == (mode ? 6 : 3) * (n + 1));
        CHECK(p.f_vec.size() == 6 + 6 * n);
        const int per_step = 4 + 8 + (strict ? 1 : 0) + (mode ? 8 : 0);
        CHECK(p.g_vec.size() == per_step * (n + 1));
        CHECK(static_cast<int>(p.integer_set.size()) == p.layout.n_binary());
      }
    }
  }
}

TEST_CASE("assemble is deterministic") {
  Scenario s = table1();
  s.horizon_n = 6;
  VehicleState x0{12.0, 0.8, 9.0, 0.1, -0.2, 0.0, 0.0};
  CHECK(dump_problem(assemble(s, x0)) == dump_problem(assemble(s, x0)));
}
