#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "bumpmpc/bnb_solver.hpp"
#include "bumpmpc/miqp_builder.hpp"

using namespace bumpmpc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Scenario table1(int horizon, bool mode) {
  Scenario s = parse_scenario(
      "dt = 0.1\nsim_steps = 200\nroad_width = 2.0\nx0 = 0\ny0 = 0.75\nvx0 = 10\n"
      "v_ref = 10\nbump_start = 30\nbump_end = 35\nv_max_bump = 5\nv_turn = 0.1\n"
      "q1 = 1\nq2 = 1\nq3 = 1\nq4 = 2\nq5 = 4\nr1 = 4\nr2 = 4\n");
  s.horizon_n = horizon;
  s.human_behavior_mode = mode;
  return s;
}

// hand-sized MIQP whose relaxation is already integral: one continuous
// column pulled to 1, one binary with positive cost resting at 0
MiqpProblem integral_relaxation_problem() {
  MiqpProblem p;
  std::vector<Eigen::Triplet<double>> ht = {{0, 0, 2.0}};
  p.h_matrix = SparseMat(2, 2);
  p.h_matrix.setFromTriplets(ht.begin(), ht.end());
  p.h_vec.resize(2);
  p.h_vec << -2.0, 0.5;
  std::vector<Eigen::Triplet<double>> gt = {{0, 0, 1.0}, {0, 1, -1.0}};
  p.g_matrix = SparseMat(1, 2);
  p.g_matrix.setFromTriplets(gt.begin(), gt.end());
  p.g_vec = Eigen::VectorXd::Constant(1, 5.0);
  p.f_matrix = SparseMat(0, 2);
  p.f_vec = Eigen::VectorXd(0);
  p.lb.resize(2);
  p.lb << -10.0, 0.0;
  p.ub.resize(2);
  p.ub << 10.0, 1.0;
  p.integer_set = {1};
  p.layout = layout(1, false);  // not meaningful for this hand problem
  return p;
}

VehicleState random_state(std::mt19937_64& rng, const Scenario& s) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  VehicleState x0;
  x0.x = 22.0 + 15.0 * u01(rng);
  x0.vx = 1.5 + 8.5 * u01(rng);
  x0.y = 0.3 + 1.4 * u01(rng);
  const double vy_cap = x0.vx * std::tan(s.theta_max);
  x0.vy = std::clamp(-0.3 + 0.6 * u01(rng), -vy_cap, vy_cap);
  x0.ax = -0.5 + u01(rng);
  x0.ay = -0.2 + 0.4 * u01(rng);
  return x0;
}

bool binary_feasible(const MiqpProblem& p, const Eigen::VectorXd& z, double int_tol) {
  for (int col : p.integer_set) {
    const double c = std::clamp(z[col], 0.0, 1.0);
    if (std::min(c, 1.0 - c) > int_tol) return false;
  }
  return true;
}

double worst_violation(const MiqpProblem& p, const Eigen::VectorXd& z) {
  double v = 0.0;
  if (p.g_vec.size() > 0) v = std::max(v, (p.g_matrix * z - p.g_vec).maxCoeff());
  if (p.f_vec.size() > 0) v = std::max(v, (p.f_matrix * z - p.f_vec).cwiseAbs().maxCoeff());
  v = std::max(v, (p.lb - z).maxCoeff());
  v = std::max(v, (z - p.ub).maxCoeff());
  return v;
}

}  // namespace

TEST_CASE("integral relaxation solves at the root") {
  MiqpSolution sol = solve_miqp(integral_relaxation_problem());
  REQUIRE(sol.status == MiqpStatus::optimal);
  CHECK(sol.nodes_explored == 1);
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.primal[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
  CHECK(sol.objective == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("bump-boundary instance matches the enumeration oracle") {
  Scenario s = table1(2, false);
  VehicleState x0{29.5, 0.75, 4.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  MiqpSolution bnb = solve_miqp(p);
  MiqpSolution oracle = enumerate_oracle(p);
  REQUIRE(bnb.status == MiqpStatus::optimal);
  REQUIRE(oracle.status == MiqpStatus::optimal);
  CHECK(std::abs(bnb.objective - oracle.objective) <=
        1e-6 * (1.0 + std::abs(oracle.objective)));
}

TEST_CASE("contradictory pinned logic is infeasible") {
  Scenario s = table1(1, false);
  VehicleState x0{0.0, 0.75, 10.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  p.lb[p.layout.binary(0, BinaryVar::delta3)] = 1.0;  // delta3 pinned 1
  p.ub[p.layout.binary(0, BinaryVar::delta1)] = 0.0;  // delta1 pinned 0
  MiqpSolution sol = solve_miqp(p);
  CHECK(sol.status == MiqpStatus::infeasible);
}

TEST_CASE("oracle: 9 binaries enumerate at most 512 assignments") {
  Scenario s = table1(2, false);
  VehicleState x0{29.0, 0.75, 5.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  CHECK(p.integer_set.size() == 9);
  MiqpSolution oracle = enumerate_oracle(p);
  CHECK(oracle.nodes_explored <= 512);
  CHECK(oracle.status == MiqpStatus::optimal);
}

TEST_CASE("oracle: infeasible instance exhausts all assignments") {
  // pinned in-window start above the cap: no assignment survives
  Scenario s = table1(1, false);
  VehicleState x0{32.0, 0.75, 10.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  MiqpSolution oracle = enumerate_oracle(p);
  CHECK(oracle.status == MiqpStatus::infeasible);
  MiqpSolution bnb = solve_miqp(p);
  CHECK(bnb.status == MiqpStatus::infeasible);
}

TEST_CASE("oracle: binary cap is enforced") {
  Scenario s = table1(6, false);  // 21 binaries
  VehicleState x0{0.0, 0.75, 10.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  CHECK(p.integer_set.size() == 21);
  CHECK_THROWS_AS(enumerate_oracle(p), std::invalid_argument);
}

TEST_CASE("oracle equivalence on randomized small instances") {
  std::mt19937_64 rng(2024);
  int compared = 0;

  auto run_batch = [&](int horizon, bool mode, int count) {
    Scenario s = table1(horizon, mode);
    for (int i = 0; i < count; ++i) {
      VehicleState x0 = random_state(rng, s);
      MiqpProblem p = assemble(s, x0);
      MiqpSolution bnb = solve_miqp(p);
      MiqpSolution oracle = enumerate_oracle(p);
      REQUIRE(bnb.status == oracle.status);
      if (bnb.status != MiqpStatus::optimal) continue;
      ++compared;

      CHECK(std::abs(bnb.objective - oracle.objective) <=
            1e-6 * (1.0 + std::abs(bnb.objective)));
      CHECK(binary_feasible(p, bnb.primal, 1e-6));
      CHECK(binary_feasible(p, oracle.primal, 1e-6));
      CHECK(worst_violation(p, bnb.primal) <= 1e-6);

      // bound sandwich and incumbent monotonicity
      QpSolution root = solve_qp(QpProblem::relaxation_of(p));
      REQUIRE(root.status == QpStatus::optimal);
      double prev = kInf;
      for (const auto& [node, obj] : bnb.incumbent_history) {
        CHECK(obj <= prev + 1e-9);
        CHECK(root.objective <= obj + 1e-6 * (1.0 + std::abs(obj)));
        prev = obj;
      }
      CHECK(root.objective <= bnb.best_bound + 1e-6 * (1.0 + std::abs(bnb.best_bound)));
      CHECK(bnb.best_bound <= bnb.objective + 1e-9);
      CHECK(bnb.objective - bnb.best_bound <= 1e-6 + 1e-8 * std::abs(bnb.objective));

      // indicator semantics of the returned plan, skipping the big-M
      // boundary sliver where int_tol-sized binaries can sit legitimately
      const VariableLayout& lay = p.layout;
      const double sliver = s.big_m * 1e-6 + s.epsilon + 1e-6;
      for (int k = 0; k <= lay.horizon_n(); ++k) {
        const double x = bnb.primal[lay.state(k, StateVar::x)];
        const double vx = bnb.primal[lay.state(k, StateVar::vx)];
        const double vy = bnb.primal[lay.state(k, StateVar::vy)];
        const int d1 = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::delta1)]));
        const int d2 = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::delta2)]));
        const int d3 = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::delta3)]));
        if (std::abs(x - s.bump_start) > sliver) {
          CHECK(d1 == (x >= s.bump_start ? 1 : 0));
        }
        if (std::abs(x - s.bump_end) > sliver) {
          CHECK(d2 == (x <= s.bump_end ? 1 : 0));
        }
        if (d3 == 1) CHECK(vx <= s.v_max_bump + 1e-5);
        if (mode) {
          const int tl = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::turn_left)]));
          const int tr = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::turn_right)]));
          const int it = static_cast<int>(std::round(bnb.primal[lay.binary(k, BinaryVar::is_turning)]));
          if (std::abs(vy - s.v_turn) > sliver) CHECK(tl == (vy >= s.v_turn ? 1 : 0));
          if (std::abs(vy + s.v_turn) > sliver) CHECK(tr == (vy <= -s.v_turn ? 1 : 0));
          CHECK(it == (tl || tr ? 1 : 0));
          if (d1 == 1 && d2 == 1) CHECK(it == 1);
        }
      }

      // every optimal QP certificate passed re-verification
      CHECK(bnb.cert.certified_solves == bnb.cert.optimal_solves);
      CHECK(oracle.cert.certified_solves == oracle.cert.optimal_solves);
    }
  };

  run_batch(2, false, 25);
  run_batch(1, true, 20);
  run_batch(2, true, 5);
  CHECK(compared >= 25);  // enough optimal pairs actually got compared
}

TEST_CASE("warm start never explores more nodes and keeps the objective") {
  std::mt19937_64 rng(9);
  Scenario s = table1(2, false);
  for (int i = 0; i < 10; ++i) {
    VehicleState x0 = random_state(rng, s);
    MiqpProblem p = assemble(s, x0);
    MiqpSolution cold = solve_miqp(p);
    if (cold.status != MiqpStatus::optimal) continue;
    BnbConfig warm_config;
    warm_config.warm_start = cold.primal;
    MiqpSolution warm = solve_miqp(p, warm_config);
    REQUIRE(warm.status == MiqpStatus::optimal);
    CHECK(warm.nodes_explored <= cold.nodes_explored);
    CHECK(std::abs(warm.objective - cold.objective) <=
          1e-6 * (1.0 + std::abs(cold.objective)));
  }
}

TEST_CASE("node limit returns the incumbent with node_limit status") {
  Scenario s = table1(2, false);
  VehicleState x0{29.5, 0.75, 6.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  MiqpSolution full = solve_miqp(p);
  REQUIRE(full.status == MiqpStatus::optimal);
  if (full.nodes_explored > 1) {
    BnbConfig limited;
    limited.node_limit = 1;
    MiqpSolution sol = solve_miqp(p, limited);
    CHECK(sol.status == MiqpStatus::node_limit);
  }
}

TEST_CASE("search is deterministic") {
  Scenario s = table1(2, false);
  VehicleState x0{29.3, 0.8, 5.5, 0.05, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  MiqpSolution a = solve_miqp(p);
  MiqpSolution b = solve_miqp(p);
  REQUIRE(a.status == b.status);
  CHECK(std::memcmp(&a.objective, &b.objective, sizeof(double)) == 0);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.incumbent_history == b.incumbent_history);
}

TEST_CASE("trace log lists node actions") {
  Scenario s = table1(1, false);
  VehicleState x0{29.95, 0.75, 3.0, 0.0, 0.0, 0.0, 0.0};
  MiqpProblem p = assemble(s, x0);
  std::ostringstream trace;
  BnbConfig config;
  config.trace = &trace;
  solve_miqp(p, config);
  const std::string log = trace.str();
  CHECK(log.find("node 0 depth 0") != std::string::npos);
  CHECK(log.find("action") != std::string::npos);
}
