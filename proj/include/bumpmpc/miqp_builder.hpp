/// Assembles the standard-form MIQP  min 1/2 z'Hz + h'z  s.t.  Gz <= g,
/// Fz = f,  lb <= z <= ub,  z_j in {0,1} for j in the integer set,
/// for one horizon from a scenario and the current vehicle state.

#ifndef BUMPMPC_MIQP_BUILDER_HPP
#define BUMPMPC_MIQP_BUILDER_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bumpmpc/dynamics.hpp"
#include "bumpmpc/scenario.hpp"
#include "bumpmpc/variable_layout.hpp"

namespace bumpmpc {

using SparseMat = Eigen::SparseMatrix<double>;

struct ObjectiveTerms {
  SparseMat h_matrix;      ///< symmetric PSD, diagonal for this family
  Eigen::VectorXd h_vec;
  double constant = 0.0;   ///< dropped reference-tracking constant
};

struct EqualityRows {
  SparseMat f_matrix;
  Eigen::VectorXd f_vec;
};

struct InequalityRows {
  SparseMat g_matrix;
  Eigen::VectorXd g_vec;
};

struct BoxBounds {
  Eigen::VectorXd lb, ub;
};

struct BumpLogicRows {
  InequalityRows rows;
  std::vector<int> integer_set;  ///< every binary column, ascending
};

struct MiqpProblem {
  SparseMat h_matrix;
  Eigen::VectorXd h_vec;
  SparseMat g_matrix;
  Eigen::VectorXd g_vec;
  SparseMat f_matrix;
  Eigen::VectorXd f_vec;
  Eigen::VectorXd lb, ub;
  std::vector<int> integer_set;
  VariableLayout layout;
  double objective_constant = 0.0;

  int n_cols() const { return static_cast<int>(h_vec.size()); }
};

/// Thrown when a scenario cannot be encoded (e.g. big_m too small for an
/// indicator row to stay satisfiable over the variable's box).
class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tracking cost: diagonal weights on vx, ax, y, vy, ay, jx, jy for
/// k = 0..N-1 (doubled into the 1/2 z'Hz convention), linear pull toward
/// v_ref and y_ref; x and binary columns carry no cost.
ObjectiveTerms build_objective(const Scenario& scenario, const VariableLayout& layout);

/// Rows pinning the k=0 state to x0_state plus one 6-row block per step
/// enforcing s(k+1) = A s(k) + B u(k).
EqualityRows build_dynamics_constraints(const VehicleState& x0_state,
                                        const Scenario& scenario,
                                        const VariableLayout& layout);

/// Per-column boxes from the scenario limits; y tightened to the keep-in
/// corridor, binaries to [0, 1].
BoxBounds build_bounds(const Scenario& scenario, const VariableLayout& layout);

/// Linearized steering-geometry rows per step:
///   vy <= tan(theta_max) vx,  vy >= tan(theta_min) vx,  |ay| <= omega_max vx.
InequalityRows build_nonholonomic(const Scenario& scenario, const VariableLayout& layout);

/// Big-M indicator rows tying delta1/delta2/delta3 (and the turning
/// binaries in human-behavior mode) to the bump-window predicates, plus the
/// linking rows among them. Throws BuildError when big_m is too small for an
/// encoding branch to remain satisfiable over the variable's box.
BumpLogicRows build_bump_logic(const Scenario& scenario, const VariableLayout& layout);

/// Concatenates all builder outputs; row order: dynamics equalities, then
/// nonholonomic and bump-logic inequalities; bounds folded into lb/ub.
MiqpProblem assemble(const Scenario& scenario, const VehicleState& x0_state);

/// Text dump (dimensions, triplet-form matrices, bounds, integer set) for
/// cross-checking against external solvers. Deterministic for a given input.
std::string dump_problem(const MiqpProblem& problem);

}  // namespace bumpmpc

#endif  // BUMPMPC_MIQP_BUILDER_HPP
