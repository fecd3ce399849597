/// Convex QP solver:  min 1/2 z'Hz + h'z  s.t.  Gz <= g,  Fz = f,
/// lb <= z <= ub. Primal-dual interior point with Mehrotra correction; a
/// result is reported optimal only after the KKT residuals have been
/// recomputed from the problem data and pass the tolerance, so every
/// optimal status doubles as a certificate.

#ifndef BUMPMPC_QP_SOLVER_HPP
#define BUMPMPC_QP_SOLVER_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bumpmpc/miqp_builder.hpp"

namespace bumpmpc {

enum class QpStatus { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(QpStatus status);

/// Per-node bound override on one column (used by branch-and-bound).
struct BoundOverride {
  int col;
  double lo, hi;
};

struct QpProblem {
  SparseMat hessian;           ///< n x n, symmetric PSD
  Eigen::VectorXd linear;      ///< n
  SparseMat ineq_matrix;       ///< m_in x n
  Eigen::VectorXd ineq_rhs;    ///< m_in
  SparseMat eq_matrix;         ///< m_eq x n
  Eigen::VectorXd eq_rhs;      ///< m_eq
  Eigen::VectorXd lb, ub;      ///< n (+/-inf allowed)
  std::vector<BoundOverride> bound_overrides;

  int n_cols() const { return static_cast<int>(linear.size()); }

  /// Continuous relaxation: integer columns keep their [0,1] boxes.
  static QpProblem relaxation_of(const MiqpProblem& miqp);

  /// lb/ub with the per-node overrides applied.
  void effective_bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  double max() const;
  bool within(double tol) const { return max() <= tol; }
};

struct QpSolution {
  QpStatus status = QpStatus::iteration_limit;
  Eigen::VectorXd primal;
  Eigen::VectorXd dual_ineq;   ///< >= 0
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_lower;  ///< >= 0
  Eigen::VectorXd dual_upper;  ///< >= 0
  double objective = 0.0;
  int iterations = 0;
  KktResiduals kkt;
  /// Worst primal violation seen; the logged infeasibility measure when
  /// status == infeasible.
  double primal_infeasibility = 0.0;
  /// Farkas-style certificate (y'G + nu'F - zl + zu ~ 0 with negative
  /// aggregated rhs), populated when infeasibility was proven.
  bool has_farkas = false;
  Eigen::VectorXd farkas_ineq, farkas_eq, farkas_lower, farkas_upper;
};

struct QpSettings {
  double kkt_tol = 1e-6;
  int max_iter = 500;
  std::optional<Eigen::VectorXd> initial_primal;  ///< clamped into the box
};

/// Stationarity, primal feasibility, and complementarity (infinity norms),
/// recomputed from problem data and the solution's primal/duals only.
KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

class QpSolver {
 public:
  QpSolution solve(const QpProblem& problem, const QpSettings& settings = {});

 private:
  // workspace reused across solves
  Eigen::SimplicialLDLT<SparseMat> ldlt_;
};

/// Convenience wrapper matching the operation signature.
QpSolution solve_qp(const QpProblem& problem, double kkt_tol = 1e-6, int max_iter = 500);

}  // namespace bumpmpc

#endif  // BUMPMPC_QP_SOLVER_HPP
