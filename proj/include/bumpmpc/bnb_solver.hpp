/// Branch-and-bound over the binary variables of an MiqpProblem: best-first
/// on the relaxation bound, branching on the most fractional binary, with an
/// exhaustive-enumeration oracle for small instances.

#ifndef BUMPMPC_BNB_SOLVER_HPP
#define BUMPMPC_BNB_SOLVER_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "bumpmpc/qp_solver.hpp"

namespace bumpmpc {

enum class BranchingRule { most_fractional };
enum class SearchOrder { best_first };

struct BnbConfig {
  double int_tol = 1e-6;
  double gap_abs = 1e-6;
  double gap_rel = 1e-8;
  std::int64_t node_limit = 100000;
  BranchingRule branching = BranchingRule::most_fractional;
  SearchOrder search = SearchOrder::best_first;
  std::optional<Eigen::VectorXd> warm_start;  ///< previous plan; seeds the incumbent
  std::ostream* trace = nullptr;              ///< optional per-node trace log
  double qp_kkt_tol = 1e-6;
  int qp_max_iter = 500;
};

enum class MiqpStatus { optimal, infeasible, node_limit };

const char* to_string(MiqpStatus status);

/// Aggregate over every QP subproblem solved during one MIQP solve; the
/// residuals are the independently recomputed certificates.
struct QpCertSummary {
  std::int64_t optimal_solves = 0;
  std::int64_t certified_solves = 0;  ///< optimal solves with residuals <= tol
  KktResiduals worst;

  void absorb(const QpSolution& qp, double tol);
  void merge(const QpCertSummary& other);
};

struct MiqpSolution {
  MiqpStatus status = MiqpStatus::infeasible;
  Eigen::VectorXd primal;
  double objective = 0.0;
  std::int64_t nodes_explored = 0;
  std::vector<std::pair<std::int64_t, double>> incumbent_history;
  double best_bound = 0.0;
  double solve_time = 0.0;  ///< seconds
  QpCertSummary cert;
};

/// Thrown when a QP subproblem fails (iteration limit / unbounded); carries
/// the node index for context.
class BnbError : public std::runtime_error {
 public:
  BnbError(std::int64_t node, const std::string& what);
  std::int64_t node() const { return node_; }

 private:
  std::int64_t node_;
};

MiqpSolution solve_miqp(const MiqpProblem& problem, const BnbConfig& config = {});

/// Exhaustive enumeration of all 2^|I| binary assignments (lexicographic
/// order, |I| <= 20), screening assignments that violate pure-binary rows
/// without a QP solve. Ties resolve to the lowest assignment.
MiqpSolution enumerate_oracle(const MiqpProblem& problem);

}  // namespace bumpmpc

#endif  // BUMPMPC_BNB_SOLVER_HPP
