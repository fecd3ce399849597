#include "bumpmpc/bnb_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <queue>

namespace bumpmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  std::int64_t id = 0;
  int depth = 0;
  double bound = -kInf;
  std::vector<BoundOverride> fixings;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.id > b.id;                                // then creation order
  }
};

void trace_line(std::ostream* os, std::int64_t id, int depth, double bound,
                const char* action) {
  if (os == nullptr) return;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "node %lld depth %d bound %.9g action %s\n",
                static_cast<long long>(id), depth, bound, action);
  *os << buf;
}

double frac_distance(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return std::min(c, 1.0 - c);
}

}  // namespace

const char* to_string(MiqpStatus status) {
  switch (status) {
    case MiqpStatus::optimal: return "optimal";
    case MiqpStatus::infeasible: return "infeasible";
    case MiqpStatus::node_limit: return "node_limit";
  }
  return "unknown";
}

void QpCertSummary::absorb(const QpSolution& qp, double tol) {
  if (qp.status != QpStatus::optimal) return;
  ++optimal_solves;
  if (qp.kkt.within(tol)) ++certified_solves;
  worst.stationarity = std::max(worst.stationarity, qp.kkt.stationarity);
  worst.primal = std::max(worst.primal, qp.kkt.primal);
  worst.complementarity = std::max(worst.complementarity, qp.kkt.complementarity);
}

void QpCertSummary::merge(const QpCertSummary& other) {
  optimal_solves += other.optimal_solves;
  certified_solves += other.certified_solves;
  worst.stationarity = std::max(worst.stationarity, other.worst.stationarity);
  worst.primal = std::max(worst.primal, other.worst.primal);
  worst.complementarity = std::max(worst.complementarity, other.worst.complementarity);
}

BnbError::BnbError(std::int64_t node, const std::string& what)
    : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node) {}

MiqpSolution solve_miqp(const MiqpProblem& problem, const BnbConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<int>& ints = problem.integer_set;

  QpProblem relax = QpProblem::relaxation_of(problem);
  QpSolver qp_solver;
  QpSettings qp_settings;
  qp_settings.kkt_tol = config.qp_kkt_tol;
  qp_settings.max_iter = config.qp_max_iter;

  MiqpSolution out;
  out.objective = std::numeric_limits<double>::quiet_NaN();
  out.best_bound = -kInf;

  bool have_incumbent = false;
  double inc_obj = kInf;
  Eigen::VectorXd inc_primal;

  auto record_incumbent = [&](const QpSolution& qp) {
    have_incumbent = true;
    inc_obj = qp.objective;
    inc_primal = qp.primal;
    out.incumbent_history.emplace_back(out.nodes_explored, inc_obj);
  };

  // completion solve: all binaries pinned to the given 0/1 values
  auto solve_completion = [&](const Eigen::VectorXd& guess) {
    relax.bound_overrides.clear();
    relax.bound_overrides.reserve(ints.size());
    for (int col : ints) {
      const double v = std::round(std::clamp(guess[col], 0.0, 1.0));
      relax.bound_overrides.push_back({col, v, v});
    }
    QpSolution qp = qp_solver.solve(relax, qp_settings);
    out.cert.absorb(qp, config.qp_kkt_tol);
    return qp;
  };

  if (config.warm_start) {
    if (config.warm_start->size() != problem.n_cols()) {
      throw std::invalid_argument("solve_miqp: warm start size mismatch");
    }
    QpSolution qp = solve_completion(*config.warm_start);
    if (qp.status == QpStatus::optimal) record_incumbent(qp);
  }

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::int64_t next_id = 0;
  open.push(Node{next_id++, 0, -kInf, {}});

  double last_popped_bound = -kInf;
  bool hit_node_limit = false;
  bool pruned_frontier = false;

  while (!open.empty()) {
    if (out.nodes_explored >= config.node_limit) {
      hit_node_limit = true;
      break;
    }
    Node node = open.top();
    open.pop();
    last_popped_bound = std::max(last_popped_bound, node.bound);

    if (have_incumbent && node.bound >= inc_obj - config.gap_abs) {
      trace_line(config.trace, node.id, node.depth, node.bound, "prune");
      // best-first: every remaining bound is at least this one
      while (!open.empty()) open.pop();
      pruned_frontier = true;
      break;
    }

    relax.bound_overrides = node.fixings;
    QpSolution qp = qp_solver.solve(relax, qp_settings);
    ++out.nodes_explored;
    out.cert.absorb(qp, config.qp_kkt_tol);

    if (qp.status == QpStatus::infeasible) {
      trace_line(config.trace, node.id, node.depth, kInf, "prune");
      continue;
    }
    if (qp.status != QpStatus::optimal) {
      throw BnbError(node.id, std::string("qp subproblem failed: ") + to_string(qp.status));
    }

    const double bound = qp.objective;
    if (have_incumbent && bound >= inc_obj - config.gap_abs) {
      trace_line(config.trace, node.id, node.depth, bound, "prune");
      continue;
    }

    // integrality
    int branch_col = -1;
    double branch_score = -1.0;
    for (int col : ints) {
      const double d = frac_distance(qp.primal[col]);
      if (d > config.int_tol && d > branch_score) {
        branch_score = d;
        branch_col = col;
      }
    }

    if (branch_col < 0) {
      record_incumbent(qp);
      trace_line(config.trace, node.id, node.depth, bound, "incumbent");
      continue;
    }

    // rounding heuristic at the root while no incumbent exists
    if (!have_incumbent && node.id == 0) {
      QpSolution completion = solve_completion(qp.primal);
      if (completion.status == QpStatus::optimal) record_incumbent(completion);
    }

    trace_line(config.trace, node.id, node.depth, bound, "branch");
    for (double fix : {0.0, 1.0}) {
      Node child;
      child.id = next_id++;
      child.depth = node.depth + 1;
      child.bound = bound;
      child.fixings = node.fixings;
      child.fixings.push_back({branch_col, fix, fix});
      open.push(std::move(child));
    }
  }

  if (hit_node_limit) {
    out.status = MiqpStatus::node_limit;
    out.best_bound = open.empty() ? (have_incumbent ? inc_obj : -kInf)
                                  : std::min(open.top().bound, have_incumbent ? inc_obj : kInf);
  } else if (have_incumbent) {
    out.status = MiqpStatus::optimal;
    out.best_bound = pruned_frontier ? std::min(inc_obj, last_popped_bound) : inc_obj;
  } else {
    out.status = MiqpStatus::infeasible;
    out.best_bound = kInf;
  }
  if (have_incumbent) {
    out.objective = inc_obj;
    out.primal = inc_primal;
  }
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

MiqpSolution enumerate_oracle(const MiqpProblem& problem) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<int>& ints = problem.integer_set;
  const int m = static_cast<int>(ints.size());
  if (m > 20) {
    throw std::invalid_argument("enumerate_oracle: more than 20 binaries (" +
                                std::to_string(m) + ")");
  }

  // column -> position in the assignment tuple
  std::vector<int> pos_of(problem.n_cols(), -1);
  for (int i = 0; i < m; ++i) pos_of[ints[i]] = i;

  // rows supported entirely on binary columns can be screened without a solve
  struct PureRow {
    std::vector<std::pair<int, double>> terms;  // (tuple position, coeff)
    double rhs;
    bool is_eq;
  };
  std::vector<PureRow> pure;
  auto scan = [&](const SparseMat& mat, const Eigen::VectorXd& rhs, bool is_eq) {
    const int rows = static_cast<int>(mat.rows());
    std::vector<std::vector<std::pair<int, double>>> by_row(rows);
    std::vector<char> pure_row(rows, 1);
    for (int outer = 0; outer < mat.outerSize(); ++outer) {
      for (SparseMat::InnerIterator it(mat, outer); it; ++it) {
        if (it.value() == 0.0) continue;
        const int p = pos_of[it.col()];
        if (p < 0) pure_row[it.row()] = 0;
        else by_row[it.row()].emplace_back(p, it.value());
      }
    }
    for (int i = 0; i < rows; ++i) {
      if (pure_row[i] && !by_row[i].empty()) pure.push_back({by_row[i], rhs[i], is_eq});
    }
  };
  scan(problem.g_matrix, problem.g_vec, false);
  scan(problem.f_matrix, problem.f_vec, true);

  QpProblem relax = QpProblem::relaxation_of(problem);
  QpSolver qp_solver;

  MiqpSolution out;
  out.objective = std::numeric_limits<double>::quiet_NaN();
  out.best_bound = kInf;
  bool found = false;
  double best_obj = kInf;
  Eigen::VectorXd best_primal;

  const std::uint64_t total = std::uint64_t{1} << m;
  std::vector<double> assign(m, 0.0);
  for (std::uint64_t counter = 0; counter < total; ++counter) {
    for (int j = 0; j < m; ++j) {
      assign[j] = static_cast<double>((counter >> (m - 1 - j)) & 1u);
    }
    bool screened = false;
    for (const PureRow& row : pure) {
      double v = 0.0;
      for (const auto& [p, c] : row.terms) v += c * assign[p];
      if (row.is_eq ? std::abs(v - row.rhs) > 1e-9 : v > row.rhs + 1e-9) {
        screened = true;
        break;
      }
    }
    if (screened) continue;

    relax.bound_overrides.clear();
    for (int j = 0; j < m; ++j) relax.bound_overrides.push_back({ints[j], assign[j], assign[j]});
    QpSolution qp = qp_solver.solve(relax);
    out.cert.absorb(qp, 1e-6);
    ++out.nodes_explored;
    if (qp.status == QpStatus::infeasible) continue;
    if (qp.status != QpStatus::optimal) {
      throw BnbError(static_cast<std::int64_t>(counter),
                     std::string("oracle qp failed: ") + to_string(qp.status));
    }
    if (qp.objective < best_obj) {  // ties keep the lower assignment
      best_obj = qp.objective;
      best_primal = qp.primal;
      found = true;
      out.incumbent_history.emplace_back(out.nodes_explored, best_obj);
    }
  }

  if (found) {
    out.status = MiqpStatus::optimal;
    out.objective = best_obj;
    out.primal = best_primal;
    out.best_bound = best_obj;
  } else {
    out.status = MiqpStatus::infeasible;
  }
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace bumpmpc
