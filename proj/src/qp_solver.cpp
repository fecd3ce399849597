#include "bumpmpc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bumpmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFixedWidth = 1e-12;     // boxes thinner than this are pinned
constexpr double kDroppedRowTol = 1e-9;   // feasibility slack for all-fixed rows
constexpr double kPrimalReg = 1e-9;
constexpr double kDualReg = 1e-9;

double max_abs(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Largest alpha in (0, 1] keeping v + alpha*dv >= 0 componentwise.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

struct Reduced {
  SparseMat H, G, F, Gt, Ft;
  Eigen::VectorXd h, g, f, lo, hi;
  std::vector<int> free_cols;   // reduced col -> original col
  std::vector<int> fixed_cols;
  Eigen::VectorXd fixed_vals;   // parallel to fixed_cols
  std::vector<int> kept_ineq;   // reduced row -> original row
  std::vector<int> kept_eq;
  double shift = 0.0;           // objective contribution of fixed columns
};

SparseMat select_columns(const SparseMat& m, const std::vector<int>& reduced_of,
                         int n_reduced) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(m.nonZeros());
  for (int outer = 0; outer < m.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(m, outer); it; ++it) {
      const int rc = reduced_of[it.col()];
      if (rc >= 0) t.emplace_back(static_cast<int>(it.row()), rc, it.value());
    }
  }
  SparseMat out(m.rows(), n_reduced);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

SparseMat select_rows(const SparseMat& m, const std::vector<int>& keep) {
  std::vector<int> reduced_of(m.rows(), -1);
  for (size_t i = 0; i < keep.size(); ++i) reduced_of[keep[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(m.nonZeros());
  for (int outer = 0; outer < m.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(m, outer); it; ++it) {
      const int rr = reduced_of[it.row()];
      if (rr >= 0) t.emplace_back(rr, static_cast<int>(it.col()), it.value());
    }
  }
  SparseMat out(static_cast<int>(keep.size()), m.cols());
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

struct IpmState {
  Eigen::VectorXd z, s, lam, nu, zl, zu;
};

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::unbounded: return "unbounded";
    case QpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

QpProblem QpProblem::relaxation_of(const MiqpProblem& miqp) {
  QpProblem qp;
  qp.hessian = miqp.h_matrix;
  qp.linear = miqp.h_vec;
  qp.ineq_matrix = miqp.g_matrix;
  qp.ineq_rhs = miqp.g_vec;
  qp.eq_matrix = miqp.f_matrix;
  qp.eq_rhs = miqp.f_vec;
  qp.lb = miqp.lb;
  qp.ub = miqp.ub;
  return qp;
}

void QpProblem::effective_bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
  lo = lb;
  hi = ub;
  for (const auto& o : bound_overrides) {
    lo[o.col] = std::max(lo[o.col], o.lo);
    hi[o.col] = std::min(hi[o.col], o.hi);
  }
}

double KktResiduals::max() const {
  return std::max(stationarity, std::max(primal, complementarity));
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& sol) {
  const int n = p.n_cols();
  Eigen::VectorXd lo, hi;
  p.effective_bounds(lo, hi);

  const Eigen::VectorXd& z = sol.primal;
  auto or_zero = [n](const Eigen::VectorXd& v, Eigen::Index rows) {
    return v.size() == rows ? v : Eigen::VectorXd::Zero(rows).eval();
  };
  const Eigen::VectorXd lam = or_zero(sol.dual_ineq, p.ineq_rhs.size());
  const Eigen::VectorXd nu = or_zero(sol.dual_eq, p.eq_rhs.size());
  const Eigen::VectorXd zl = or_zero(sol.dual_lower, n);
  const Eigen::VectorXd zu = or_zero(sol.dual_upper, n);

  Eigen::VectorXd grad = p.hessian * z + p.linear - zl + zu;
  if (p.ineq_rhs.size() > 0) grad += p.ineq_matrix.transpose() * lam;
  if (p.eq_rhs.size() > 0) grad += p.eq_matrix.transpose() * nu;

  KktResiduals r;
  r.stationarity = max_abs(grad);

  double feas = 0.0;
  if (p.ineq_rhs.size() > 0) {
    Eigen::VectorXd slack = p.ineq_rhs - p.ineq_matrix * z;
    feas = std::max(feas, std::max(0.0, -slack.minCoeff()));
    double comp = 0.0;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      comp = std::max(comp, std::abs(lam[i] * slack[i]));
    }
    r.complementarity = comp;
  }
  if (p.eq_rhs.size() > 0) {
    feas = std::max(feas, max_abs(p.eq_matrix * z - p.eq_rhs));
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lo[j])) {
      feas = std::max(feas, lo[j] - z[j]);
      r.complementarity = std::max(r.complementarity, std::abs(zl[j] * (z[j] - lo[j])));
    } else {
      r.complementarity = std::max(r.complementarity, std::abs(zl[j]));
    }
    if (std::isfinite(hi[j])) {
      feas = std::max(feas, z[j] - hi[j]);
      r.complementarity = std::max(r.complementarity, std::abs(zu[j] * (hi[j] - z[j])));
    } else {
      r.complementarity = std::max(r.complementarity, std::abs(zu[j]));
    }
  }
  r.primal = std::max(feas, 0.0);
  return r;
}

namespace {

void validate_problem(const QpProblem& p) {
  const int n = p.n_cols();
  if (p.hessian.rows() != n || p.hessian.cols() != n || p.lb.size() != n ||
      p.ub.size() != n || p.ineq_matrix.cols() != n || p.eq_matrix.cols() != n ||
      p.ineq_matrix.rows() != p.ineq_rhs.size() || p.eq_matrix.rows() != p.eq_rhs.size()) {
    throw std::invalid_argument("solve_qp: dimension mismatch");
  }
  // symmetry / PSD screen for this problem family
  SparseMat asym = SparseMat(p.hessian.transpose()) - p.hessian;
  double worst = 0.0;
  for (int outer = 0; outer < asym.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(asym, outer); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  if (worst > 1e-12 * (1.0 + max_abs(Eigen::VectorXd(p.hessian.diagonal())))) {
    throw std::invalid_argument("solve_qp: hessian is not symmetric");
  }
  Eigen::VectorXd diag = p.hessian.diagonal();
  for (Eigen::Index j = 0; j < diag.size(); ++j) {
    if (diag[j] < 0.0) throw std::invalid_argument("solve_qp: hessian has a negative diagonal");
  }
}

// Full-space stationarity residual absorbed by the box duals of a pinned
// column; keeps the certificate exact for eliminated columns.
void absorb_fixed_duals(const QpProblem& p, QpSolution& sol,
                        const std::vector<int>& fixed_cols) {
  if (fixed_cols.empty()) return;
  Eigen::VectorXd grad = p.hessian * sol.primal + p.linear;
  if (p.ineq_rhs.size() > 0) grad += p.ineq_matrix.transpose() * sol.dual_ineq;
  if (p.eq_rhs.size() > 0) grad += p.eq_matrix.transpose() * sol.dual_eq;
  for (int j : fixed_cols) {
    const double r = grad[j];
    if (r >= 0.0) {
      sol.dual_lower[j] = r;
      sol.dual_upper[j] = 0.0;
    } else {
      sol.dual_lower[j] = 0.0;
      sol.dual_upper[j] = -r;
    }
  }
}

}  // namespace

QpSolution QpSolver::solve(const QpProblem& p, const QpSettings& settings) {
  validate_problem(p);
  const int n = p.n_cols();
  const int m_in_full = static_cast<int>(p.ineq_rhs.size());
  const int m_eq_full = static_cast<int>(p.eq_rhs.size());

  QpSolution sol;
  sol.primal = Eigen::VectorXd::Zero(n);
  sol.dual_ineq = Eigen::VectorXd::Zero(m_in_full);
  sol.dual_eq = Eigen::VectorXd::Zero(m_eq_full);
  sol.dual_lower = Eigen::VectorXd::Zero(n);
  sol.dual_upper = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd lo_full, hi_full;
  p.effective_bounds(lo_full, hi_full);

  // empty box: infeasible with a trivial box certificate
  for (int j = 0; j < n; ++j) {
    if (lo_full[j] > hi_full[j]) {
      sol.status = QpStatus::infeasible;
      sol.primal_infeasibility = lo_full[j] - hi_full[j];
      sol.has_farkas = true;
      sol.farkas_ineq = Eigen::VectorXd::Zero(m_in_full);
      sol.farkas_eq = Eigen::VectorXd::Zero(m_eq_full);
      sol.farkas_lower = Eigen::VectorXd::Zero(n);
      sol.farkas_upper = Eigen::VectorXd::Zero(n);
      sol.farkas_lower[j] = 1.0;
      sol.farkas_upper[j] = 1.0;
      sol.kkt = KktResiduals{kInf, kInf, kInf};
      return sol;
    }
  }

  // pin columns whose box collapsed (branched binaries)
  Reduced r;
  std::vector<int> reduced_of(n, -1);
  Eigen::VectorXd embed = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (hi_full[j] - lo_full[j] <= kFixedWidth) {
      r.fixed_cols.push_back(j);
      embed[j] = lo_full[j];
    } else {
      reduced_of[j] = static_cast<int>(r.free_cols.size());
      r.free_cols.push_back(j);
    }
  }
  const int nf = static_cast<int>(r.free_cols.size());
  r.fixed_vals.resize(static_cast<int>(r.fixed_cols.size()));
  for (size_t i = 0; i < r.fixed_cols.size(); ++i) r.fixed_vals[i] = embed[r.fixed_cols[i]];

  Eigen::VectorXd h_eff = p.linear + p.hessian * embed;
  Eigen::VectorXd g_eff = p.ineq_rhs - p.ineq_matrix * embed;
  Eigen::VectorXd f_eff = p.eq_rhs - p.eq_matrix * embed;

  // classify rows: rows whose support is entirely pinned are checked here
  std::vector<char> ineq_has_free(m_in_full, 0), eq_has_free(m_eq_full, 0);
  for (int outer = 0; outer < p.ineq_matrix.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(p.ineq_matrix, outer); it; ++it) {
      if (reduced_of[it.col()] >= 0 && it.value() != 0.0) ineq_has_free[it.row()] = 1;
    }
  }
  for (int outer = 0; outer < p.eq_matrix.outerSize(); ++outer) {
    for (SparseMat::InnerIterator it(p.eq_matrix, outer); it; ++it) {
      if (reduced_of[it.col()] >= 0 && it.value() != 0.0) eq_has_free[it.row()] = 1;
    }
  }

  auto pinned_row_certificate = [&](bool is_eq, int row, double violation) {
    sol.status = QpStatus::infeasible;
    sol.primal_infeasibility = violation;
    sol.has_farkas = true;
    sol.farkas_ineq = Eigen::VectorXd::Zero(m_in_full);
    sol.farkas_eq = Eigen::VectorXd::Zero(m_eq_full);
    sol.farkas_lower = Eigen::VectorXd::Zero(n);
    sol.farkas_upper = Eigen::VectorXd::Zero(n);
    const SparseMat& mat = is_eq ? p.eq_matrix : p.ineq_matrix;
    double sign = 1.0;
    if (is_eq) {
      sign = (f_eff[row] < 0.0) ? 1.0 : -1.0;  // want aggregated rhs negative
      sol.farkas_eq[row] = sign;
    } else {
      sol.farkas_ineq[row] = 1.0;
    }
    // absorb pinned-column coefficients into box duals
    for (int outer = 0; outer < mat.outerSize(); ++outer) {
      for (SparseMat::InnerIterator it(mat, outer); it; ++it) {
        if (it.row() != row) continue;
        const double a = sign * it.value();
        if (a > 0.0) sol.farkas_lower[it.col()] += a;
        else if (a < 0.0) sol.farkas_upper[it.col()] += -a;
      }
    }
    sol.kkt = KktResiduals{kInf, kInf, kInf};
  };

  for (int i = 0; i < m_in_full; ++i) {
    if (!ineq_has_free[i] && g_eff[i] < -kDroppedRowTol) {
      pinned_row_certificate(false, i, -g_eff[i]);
      return sol;
    }
    if (ineq_has_free[i]) r.kept_ineq.push_back(i);
  }
  for (int i = 0; i < m_eq_full; ++i) {
    if (!eq_has_free[i] && std::abs(f_eff[i]) > kDroppedRowTol) {
      pinned_row_certificate(true, i, std::abs(f_eff[i]));
      return sol;
    }
    if (eq_has_free[i]) r.kept_eq.push_back(i);
  }

  auto finish_optimal = [&](double tol) {
    absorb_fixed_duals(p, sol, r.fixed_cols);
    sol.objective = 0.5 * sol.primal.dot(p.hessian * sol.primal) + p.linear.dot(sol.primal);
    sol.kkt = kkt_residuals(p, sol);
    sol.status = sol.kkt.within(tol) ? QpStatus::optimal : QpStatus::iteration_limit;
  };

  if (nf == 0) {
    sol.primal = embed;
    finish_optimal(settings.kkt_tol);
    return sol;
  }

  // reduced data
  {
    SparseMat h_free_rows = select_rows(p.hessian, r.free_cols);
    r.H = select_columns(h_free_rows, reduced_of, nf);
  }
  {
    SparseMat g_rows = select_rows(p.ineq_matrix, r.kept_ineq);
    r.G = select_columns(g_rows, reduced_of, nf);
    SparseMat f_rows = select_rows(p.eq_matrix, r.kept_eq);
    r.F = select_columns(f_rows, reduced_of, nf);
  }
  r.Gt = r.G.transpose();
  r.Ft = r.F.transpose();
  r.h.resize(nf);
  r.lo.resize(nf);
  r.hi.resize(nf);
  for (int jr = 0; jr < nf; ++jr) {
    const int j = r.free_cols[jr];
    r.h[jr] = h_eff[j];
    r.lo[jr] = lo_full[j];
    r.hi[jr] = hi_full[j];
  }
  r.g.resize(static_cast<int>(r.kept_ineq.size()));
  for (size_t i = 0; i < r.kept_ineq.size(); ++i) r.g[static_cast<int>(i)] = g_eff[r.kept_ineq[i]];
  r.f.resize(static_cast<int>(r.kept_eq.size()));
  for (size_t i = 0; i < r.kept_eq.size(); ++i) r.f[static_cast<int>(i)] = f_eff[r.kept_eq[i]];

  const int m_in = static_cast<int>(r.g.size());
  const int m_eq = static_cast<int>(r.f.size());

  std::vector<int> lower_set, upper_set;
  for (int j = 0; j < nf; ++j) {
    if (std::isfinite(r.lo[j])) lower_set.push_back(j);
    if (std::isfinite(r.hi[j])) upper_set.push_back(j);
  }
  const int n_pairs = m_in + static_cast<int>(lower_set.size() + upper_set.size());

  const double data_norm =
      std::max({1.0, max_abs(r.h), max_abs(r.g), max_abs(r.f)});

  // --- interior-point iteration ---------------------------------------
  IpmState st;
  st.z.resize(nf);
  for (int j = 0; j < nf; ++j) {
    const bool lof = std::isfinite(r.lo[j]), hif = std::isfinite(r.hi[j]);
    // zero clamped strictly inside the box; midpoints of wide boxes would
    // start the iteration absurdly far from the equality manifold
    if (lof && hif) {
      const double margin = std::min(1.0, 0.25 * (r.hi[j] - r.lo[j]));
      st.z[j] = std::clamp(0.0, r.lo[j] + margin, r.hi[j] - margin);
    } else if (lof) {
      st.z[j] = std::max(0.0, r.lo[j] + 1.0);
    } else if (hif) {
      st.z[j] = std::min(0.0, r.hi[j] - 1.0);
    } else {
      st.z[j] = 0.0;
    }
  }
  if (settings.initial_primal && settings.initial_primal->size() == n) {
    for (int jr = 0; jr < nf; ++jr) {
      const int j = r.free_cols[jr];
      double v = (*settings.initial_primal)[j];
      const double margin = (std::isfinite(r.lo[jr]) && std::isfinite(r.hi[jr]))
                                ? std::min(1.0, 0.25 * (r.hi[jr] - r.lo[jr]))
                                : 1.0;
      if (std::isfinite(r.lo[jr])) v = std::max(v, r.lo[jr] + margin);
      if (std::isfinite(r.hi[jr])) v = std::min(v, r.hi[jr] - margin);
      if (std::isfinite(v)) st.z[jr] = v;
    }
  }
  st.s.resize(m_in);
  if (m_in > 0) {
    Eigen::VectorXd slack0 = r.g - r.G * st.z;
    for (int i = 0; i < m_in; ++i) st.s[i] = std::max(1.0, slack0[i]);
  }
  st.lam = Eigen::VectorXd::Ones(m_in);
  st.nu = Eigen::VectorXd::Zero(m_eq);
  st.zl = Eigen::VectorXd::Ones(static_cast<int>(lower_set.size()));
  st.zu = Eigen::VectorXd::Ones(static_cast<int>(upper_set.size()));

  const int kkt_dim = nf + m_eq;
  SparseMat kkt(kkt_dim, kkt_dim);
  bool pattern_ready = false;
  double reg_p = kPrimalReg * (1.0 + max_abs(Eigen::VectorXd(r.H.diagonal())));
  double reg_d = kDualReg;

  std::vector<Eigen::Triplet<double>> trips;
  SparseMat m_mat;  // H + G' W G + D (with primal regularization)

  auto apply_exact_kkt = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(kkt_dim);
    Eigen::VectorXd vz = v.head(nf);
    Eigen::VectorXd vn = v.tail(m_eq);
    out.head(nf) = m_mat * vz - reg_p * vz;
    if (m_eq > 0) {
      out.head(nf) += r.Ft * vn;
      out.tail(m_eq) = r.F * vz;
    }
    return out;
  };
  auto solve_refined = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd x = ldlt_.solve(rhs);
    for (int round = 0; round < 3; ++round) {
      Eigen::VectorXd res = rhs - apply_exact_kkt(x);
      if (max_abs(res) <= 1e-13 * std::max(1.0, max_abs(rhs))) break;
      x += ldlt_.solve(res);
    }
    return x;
  };

  double best_feas = kInf;
  std::vector<double> feas_trail;
  const double tol = settings.kkt_tol;

  for (int it = 0; it < settings.max_iter; ++it) {
    sol.iterations = it;

    Eigen::VectorXd wl(lower_set.size()), wu(upper_set.size());
    for (size_t i = 0; i < lower_set.size(); ++i) wl[static_cast<int>(i)] = st.z[lower_set[i]] - r.lo[lower_set[i]];
    for (size_t i = 0; i < upper_set.size(); ++i) wu[static_cast<int>(i)] = r.hi[upper_set[i]] - st.z[upper_set[i]];

    // residuals of the original (unshifted) KKT system
    Eigen::VectorXd rd = r.H * st.z + r.h;
    if (m_in > 0) rd += r.Gt * st.lam;
    if (m_eq > 0) rd += r.Ft * st.nu;
    for (size_t i = 0; i < lower_set.size(); ++i) rd[lower_set[i]] -= st.zl[static_cast<int>(i)];
    for (size_t i = 0; i < upper_set.size(); ++i) rd[upper_set[i]] += st.zu[static_cast<int>(i)];

    Eigen::VectorXd rp_in = m_in > 0 ? Eigen::VectorXd(r.G * st.z + st.s - r.g)
                                     : Eigen::VectorXd();
    Eigen::VectorXd rp_eq = m_eq > 0 ? Eigen::VectorXd(r.F * st.z - r.f)
                                     : Eigen::VectorXd();

    // exact optimality measures (slack recomputed from z, not the internal s)
    double stat = max_abs(rd);
    double feas = 0.0, comp = 0.0;
    if (m_in > 0) {
      Eigen::VectorXd slack = r.g - r.G * st.z;
      feas = std::max(feas, std::max(0.0, -slack.minCoeff()));
      for (int i = 0; i < m_in; ++i) comp = std::max(comp, std::abs(st.lam[i] * slack[i]));
    }
    if (m_eq > 0) feas = std::max(feas, max_abs(rp_eq));
    for (size_t i = 0; i < lower_set.size(); ++i)
      comp = std::max(comp, std::abs(st.zl[static_cast<int>(i)] * wl[static_cast<int>(i)]));
    for (size_t i = 0; i < upper_set.size(); ++i)
      comp = std::max(comp, std::abs(st.zu[static_cast<int>(i)] * wu[static_cast<int>(i)]));
    best_feas = std::min(best_feas, feas);
    feas_trail.push_back(best_feas);

    if (stat <= 0.9 * tol && feas <= 0.9 * tol && comp <= 0.9 * tol) {
      // success: inflate and certify below
      for (int jr = 0; jr < nf; ++jr) sol.primal[r.free_cols[jr]] = st.z[jr];
      for (size_t i = 0; i < r.fixed_cols.size(); ++i) sol.primal[r.fixed_cols[i]] = r.fixed_vals[static_cast<int>(i)];
      for (size_t i = 0; i < r.kept_ineq.size(); ++i) sol.dual_ineq[r.kept_ineq[i]] = st.lam[static_cast<int>(i)];
      for (size_t i = 0; i < r.kept_eq.size(); ++i) sol.dual_eq[r.kept_eq[i]] = st.nu[static_cast<int>(i)];
      for (size_t i = 0; i < lower_set.size(); ++i) sol.dual_lower[r.free_cols[lower_set[i]]] = st.zl[static_cast<int>(i)];
      for (size_t i = 0; i < upper_set.size(); ++i) sol.dual_upper[r.free_cols[upper_set[i]]] = st.zu[static_cast<int>(i)];
      finish_optimal(tol);
      return sol;
    }

    // unboundedness guard (cannot occur with the builder's finite boxes)
    const double obj_now = 0.5 * st.z.dot(r.H * st.z) + r.h.dot(st.z);
    if ((max_abs(st.z) > 1e12 || obj_now < -1e14) && feas <= 1e-4 * data_norm) {
      sol.status = QpStatus::unbounded;
      sol.primal_infeasibility = feas;
      sol.kkt = KktResiduals{kInf, kInf, kInf};
      return sol;
    }

    // Farkas-style infeasibility certificate from the (scaled) duals
    if (it >= 3 && n_pairs > 0) {
      double theta = std::max({max_abs(st.lam), max_abs(st.nu), max_abs(st.zl), max_abs(st.zu)});
      if (theta > 1e2) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(nf);
        if (m_in > 0) t = r.Gt * st.lam;
        if (m_eq > 0) t += r.Ft * st.nu;
        for (size_t i = 0; i < lower_set.size(); ++i) t[lower_set[i]] -= st.zl[static_cast<int>(i)];
        for (size_t i = 0; i < upper_set.size(); ++i) t[upper_set[i]] += st.zu[static_cast<int>(i)];
        double val = 0.0;
        if (m_in > 0) val += r.g.dot(st.lam);
        if (m_eq > 0) val += r.f.dot(st.nu);
        for (size_t i = 0; i < lower_set.size(); ++i) val -= r.lo[lower_set[i]] * st.zl[static_cast<int>(i)];
        for (size_t i = 0; i < upper_set.size(); ++i) val += r.hi[upper_set[i]] * st.zu[static_cast<int>(i)];
        t /= theta;
        val /= theta;
        double slop = 0.0;
        bool usable = true;
        for (int j = 0; j < nf; ++j) {
          const double bnd = std::max(std::isfinite(r.lo[j]) ? std::abs(r.lo[j]) : kInf,
                                      std::isfinite(r.hi[j]) ? std::abs(r.hi[j]) : kInf);
          if (std::isfinite(bnd)) {
            slop += std::abs(t[j]) * bnd;
          } else if (std::abs(t[j]) > 1e-10) {
            usable = false;
            break;
          }
        }
        if (usable && val + slop < -1e-9 * data_norm) {
          sol.status = QpStatus::infeasible;
          sol.primal_infeasibility = best_feas;
          sol.kkt = KktResiduals{kInf, kInf, kInf};
          sol.has_farkas = true;
          sol.farkas_ineq = Eigen::VectorXd::Zero(m_in_full);
          sol.farkas_eq = Eigen::VectorXd::Zero(m_eq_full);
          sol.farkas_lower = Eigen::VectorXd::Zero(n);
          sol.farkas_upper = Eigen::VectorXd::Zero(n);
          for (size_t i = 0; i < r.kept_ineq.size(); ++i) sol.farkas_ineq[r.kept_ineq[i]] = st.lam[static_cast<int>(i)] / theta;
          for (size_t i = 0; i < r.kept_eq.size(); ++i) sol.farkas_eq[r.kept_eq[i]] = st.nu[static_cast<int>(i)] / theta;
          for (size_t i = 0; i < lower_set.size(); ++i) sol.farkas_lower[r.free_cols[lower_set[i]]] = st.zl[static_cast<int>(i)] / theta;
          for (size_t i = 0; i < upper_set.size(); ++i) sol.farkas_upper[r.free_cols[upper_set[i]]] = st.zu[static_cast<int>(i)] / theta;
          for (int jr = 0; jr < nf; ++jr) sol.primal[r.free_cols[jr]] = st.z[jr];
          for (size_t i = 0; i < r.fixed_cols.size(); ++i) sol.primal[r.fixed_cols[i]] = r.fixed_vals[static_cast<int>(i)];
          return sol;
        }
      }
    }

    const double mu = n_pairs > 0
        ? (st.lam.dot(st.s) + st.zl.dot(wl) + st.zu.dot(wu)) / n_pairs
        : 0.0;

    // stalled with stubborn primal infeasibility: complementarity has
    // collapsed and feasibility stopped improving
    if (it >= 30 && best_feas > 1e-6 && mu < 1e-10 * data_norm &&
        best_feas > 0.9 * feas_trail[feas_trail.size() - 16]) {
      sol.status = QpStatus::infeasible;
      sol.primal_infeasibility = best_feas;
      sol.kkt = KktResiduals{kInf, kInf, kInf};
      for (int jr = 0; jr < nf; ++jr) sol.primal[r.free_cols[jr]] = st.z[jr];
      return sol;
    }

    // KKT matrix: [H + G' W G + D + reg_p   F'; F   -reg_d]
    Eigen::VectorXd w = m_in > 0 ? Eigen::VectorXd(st.lam.cwiseQuotient(st.s))
                                 : Eigen::VectorXd();
    trips.clear();
    Eigen::VectorXd dvec = Eigen::VectorXd::Constant(nf, reg_p);
    for (size_t i = 0; i < lower_set.size(); ++i) dvec[lower_set[i]] += st.zl[static_cast<int>(i)] / wl[static_cast<int>(i)];
    for (size_t i = 0; i < upper_set.size(); ++i) dvec[upper_set[i]] += st.zu[static_cast<int>(i)] / wu[static_cast<int>(i)];
    SparseMat dmat(nf, nf);
    {
      std::vector<Eigen::Triplet<double>> dts;
      dts.reserve(nf);
      for (int j = 0; j < nf; ++j) dts.emplace_back(j, j, dvec[j]);
      dmat.setFromTriplets(dts.begin(), dts.end());
    }
    if (m_in > 0) {
      SparseMat gw = w.asDiagonal() * r.G;
      SparseMat gtwg = r.Gt * gw;
      SparseMat hd = r.H + dmat;
      m_mat = hd + gtwg;
    } else {
      m_mat = r.H + dmat;
    }
    m_mat.makeCompressed();

    for (int outer = 0; outer < m_mat.outerSize(); ++outer) {
      for (SparseMat::InnerIterator itr(m_mat, outer); itr; ++itr) {
        trips.emplace_back(static_cast<int>(itr.row()), static_cast<int>(itr.col()), itr.value());
      }
    }
    for (int outer = 0; outer < r.F.outerSize(); ++outer) {
      for (SparseMat::InnerIterator itr(r.F, outer); itr; ++itr) {
        trips.emplace_back(nf + static_cast<int>(itr.row()), static_cast<int>(itr.col()), itr.value());
      }
    }
    for (int i = 0; i < m_eq; ++i) trips.emplace_back(nf + i, nf + i, -reg_d);
    kkt.setFromTriplets(trips.begin(), trips.end());
    kkt.makeCompressed();

    if (!pattern_ready) {
      ldlt_.analyzePattern(kkt);
      pattern_ready = true;
    }
    ldlt_.factorize(kkt);
    if (ldlt_.info() != Eigen::Success) {
      reg_p *= 100.0;
      reg_d *= 100.0;
      pattern_ready = false;
      continue;
    }

    auto assemble_rhs = [&](const Eigen::VectorXd& rc_s, const Eigen::VectorXd& rc_l,
                            const Eigen::VectorXd& rc_u) {
      Eigen::VectorXd rhs(kkt_dim);
      Eigen::VectorXd top = -rd;
      if (m_in > 0) {
        Eigen::VectorXd tmp = (st.lam.cwiseProduct(rp_in) - rc_s).cwiseQuotient(st.s);
        top -= r.Gt * tmp;
      }
      for (size_t i = 0; i < lower_set.size(); ++i)
        top[lower_set[i]] -= rc_l[static_cast<int>(i)] / wl[static_cast<int>(i)];
      for (size_t i = 0; i < upper_set.size(); ++i)
        top[upper_set[i]] += rc_u[static_cast<int>(i)] / wu[static_cast<int>(i)];
      rhs.head(nf) = top;
      if (m_eq > 0) rhs.tail(m_eq) = -rp_eq;
      return rhs;
    };
    auto recover = [&](const Eigen::VectorXd& sol_vec, const Eigen::VectorXd& rc_s,
                       const Eigen::VectorXd& rc_l, const Eigen::VectorXd& rc_u,
                       Eigen::VectorXd& dz, Eigen::VectorXd& dnu, Eigen::VectorXd& ds,
                       Eigen::VectorXd& dlam, Eigen::VectorXd& dzl, Eigen::VectorXd& dzu) {
      dz = sol_vec.head(nf);
      dnu = sol_vec.tail(m_eq);
      if (m_in > 0) {
        ds = -rp_in - r.G * dz;
        dlam = (-rc_s - st.lam.cwiseProduct(ds)).cwiseQuotient(st.s);
      } else {
        ds.resize(0);
        dlam.resize(0);
      }
      dzl.resize(static_cast<int>(lower_set.size()));
      dzu.resize(static_cast<int>(upper_set.size()));
      for (size_t i = 0; i < lower_set.size(); ++i) {
        const int ii = static_cast<int>(i);
        dzl[ii] = (-rc_l[ii] - st.zl[ii] * dz[lower_set[i]]) / wl[ii];
      }
      for (size_t i = 0; i < upper_set.size(); ++i) {
        const int ii = static_cast<int>(i);
        dzu[ii] = (-rc_u[ii] + st.zu[ii] * dz[upper_set[i]]) / wu[ii];
      }
    };

    // predictor
    Eigen::VectorXd rc_s = m_in > 0 ? Eigen::VectorXd(st.lam.cwiseProduct(st.s))
                                    : Eigen::VectorXd();
    Eigen::VectorXd rc_l = st.zl.cwiseProduct(wl);
    Eigen::VectorXd rc_u = st.zu.cwiseProduct(wu);
    Eigen::VectorXd step = solve_refined(assemble_rhs(rc_s, rc_l, rc_u));
    Eigen::VectorXd dz_a, dnu_a, ds_a, dlam_a, dzl_a, dzu_a;
    recover(step, rc_s, rc_l, rc_u, dz_a, dnu_a, ds_a, dlam_a, dzl_a, dzu_a);

    Eigen::VectorXd dwl_a(lower_set.size()), dwu_a(upper_set.size());
    for (size_t i = 0; i < lower_set.size(); ++i) dwl_a[static_cast<int>(i)] = dz_a[lower_set[i]];
    for (size_t i = 0; i < upper_set.size(); ++i) dwu_a[static_cast<int>(i)] = -dz_a[upper_set[i]];

    double ap = std::min({max_step(st.s, ds_a), max_step(wl, dwl_a), max_step(wu, dwu_a), 1.0});
    double ad = std::min({max_step(st.lam, dlam_a), max_step(st.zl, dzl_a), max_step(st.zu, dzu_a), 1.0});
    double mu_aff = 0.0;
    if (n_pairs > 0) {
      mu_aff = ((st.lam + ad * dlam_a).dot(st.s + ap * ds_a) +
                (st.zl + ad * dzl_a).dot(wl + ap * dwl_a) +
                (st.zu + ad * dzu_a).dot(wu + ap * dwu_a)) / n_pairs;
    }
    double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
    // keep some centering while the primal residual is still being closed,
    // otherwise mu can collapse and strand the iterate infeasible
    if (feas > 1e-8 * (1.0 + data_norm) && n_pairs > 0) sigma = std::max(sigma, 0.01);

    // corrector
    if (m_in > 0) rc_s = st.lam.cwiseProduct(st.s) + dlam_a.cwiseProduct(ds_a)
                         - Eigen::VectorXd::Constant(m_in, sigma * mu);
    rc_l = st.zl.cwiseProduct(wl) + dzl_a.cwiseProduct(dwl_a)
           - Eigen::VectorXd::Constant(static_cast<int>(lower_set.size()), sigma * mu);
    rc_u = st.zu.cwiseProduct(wu) + dzu_a.cwiseProduct(dwu_a)
           - Eigen::VectorXd::Constant(static_cast<int>(upper_set.size()), sigma * mu);
    step = solve_refined(assemble_rhs(rc_s, rc_l, rc_u));
    Eigen::VectorXd dz, dnu, ds, dlam, dzl, dzu;
    recover(step, rc_s, rc_l, rc_u, dz, dnu, ds, dlam, dzl, dzu);

    Eigen::VectorXd dwl(lower_set.size()), dwu(upper_set.size());
    for (size_t i = 0; i < lower_set.size(); ++i) dwl[static_cast<int>(i)] = dz[lower_set[i]];
    for (size_t i = 0; i < upper_set.size(); ++i) dwu[static_cast<int>(i)] = -dz[upper_set[i]];

    const double tau = mu < 1e-6 ? 0.9995 : 0.995;
    ap = tau * std::min({max_step(st.s, ds), max_step(wl, dwl), max_step(wu, dwu), 1.0 / tau});
    ad = tau * std::min({max_step(st.lam, dlam), max_step(st.zl, dzl), max_step(st.zu, dzu), 1.0 / tau});

    st.z += ap * dz;
    if (m_in > 0) {
      st.s += ap * ds;
      st.lam += ad * dlam;
    }
    if (m_eq > 0) st.nu += ad * dnu;
    st.zl += ad * dzl;
    st.zu += ad * dzu;
  }

  // out of iterations
  for (int jr = 0; jr < nf; ++jr) sol.primal[r.free_cols[jr]] = st.z[jr];
  for (size_t i = 0; i < r.fixed_cols.size(); ++i) sol.primal[r.fixed_cols[i]] = r.fixed_vals[static_cast<int>(i)];
  sol.iterations = settings.max_iter;
  if (best_feas > 1e-6) {
    sol.status = QpStatus::infeasible;
    sol.primal_infeasibility = best_feas;
    sol.kkt = KktResiduals{kInf, kInf, kInf};
  } else {
    sol.status = QpStatus::iteration_limit;
    sol.kkt = kkt_residuals(p, sol);
  }
  return sol;
}

QpSolution solve_qp(const QpProblem& problem, double kkt_tol, int max_iter) {
  QpSolver solver;
  QpSettings settings;
  settings.kkt_tol = kkt_tol;
  settings.max_iter = max_iter;
  return solver.solve(problem, settings);
}

}  // namespace bumpmpc
