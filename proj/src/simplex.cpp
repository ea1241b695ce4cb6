#include "fricmot/simplex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fricmot::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  Tableau(const Problem& p, const Options& opt) : R_(p.rows), N_(p.cols), opt_(opt) {
    t_.assign(R_ * N_, 0.0);
    cost_.assign(N_, 0.0);
    rhs_.assign(R_, 0.0);
    flip_.assign(R_, false);
    for (std::size_t r = 0; r < R_; ++r) {
      flip_[r] = p.b[r] < 0.0;
      const double s = flip_[r] ? -1.0 : 1.0;
      rhs_[r] = s * p.b[r];
      for (std::size_t j = 0; j < N_; ++j) t_[r * N_ + j] = s * p.a[r * N_ + j];
    }
    a0_ = t_;
    b0_ = rhs_;
    basis_.resize(R_);
    for (std::size_t r = 0; r < R_; ++r) basis_[r] = N_ + r;  // artificial of row r
    is_basic_.assign(N_, false);
  }

  std::size_t R_, N_;
  Options opt_;
  std::vector<double> t_;
  std::vector<double> rhs_;
  std::vector<bool> flip_;
  std::vector<std::size_t> basis_;
  std::vector<bool> is_basic_;
  std::vector<double> a0_;  // original rows, sign-flipped so that b >= 0
  std::vector<double> b0_;
  std::vector<double> cost_;  // structural costs of the active phase
  bool phase1_ = true;        // artificials cost 1 in phase 1, 0 afterwards
  std::vector<double> d_;  // reduced costs
  double obj_ = 0.0;       // current objective (of the active phase)
  std::size_t iterations_ = 0;

  bool artificial(std::size_t var) const { return var >= N_; }

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(Eigen::Index(R_), Eigen::Index(R_));
    for (std::size_t r = 0; r < R_; ++r) {
      const std::size_t v = basis_[r];
      if (artificial(v))
        B(Eigen::Index(v - N_), Eigen::Index(r)) = 1.0;
      else
        for (std::size_t i = 0; i < R_; ++i) B(Eigen::Index(i), Eigen::Index(r)) = a0_[i * N_ + v];
    }
    return B;
  }

  Eigen::VectorXd basic_costs() const {
    Eigen::VectorXd cb(static_cast<Eigen::Index>(R_));
    for (std::size_t r = 0; r < R_; ++r)
      cb(Eigen::Index(r)) = artificial(basis_[r]) ? (phase1_ ? 1.0 : 0.0) : cost_[basis_[r]];
    return cb;
  }

  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& y) const {
    const Eigen::Map<const RowMat> A(a0_.data(), Eigen::Index(R_), Eigen::Index(N_));
    const Eigen::Map<const Eigen::VectorXd> c(cost_.data(), Eigen::Index(N_));
    Eigen::VectorXd d = c - A.transpose() * y;
    for (std::size_t r = 0; r < R_; ++r)
      if (!artificial(basis_[r])) d(Eigen::Index(basis_[r])) = 0.0;
    return d;
  }

  // Cheap exact test of the current basis: fresh duals and reduced costs.
  bool verified_optimal() const {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix());
    const Eigen::VectorXd y = lu.transpose().solve(basic_costs());
    if (!y.allFinite()) return false;
    const Eigen::VectorXd d = reduced_costs(y);
    for (std::size_t j = 0; j < N_; ++j)
      if (!is_basic_[j] && d(Eigen::Index(j)) < -opt_.optimality_tol) return false;
    return true;
  }

  // Rebuilds the tableau, right-hand side and reduced costs from the original rows.
  bool reinvert() {
    const Eigen::MatrixXd B = basis_matrix();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    if (!(lu.rcond() > 1e-13)) return false;
    const Eigen::Map<const RowMat> A(a0_.data(), Eigen::Index(R_), Eigen::Index(N_));
    const RowMat T = lu.solve(A);
    const Eigen::VectorXd x = lu.solve(Eigen::Map<const Eigen::VectorXd>(b0_.data(), Eigen::Index(R_)));
    const Eigen::VectorXd cb = basic_costs();
    const Eigen::VectorXd y = lu.transpose().solve(cb);
    if (!T.allFinite() || !x.allFinite() || !y.allFinite()) return false;
    Eigen::Map<RowMat>(t_.data(), Eigen::Index(R_), Eigen::Index(N_)) = T;
    for (std::size_t r = 0; r < R_; ++r) {
      const double v = x(Eigen::Index(r));
      rhs_[r] = std::abs(v) < 1e-13 ? 0.0 : v;
      if (!artificial(basis_[r]))
        for (std::size_t q = 0; q < R_; ++q) t_[q * N_ + basis_[r]] = q == r ? 1.0 : 0.0;
    }
    const Eigen::VectorXd d = reduced_costs(y);
    d_.assign(d.data(), d.data() + N_);
    obj_ = cb.dot(x);
    return true;
  }

  void pivot(std::size_t p, std::size_t e) {
    double* prow = &t_[p * N_];
    const double piv = prow[e];
    const double inv = 1.0 / piv;
    for (std::size_t j = 0; j < N_; ++j) prow[j] *= inv;
    prow[e] = 1.0;
    rhs_[p] *= inv;
    for (std::size_t r = 0; r < R_; ++r) {
      if (r == p) continue;
      double* row = &t_[r * N_];
      const double f = row[e];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < N_; ++j) row[j] -= f * prow[j];
      row[e] = 0.0;
      rhs_[r] -= f * rhs_[p];
      if (std::abs(rhs_[r]) < 1e-13) rhs_[r] = 0.0;
    }
    const double fd = d_[e];
    if (fd != 0.0) {
      for (std::size_t j = 0; j < N_; ++j) d_[j] -= fd * prow[j];
      obj_ += fd * rhs_[p];
    }
    d_[e] = 0.0;
    if (!artificial(basis_[p])) is_basic_[basis_[p]] = false;
    basis_[p] = e;
    is_basic_[e] = true;
    ++iterations_;
  }

  // Returns Optimal, Unbounded or IterationLimit.
  Status run(std::size_t max_iter) {
    bool bland = false;
    std::size_t degenerate_run = 0;
    std::size_t since_refactor = 0;
    while (true) {
      if (iterations_ >= max_iter) return Status::IterationLimit;
      if (opt_.refactor_every && since_refactor >= opt_.refactor_every) {
        reinvert();
        since_refactor = 0;
      }
      std::size_t e = N_;
      double best = -opt_.optimality_tol;
      for (std::size_t j = 0; j < N_; ++j) {
        if (is_basic_[j]) continue;
        if (d_[j] < best) {
          e = j;
          if (bland) break;
          best = d_[j];
        }
      }
      if (e == N_) {
        if (verified_optimal()) return Status::Optimal;
        if (!reinvert()) return Status::Optimal;
        since_refactor = 0;
        continue;
      }
      std::size_t p = R_;
      double ratio = std::numeric_limits<double>::infinity();
      double pivval = 0.0;
      for (std::size_t r = 0; r < R_; ++r) {
        const double a = t_[r * N_ + e];
        if (a <= opt_.pivot_tol) continue;
        const double q = rhs_[r] / a;
        if (q < ratio - 1e-12) {
          ratio = q;
          p = r;
          pivval = a;
        } else if (q <= ratio + 1e-12) {
          bool take;
          if (artificial(basis_[r]) != artificial(basis_[p]))
            take = artificial(basis_[r]);
          else if (bland)
            take = basis_[r] < basis_[p];
          else
            take = a > pivval;
          if (take) {
            ratio = std::min(ratio, q);
            p = r;
            pivval = a;
          }
        }
      }
      if (p == R_) return Status::Unbounded;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      bland = degenerate_run >= opt_.degenerate_switch;
      pivot(p, e);
      ++since_refactor;
    }
  }
};

}  // namespace

Solution solve(const Problem& prob, const Options& opt) {
  Solution sol;
  const std::size_t R = prob.rows, N = prob.cols;
  Tableau tab(prob, opt);
  const std::size_t max_iter = opt.max_iterations ? opt.max_iterations : 50 * (R + N) + 1000;

  // Phase 1: minimize the sum of artificials.
  tab.d_.assign(N, 0.0);
  tab.obj_ = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < N; ++j) tab.d_[j] -= tab.t_[r * N + j];
    tab.obj_ += tab.rhs_[r];
  }
  Status st = tab.run(max_iter);
  if (st == Status::IterationLimit) {
    sol.status = st;
    return sol;
  }
  double residual = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    if (tab.artificial(tab.basis_[r])) residual += tab.rhs_[r];
  sol.phase1_residual = residual;
  if (residual > opt.feasibility_tol) {
    sol.status = Status::Infeasible;
    sol.iterations = tab.iterations_;
    return sol;
  }
  // Drive remaining artificials out of the basis where possible.
  for (std::size_t r = 0; r < R; ++r) {
    if (!tab.artificial(tab.basis_[r])) continue;
    std::size_t best = N;
    double mag = 1e-9;
    for (std::size_t j = 0; j < N; ++j) {
      if (tab.is_basic_[j]) continue;
      const double a = std::abs(tab.t_[r * N + j]);
      if (a > mag) {
        mag = a;
        best = j;
      }
    }
    if (best != N) tab.pivot(r, best);
  }

  // Phase 2.
  std::vector<double> c(N);
  for (std::size_t j = 0; j < N; ++j) c[j] = prob.sense == Sense::Max ? -prob.c[j] : prob.c[j];
  tab.cost_ = c;
  tab.phase1_ = false;
  if (!tab.reinvert()) {
    tab.d_ = c;
    tab.obj_ = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t v = tab.basis_[r];
      if (tab.artificial(v)) continue;
      const double cb = c[v];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < N; ++j) tab.d_[j] -= cb * tab.t_[r * N + j];
      tab.obj_ += cb * tab.rhs_[r];
    }
    for (std::size_t r = 0; r < R; ++r)
      if (!tab.artificial(tab.basis_[r])) tab.d_[tab.basis_[r]] = 0.0;
  }
  st = tab.run(max_iter);
  sol.iterations = tab.iterations_;
  if (st != Status::Optimal) {
    sol.status = st;
    return sol;
  }

  // Recompute the basic solution and the duals from a fresh factorization.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(R));
  Eigen::VectorXd bb(static_cast<Eigen::Index>(R)), cb(static_cast<Eigen::Index>(R));
  for (std::size_t r = 0; r < R; ++r) {
    bb(static_cast<Eigen::Index>(r)) = prob.b[r];
    const std::size_t v = tab.basis_[r];
    if (tab.artificial(v)) {
      B(static_cast<Eigen::Index>(v - N), static_cast<Eigen::Index>(r)) = 1.0;
      cb(static_cast<Eigen::Index>(r)) = 0.0;
    } else {
      for (std::size_t i = 0; i < R; ++i) B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = prob.a[i * N + v];
      cb(static_cast<Eigen::Index>(r)) = c[v];
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const Eigen::VectorXd xb = lu.solve(bb);
  const Eigen::VectorXd y = lu.transpose().solve(cb);
  sol.x.assign(N, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t v = tab.basis_[r];
    if (tab.artificial(v)) continue;
    double val = xb(static_cast<Eigen::Index>(r));
    if (val < 0.0 && val > -1e-9) val = 0.0;
    sol.x[v] = val;
  }
  sol.y.assign(R, 0.0);
  for (std::size_t i = 0; i < R; ++i) {
    const double yi = y(static_cast<Eigen::Index>(i));
    sol.y[i] = prob.sense == Sense::Max ? -yi : yi;
  }
  sol.basis = tab.basis_;
  sol.objective = 0.0;
  for (std::size_t j = 0; j < N; ++j) sol.objective += prob.c[j] * sol.x[j];
  sol.dual_objective = 0.0;
  for (std::size_t i = 0; i < R; ++i) sol.dual_objective += prob.b[i] * sol.y[i];
  sol.status = Status::Optimal;
  return sol;
}

}  // namespace fricmot::lp
