#pragma once

// Sparse CSR operator, Jacobi-preconditioned CG and BiCGSTAB, and a dense
// direct solver for the boundary-force system.

#include "ibflow/error.hpp"
#include "ibflow/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace ibflow {

using DVec = std::vector<double>;

class SparseOperator {
 public:
  struct Triplet {
    std::size_t row, col;
    double value;
  };

  SparseOperator() = default;

  /// Sums duplicate entries and drops exact zeros.
  static SparseOperator from_triplets(std::size_t n, std::vector<Triplet> t, bool symmetric = false) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseOperator A;
    A.n_ = n;
    A.symmetric_ = symmetric;
    A.row_ptr_.assign(n + 1, 0);
    for (std::size_t e = 0; e < t.size();) {
      if (t[e].row >= n || t[e].col >= n) throw ConfigError("sparse entry index out of range");
      std::size_t f = e;
      double v = 0.0;
      while (f < t.size() && t[f].row == t[e].row && t[f].col == t[e].col) v += t[f++].value;
      if (v != 0.0) {
        A.col_.push_back(t[e].col);
        A.val_.push_back(v);
        A.row_ptr_[t[e].row + 1]++;
      }
      e = f;
    }
    for (std::size_t r = 0; r < n; ++r) A.row_ptr_[r + 1] += A.row_ptr_[r];
    A.diag_.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t e = A.row_ptr_[r]; e < A.row_ptr_[r + 1]; ++e)
        if (A.col_[e] == r) A.diag_[r] = A.val_[e];
    return A;
  }

  static SparseOperator identity(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, std::move(t), true);
  }

  std::size_t size() const { return n_; }
  bool symmetric() const { return symmetric_; }
  const DVec& diagonal() const { return diag_; }
  std::size_t nonzeros() const { return val_.size(); }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col() const { return col_; }
  const DVec& val() const { return val_; }

  double coeff(std::size_t r, std::size_t c) const {
    for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
      if (col_[e] == c) return val_[e];
    return 0.0;
  }

  void multiply(const DVec& x, DVec& y) const {
    y.resize(n_);
    parallel_ranges(n_, [&](std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
        y[r] = s;
      }
    });
  }

  DVec operator*(const DVec& x) const {
    DVec y;
    multiply(x, y);
    return y;
  }

 private:
  std::size_t n_ = 0;
  bool symmetric_ = false;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_;
  DVec val_;
  DVec diag_;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;  // ||b - A x|| / ||b|| from the final iterate
  bool converged = false;
  std::vector<double> history;     // recurrence residual per iteration

  std::string summary() const {
    std::ostringstream s;
    s << (converged ? "converged" : "not converged") << " after " << iterations
      << " iterations, relative residual " << relative_residual;
    if (!history.empty()) {
      s << "; residual history:";
      const std::size_t step = std::max<std::size_t>(1, history.size() / 8);
      for (std::size_t i = 0; i < history.size(); i += step) s << ' ' << history[i];
      s << ' ' << history.back();
    }
    return s.str();
  }
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  bool jacobi = true;
  /// Called after each iteration with (iteration, x, r). Tests use it to
  /// tamper with the recurrence; production code leaves it empty.
  std::function<void(int, DVec&, DVec&)> on_iteration;
};

namespace detail {

inline double dot(const DVec& a, const DVec& b) {
  return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}
inline double norm2(const DVec& a) { return std::sqrt(dot(a, a)); }

inline DVec true_residual(const SparseOperator& A, const DVec& b, const DVec& x) {
  DVec r = A * x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return r;
}

inline DVec inverse_diagonal(const SparseOperator& A, bool jacobi) {
  DVec inv(A.size(), 1.0);
  if (!jacobi) return inv;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = A.diagonal()[i];
    inv[i] = d != 0.0 ? 1.0 / d : 1.0;
  }
  return inv;
}

}  // namespace detail

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// systems. `x` holds the initial guess on entry. Throws NumericalError on
/// breakdown (non-positive curvature); returns converged = false when
/// max_iter is exhausted.
inline SolveReport cg_solve(const SparseOperator& A, const DVec& b, DVec& x, const SolveOptions& opt = {}) {
  const std::size_t n = A.size();
  if (b.size() != n) throw ConfigError("cg_solve: right-hand side size mismatch");
  if (x.size() != n) x.assign(n, 0.0);
  SolveReport rep;
  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return rep;
  }
  const DVec minv = detail::inverse_diagonal(A, opt.jacobi);
  DVec r = detail::true_residual(A, b, x);
  DVec z(n), p(n), q(n);
  double rel = detail::norm2(r) / bnorm;
  bool restart = true;
  double rz = 0.0;
  while (rel > opt.tol && rep.iterations < opt.max_iter) {
    if (restart) {
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = minv[i] * r[i];
      rz = detail::dot(r, z);
      restart = false;
    }
    A.multiply(p, q);
    const double pq = detail::dot(p, q);
    if (!(pq > 0.0)) {
      rep.relative_residual = detail::norm2(detail::true_residual(A, b, x)) / bnorm;
      throw NumericalError("conjugate gradient breakdown: operator is not positive definite along the search "
                           "direction (p^T A p = " + std::to_string(pq) + ")");
    }
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++rep.iterations;
    if (opt.on_iteration) opt.on_iteration(rep.iterations, x, r);
    rel = detail::norm2(r) / bnorm;
    rep.history.push_back(rel);
    if (rel <= opt.tol) {
      // Confirm against the true residual; restart from it if they disagree.
      r = detail::true_residual(A, b, x);
      rel = detail::norm2(r) / bnorm;
      restart = true;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = minv[i] * r[i];
    const double rz_new = detail::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  rep.relative_residual = detail::norm2(detail::true_residual(A, b, x)) / bnorm;
  rep.converged = rep.relative_residual <= opt.tol;
  return rep;
}

/// Right-preconditioned BiCGSTAB for nonsymmetric systems. Restarts on
/// breakdown; gives up (converged = false) after max_iter iterations or when
/// the residual stops being finite.
inline SolveReport krylov_solve(const SparseOperator& A, const DVec& b, DVec& x, const SolveOptions& opt = {}) {
  const std::size_t n = A.size();
  if (b.size() != n) throw ConfigError("krylov_solve: right-hand side size mismatch");
  if (x.size() != n) x.assign(n, 0.0);
  SolveReport rep;
  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return rep;
  }
  const DVec minv = detail::inverse_diagonal(A, opt.jacobi);
  DVec r = detail::true_residual(A, b, x);
  DVec rhat, p(n, 0.0), v(n, 0.0), s(n), t(n), y(n), zz(n);
  double rho = 1, alpha = 1, omega = 1;
  double rel = detail::norm2(r) / bnorm;
  bool restart = true;
  int stagnant_restarts = 0;
  while (rel > opt.tol && rep.iterations < opt.max_iter) {
    if (restart) {
      rhat = r;
      rho = alpha = omega = 1.0;
      std::fill(p.begin(), p.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
      restart = false;
    }
    const double rho_new = detail::dot(rhat, r);
    if (std::abs(rho_new) < 1e-300 || omega == 0.0) {
      if (++stagnant_restarts > 5) break;
      r = detail::true_residual(A, b, x);
      restart = true;
      continue;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    for (std::size_t i = 0; i < n; ++i) y[i] = minv[i] * p[i];
    A.multiply(y, v);
    const double rv = detail::dot(rhat, v);
    if (rv == 0.0 || !std::isfinite(rv)) {
      if (++stagnant_restarts > 5) break;
      r = detail::true_residual(A, b, x);
      restart = true;
      continue;
    }
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    ++rep.iterations;
    if (detail::norm2(s) / bnorm <= opt.tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i];
      r = s;
    } else {
      for (std::size_t i = 0; i < n; ++i) zz[i] = minv[i] * s[i];
      A.multiply(zz, t);
      const double tt = detail::dot(t, t);
      omega = tt > 0.0 ? detail::dot(t, s) / tt : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * y[i] + omega * zz[i];
        r[i] = s[i] - omega * t[i];
      }
    }
    if (opt.on_iteration) opt.on_iteration(rep.iterations, x, r);
    rel = detail::norm2(r) / bnorm;
    rep.history.push_back(rel);
    if (!std::isfinite(rel)) break;
    if (rel <= opt.tol) {
      r = detail::true_residual(A, b, x);
      rel = detail::norm2(r) / bnorm;
      restart = true;
    }
  }
  rep.relative_residual = detail::norm2(detail::true_residual(A, b, x)) / bnorm;
  rep.converged = std::isfinite(rep.relative_residual) && rep.relative_residual <= opt.tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Dense direct solve

inline constexpr std::size_t kDefaultDenseCap = 20000;

/// Factorization reused across right-hand sides. Cholesky when the matrix is
/// declared symmetric (falls back to partial-pivot LU if Cholesky fails).
class DenseFactorization {
 public:
  /// Reciprocal condition estimate below which the matrix counts as singular.
  static constexpr double kSingularRcond = 1e-13;

  DenseFactorization() = default;

  DenseFactorization(Eigen::MatrixXd A, bool symmetric, std::size_t cap = kDefaultDenseCap) {
    const auto m = static_cast<std::size_t>(A.rows());
    if (A.rows() != A.cols()) throw ConfigError("dense solve needs a square matrix");
    if (m == 0) throw ConfigError("dense solve needs at least one unknown");
    if (m > cap)
      throw ConfigError("dense system of size " + std::to_string(m) + " exceeds the cap of " + std::to_string(cap) +
                        "; resample the surface more coarsely");
    A_ = std::move(A);
    if (symmetric) {
      llt_.emplace(A_);
      if (llt_->info() == Eigen::Success) {
        rcond_ = llt_->rcond();
      } else {
        llt_.reset();
      }
    }
    if (!llt_) {
      lu_.emplace(A_);
      rcond_ = lu_->rcond();
    }
    if (!(rcond_ > kSingularRcond)) {
      std::ostringstream s;
      s << "dense system is numerically singular (reciprocal condition estimate " << rcond_ << ")";
      throw NumericalError(s.str());
    }
  }

  double rcond() const { return rcond_; }
  bool cholesky() const { return llt_.has_value(); }
  std::size_t size() const { return static_cast<std::size_t>(A_.rows()); }
  const Eigen::MatrixXd& matrix() const { return A_; }

  /// Solves A X = B column by column; checks the inf-norm residual of each
  /// column against tol * ||b||_inf, with one refinement step if needed.
  /// Callers with a cheaper residual of their own pass check = false.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B, double tol = 1e-10, bool check = true) const {
    if (B.rows() != A_.rows()) throw ConfigError("dense solve: right-hand side has the wrong row count");
    Eigen::MatrixXd X = apply(B);
    if (!check) return X;
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
      const double bn = B.col(c).cwiseAbs().maxCoeff();
      Eigen::VectorXd r = B.col(c) - A_ * X.col(c);
      if (r.cwiseAbs().maxCoeff() > tol * bn) {
        X.col(c) += apply(r);
        r = B.col(c) - A_ * X.col(c);
      }
      if (r.cwiseAbs().maxCoeff() > tol * bn) {
        std::ostringstream s;
        s << "dense solve residual " << r.cwiseAbs().maxCoeff() / bn << " exceeds " << tol
          << " (reciprocal condition estimate " << rcond_ << ")";
        throw NumericalError(s.str());
      }
    }
    return X;
  }

  /// Raw solve without any residual check.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& B) const {
    if (llt_) return llt_->solve(B);
    return lu_->solve(B);
  }

 private:

  Eigen::MatrixXd A_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
  double rcond_ = 0.0;
};

inline Eigen::MatrixXd dense_factor_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, bool symmetric = false,
                                          std::size_t cap = kDefaultDenseCap) {
  return DenseFactorization(A, symmetric, cap).solve(B);
}

}  // namespace ibflow
