#pragma once

// Boundary-condition-enforced IB forcing: assemble the dense M x M force
// system, solve it against a cached factorization, spread the forces and
// correct the tentative velocity.

#include "ibflow/kernel.hpp"
#include "ibflow/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ibflow {

namespace detail {

/// Lagrangian rows touching each Eulerian column, as (row, weight) pairs.
inline std::vector<std::vector<std::pair<std::size_t, double>>> coupling_columns(const CouplingMatrix& D,
                                                                                 const std::vector<char>* mask) {
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(D.cols);
  for (std::size_t i = 0; i < D.rows; ++i)
    for (std::size_t e = D.row_ptr[i]; e < D.row_ptr[i + 1]; ++e) {
      const std::size_t j = D.col[e];
      if (mask && !(*mask)[j]) continue;
      cols[j].push_back({i, D.val[e]});
    }
  return cols;
}

}  // namespace detail

/// A[i,k] = (dt/rho) h^3 dS_k sum_j D_ij D_kj. With `correctable`, the sum
/// runs only over Eulerian nodes whose velocity the correction may change.
inline Eigen::MatrixXd assemble_A(const CouplingMatrix& D, const std::vector<double>& areas, double dt, double rho,
                                  const std::vector<char>* correctable = nullptr) {
  if (D.rows == 0) throw ConfigError("force system needs at least one Lagrangian point");
  if (areas.size() != D.rows) throw ConfigError("assemble_A: area count does not match coupling rows");
  const double c = dt / rho * D.h * D.h * D.h;
  const auto m = static_cast<Eigen::Index>(D.rows);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (const auto& col : detail::coupling_columns(D, correctable))
    for (const auto& [i, di] : col)
      for (const auto& [k, dk] : col) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += di * dk;
  for (Eigen::Index k = 0; k < m; ++k) A.col(k) *= c * areas[static_cast<std::size_t>(k)];
  return A;
}

/// B[i] = U_B,i - interpolate(u_star)[i], one column per component.
inline Eigen::MatrixXd assemble_B(const CouplingMatrix& D, const VectorField& u_star, const std::vector<Vec3>& U_B) {
  if (U_B.size() != D.rows) throw ConfigError("assemble_B: boundary velocity count does not match coupling rows");
  const auto U = interpolate(D, u_star);
  Eigen::MatrixXd B(static_cast<Eigen::Index>(D.rows), 3);
  for (std::size_t i = 0; i < D.rows; ++i)
    for (int a = 0; a < 3; ++a) B(static_cast<Eigen::Index>(i), a) = U_B[i][a] - U[i][a];
  return B;
}

inline bool uniform_areas(const std::vector<double>& areas) {
  return std::all_of(areas.begin(), areas.end(), [&](double a) { return a == areas.front(); });
}

struct ForceSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double dt = 0.0;
  double rho = 0.0;
  bool symmetric = false;
};

inline std::vector<Vec3> to_vectors(const Eigen::MatrixXd& X) {
  std::vector<Vec3> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = X.row(i).transpose();
  return out;
}

/// Direct solve of A F = B with the residual check of DenseFactorization.
inline std::vector<Vec3> solve_forces(const ForceSystem& s, std::size_t cap = kDefaultDenseCap) {
  if (s.A.rows() == 0) throw ConfigError("force system needs at least one Lagrangian point");
  try {
    return to_vectors(DenseFactorization(s.A, s.symmetric, cap).solve(s.B));
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) +
                         "; the Lagrangian points are too dense for this grid, increase their spacing relative to h");
  }
}

/// u = u_star + (dt/rho) f.
inline VectorField correct_velocity(const VectorField& u_star, const VectorField& f, double dt, double rho) {
  VectorField u = u_star;
  for (int a = 0; a < 3; ++a)
    for (std::size_t j = 0; j < u.size(); ++j) u[a][j] += dt / rho * f[a][j];
  return u;
}

/// Per-run IB corrector: factors the force matrix once (rigid boundary) and
/// applies assemble_B -> solve -> spread -> correct every step.
class IbCorrector {
 public:
  struct Result {
    std::vector<Vec3> forces;
    double enforcement_residual = 0.0;  // max |interpolate(u) - U_B| after the correction
    double rcond = 0.0;
  };

  IbCorrector() = default;

  IbCorrector(CouplingMatrix D, std::vector<double> areas, std::vector<Vec3> U_B, double dt, double rho,
              std::vector<char> correctable, std::size_t cap = kDefaultDenseCap)
      : D_(std::move(D)), areas_(std::move(areas)), U_B_(std::move(U_B)), dt_(dt), rho_(rho),
        correctable_(std::move(correctable)) {
    if (correctable_.empty()) correctable_.assign(D_.cols, 1);
    try {
      fact_ = DenseFactorization(assemble_A(D_, areas_, dt_, rho_, &correctable_), uniform_areas(areas_), cap);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("IB force matrix: ") + e.what() +
                           "; the Lagrangian points are too dense for this grid, increase their spacing relative to h");
    }
  }

  bool enabled() const { return D_.rows > 0; }
  const CouplingMatrix& coupling() const { return D_; }
  const std::vector<Vec3>& boundary_velocity() const { return U_B_; }
  double rcond() const { return fact_.rcond(); }
  const std::vector<char>& correctable() const { return correctable_; }

  /// Corrects u in place. Also returns the spread force density when `f_out` is given.
  Result correct(VectorField& u, VectorField* f_out = nullptr) const {
    Result res;
    const Eigen::MatrixXd B = assemble_B(D_, u, U_B_);
    Eigen::MatrixXd F = fact_.apply(B);
    // Residual via sparse products: A F = (dt/rho) h^3 Dc (Dc^T (dS F)).
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::MatrixXd R = B - apply_A(F);
      bool ok = true;
      for (int c = 0; c < 3; ++c) {
        const double bn = B.col(c).cwiseAbs().maxCoeff();
        if (R.col(c).cwiseAbs().maxCoeff() > 1e-10 * bn) ok = false;
      }
      if (ok) break;
      if (pass == 1)
        throw NumericalError("IB force solve residual above 1e-10 relative (reciprocal condition estimate " +
                             std::to_string(fact_.rcond()) + "); increase the Lagrangian spacing relative to h");
      F += fact_.apply(R);
    }
    res.forces = to_vectors(F);
    res.rcond = fact_.rcond();
    VectorField f = spread(D_, res.forces, areas_);
    const double s = dt_ / rho_;
    for (int a = 0; a < 3; ++a)
      for (std::size_t j = 0; j < u.size(); ++j)
        if (correctable_[j]) u[a][j] += s * f[a][j];
    const auto U = interpolate(D_, u);
    for (std::size_t i = 0; i < U.size(); ++i)
      res.enforcement_residual = std::max(res.enforcement_residual, (U[i] - U_B_[i]).cwiseAbs().maxCoeff());
    if (f_out) {
      for (int a = 0; a < 3; ++a)
        for (std::size_t j = 0; j < f.size(); ++j)
          if (!correctable_[j]) f[a][j] = 0.0;
      *f_out = std::move(f);
    }
    return res;
  }

  /// Max |interpolate(u) - U_B| for an arbitrary field.
  double enforcement_error(const VectorField& u) const {
    double e = 0.0;
    const auto U = interpolate(D_, u);
    for (std::size_t i = 0; i < U.size(); ++i) e = std::max(e, (U[i] - U_B_[i]).cwiseAbs().maxCoeff());
    return e;
  }

 private:
  Eigen::MatrixXd apply_A(const Eigen::MatrixXd& F) const {
    std::vector<Vec3> w(D_.rows);
    for (std::size_t i = 0; i < D_.rows; ++i) w[i] = F.row(static_cast<Eigen::Index>(i)).transpose();
    VectorField f = spread(D_, w, areas_);
    for (int a = 0; a < 3; ++a)
      for (std::size_t j = 0; j < f.size(); ++j)
        if (!correctable_[j]) f[a][j] = 0.0;
    const auto U = interpolate(D_, f);
    Eigen::MatrixXd out(F.rows(), 3);
    const double s = dt_ / rho_;
    for (std::size_t i = 0; i < D_.rows; ++i) out.row(static_cast<Eigen::Index>(i)) = s * U[i].transpose();
    return out;
  }

  CouplingMatrix D_;
  std::vector<double> areas_;
  std::vector<Vec3> U_B_;
  double dt_ = 0.0, rho_ = 1.0;
  std::vector<char> correctable_;
  DenseFactorization fact_;
};

}  // namespace ibflow
