#pragma once

// Four-point discrete delta kernel and the sparse Lagrangian/Eulerian
// coupling built from it.

#include "ibflow/error.hpp"
#include "ibflow/grid.hpp"
#include "ibflow/surface.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace ibflow {

/// delta(r) for the 4-point kernel, support |r| < 2.
inline double delta_1d(double r) {
  const double a = std::abs(r);
  if (a <= 1.0) return (3.0 - 2.0 * a + std::sqrt(1.0 + 4.0 * a - 4.0 * a * a)) / 8.0;
  if (a <= 2.0) return (5.0 - 2.0 * a - std::sqrt(std::max(0.0, -7.0 + 12.0 * a - 4.0 * a * a))) / 8.0;
  return 0.0;
}

/// Tensor-product kernel, units m^-3.
inline double kernel_3d(const Vec3& x, const Vec3& X, double h) {
  return delta_1d((x.x() - X.x()) / h) / h * delta_1d((x.y() - X.y()) / h) / h * delta_1d((x.z() - X.z()) / h) / h;
}

/// Row-compressed M x N weights. Row i lists the active nodes in the support
/// of Lagrangian point i.
struct CouplingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double h = 0.0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t row_size(std::size_t i) const { return row_ptr[i + 1] - row_ptr[i]; }
};

inline CouplingMatrix build_coupling(const EulerianGrid& g, const std::vector<Vec3>& points) {
  const double h = g.spacing();
  const Vec3 o = g.box().min_corner;
  CouplingMatrix D;
  D.rows = points.size();
  D.cols = g.active_count();
  D.h = h;
  D.row_ptr.reserve(points.size() + 1);
  D.col.reserve(points.size() * 64);
  D.val.reserve(points.size() * 64);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec3 s = (points[p] - o) / h;
    std::array<int, 3> base{};
    std::array<std::array<double, 4>, 3> w{};
    for (int a = 0; a < 3; ++a) {
      base[a] = static_cast<int>(std::floor(s[a])) - 1;
      for (int q = 0; q < 4; ++q) w[a][q] = delta_1d(s[a] - (base[a] + q)) / h;
    }
    for (int qk = 0; qk < 4; ++qk)
      for (int qj = 0; qj < 4; ++qj)
        for (int qi = 0; qi < 4; ++qi) {
          const double wt = w[0][qi] * w[1][qj] * w[2][qk];
          if (wt == 0.0) continue;
          const auto a = g.active_at(base[0] + qi, base[1] + qj, base[2] + qk);
          if (a == kNoNode)
            throw ConfigError("Lagrangian point " + std::to_string(p) +
                              " has kernel support outside the active region (crop band too small or point outside "
                              "the box)");
          D.col.push_back(static_cast<std::size_t>(a));
          D.val.push_back(wt);
        }
    D.row_ptr.push_back(D.col.size());
  }
  return D;
}

inline CouplingMatrix build_coupling(const EulerianGrid& g, const LagrangianCloud& c) {
  return build_coupling(g, c.points);
}

/// U_i = sum_j u_j D_ij h^3.
inline std::vector<Vec3> interpolate(const CouplingMatrix& D, const VectorField& u) {
  if (u.size() != D.cols) throw ConfigError("interpolate: field length does not match coupling columns");
  const double h3 = D.h * D.h * D.h;
  std::vector<Vec3> out(D.rows, Vec3::Zero());
  for (std::size_t i = 0; i < D.rows; ++i) {
    Vec3 s = Vec3::Zero();
    for (std::size_t e = D.row_ptr[i]; e < D.row_ptr[i + 1]; ++e) {
      const std::size_t j = D.col[e];
      s += D.val[e] * Vec3(u[0][j], u[1][j], u[2][j]);
    }
    out[i] = s * h3;
  }
  return out;
}

/// f_j = sum_i F_i D_ij dS_i.
inline VectorField spread(const CouplingMatrix& D, const std::vector<Vec3>& F, const std::vector<double>& areas) {
  if (F.size() != D.rows || areas.size() != D.rows) throw ConfigError("spread: force count does not match coupling rows");
  VectorField f(D.cols);
  for (std::size_t i = 0; i < D.rows; ++i) {
    const Vec3 w = F[i] * areas[i];
    for (std::size_t e = D.row_ptr[i]; e < D.row_ptr[i + 1]; ++e) {
      const std::size_t j = D.col[e];
      for (int a = 0; a < 3; ++a) f[a][j] += D.val[e] * w[a];
    }
  }
  return f;
}

}  // namespace ibflow
