#pragma once

// Analytic references, error norms, DC-PSE derivatives on surface clouds,
// wall shear stress, and legacy-VTK / CSV output.

#include "ibflow/error.hpp"
#include "ibflow/grid.hpp"
#include "ibflow/surface.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ibflow {

// ---------------------------------------------------------------------------
// Exact solution and norms

/// Axial velocity of fully developed pipe flow, U_max (1 - (r/R)^2) with
/// U_max = -R^2/(4 mu) dp/dz.
inline double poiseuille_exact(double r, double R, double mu, double dpdz) {
  if (r < 0.0 || r > R * (1.0 + 1e-12)) throw ConfigError("poiseuille_exact: radius outside [0, R]");
  const double umax = -R * R / (4.0 * mu) * dpdz;
  return umax * (1.0 - (r / R) * (r / R));
}

struct ErrorReport {
  double l_inf = 0.0;
  double l_2 = 0.0;  // (1/N) sqrt(sum diff^2)
  std::size_t samples = 0;
  std::array<double, 3> l_inf_component{};
  std::array<double, 3> l_2_component{};
};

inline ErrorReport error_norms(const std::vector<double>& numerical, const std::vector<double>& exact) {
  if (numerical.size() != exact.size()) throw ConfigError("error_norms: sample counts differ");
  if (numerical.empty()) throw ConfigError("error_norms: empty sample set");
  ErrorReport r;
  double ss = 0.0;
  for (std::size_t i = 0; i < numerical.size(); ++i) {
    const double d = numerical[i] - exact[i];
    r.l_inf = std::max(r.l_inf, std::abs(d));
    ss += d * d;
  }
  r.samples = numerical.size();
  r.l_2 = std::sqrt(ss) / static_cast<double>(numerical.size());
  return r;
}

/// Norms of the per-sample Euclidean difference |u_i - v_i| over the N
/// samples; the per-component breakdown uses each component alone.
inline ErrorReport error_norms(const std::vector<Vec3>& numerical, const std::vector<Vec3>& exact) {
  if (numerical.size() != exact.size()) throw ConfigError("error_norms: sample counts differ");
  if (numerical.empty()) throw ConfigError("error_norms: empty sample set");
  ErrorReport r;
  double ss = 0.0;
  std::array<double, 3> ss_c{};
  for (std::size_t i = 0; i < numerical.size(); ++i) {
    const Vec3 d = numerical[i] - exact[i];
    r.l_inf = std::max(r.l_inf, d.norm());
    ss += d.squaredNorm();
    for (std::size_t c = 0; c < 3; ++c) {
      const double dc = d[static_cast<int>(c)];
      r.l_inf_component[c] = std::max(r.l_inf_component[c], std::abs(dc));
      ss_c[c] += dc * dc;
    }
  }
  const auto n = static_cast<double>(numerical.size());
  r.samples = numerical.size();
  r.l_2 = std::sqrt(ss) / n;
  for (std::size_t c = 0; c < 3; ++c) r.l_2_component[c] = std::sqrt(ss_c[c]) / n;
  return r;
}

/// log(e_coarse / e_fine) / log(h_coarse / h_fine).
inline double observed_order(double e_coarse, double e_fine, double h_coarse, double h_fine) {
  return std::log(e_coarse / e_fine) / std::log(h_coarse / h_fine);
}

// ---------------------------------------------------------------------------
// DC-PSE

struct DerivativeOperators {
  std::vector<std::vector<std::size_t>> neighbors;  // per evaluation point, excluding itself
  std::vector<std::array<std::vector<double>, 3>> weights;
  std::vector<double> cutoff;
  double h_local = 0.0;
  int order = 2;

  std::size_t size() const { return neighbors.size(); }

  /// d f / d x_axis at evaluation point i: sum_j w_j (f_j - f_i).
  double apply(std::size_t i, int axis, const std::vector<double>& f) const {
    double s = 0.0;
    const auto& w = weights[i][static_cast<std::size_t>(axis)];
    for (std::size_t k = 0; k < neighbors[i].size(); ++k) s += w[k] * (f[neighbors[i][k]] - f[i]);
    return s;
  }
};

inline constexpr std::size_t kDcpseMinNeighbors = 20;

/// Stencil pool and centre treatment for build_dcpse.
struct DcpseStencil {
  /// Neighbours are drawn from points [pool_begin, end).
  std::size_t pool_begin = 0;
  /// Adds the constant monomial so the weights sum to zero and the sample at
  /// the evaluation point drops out of the derivative.
  bool free_center = false;
};

/// Operators at points [0, eval_count) using `points` as the stencil pool.
/// Weighted least squares on the monomials of degree 1..2 (0..2 with a free
/// centre) in offsets scaled by h_local, Gaussian window exp(-|z|^2), cutoff
/// 3.5 h_local grown by 25% until at least 20 neighbours are found.
inline DerivativeOperators build_dcpse(const std::vector<Vec3>& points, std::size_t eval_count, double h_local,
                                       int order = 2, const DcpseStencil& stencil = {}) {
  if (order != 2) throw ConfigError("DC-PSE: only reproduction order 2 is implemented");
  if (!(h_local > 0.0)) throw ConfigError("DC-PSE: h_local must be positive");
  if (eval_count > points.size()) throw ConfigError("DC-PSE: more evaluation points than points");
  if (stencil.pool_begin >= points.size() && eval_count > 0) throw ConfigError("DC-PSE: empty stencil pool");
  DerivativeOperators ops;
  ops.h_local = h_local;
  ops.order = order;
  ops.neighbors.resize(eval_count);
  ops.weights.resize(eval_count);
  ops.cutoff.resize(eval_count);
  if (eval_count == 0) return ops;
  Vec3 origin = points[0];
  for (const auto& p : points) origin = origin.cwiseMin(p);
  const double base_cut = 3.5 * h_local;
  detail::PointHash hash(base_cut, origin);
  for (std::size_t i = stencil.pool_begin; i < points.size(); ++i) hash.insert(points[i], i);

  const int shift = stencil.free_center ? 1 : 0;
  const int n_basis = 9 + shift;
  auto basis = [shift](const Vec3& z, double* out) {
    if (shift) out[0] = 1.0;
    double* o = out + shift;
    o[0] = z.x(); o[1] = z.y(); o[2] = z.z();
    o[3] = z.x() * z.x(); o[4] = z.x() * z.y(); o[5] = z.x() * z.z();
    o[6] = z.y() * z.y(); o[7] = z.y() * z.z(); o[8] = z.z() * z.z();
  };

  for (std::size_t i = 0; i < eval_count; ++i) {
    double cut = base_cut;
    std::vector<std::size_t> nb;
    for (int grow = 0; grow < 40; ++grow, cut *= 1.25) {
      nb.clear();
      const int reach = static_cast<int>(std::ceil(cut / base_cut));
      hash.visit(points[i], reach, [&](std::size_t j) {
        if (j != i && (points[j] - points[i]).norm() <= cut) nb.push_back(j);
      });
      if (nb.size() >= kDcpseMinNeighbors) break;
    }
    if (nb.size() < kDcpseMinNeighbors)
      throw ConfigError("DC-PSE: point " + std::to_string(i) + " has too few neighbours");
    std::sort(nb.begin(), nb.end());
    const auto m = static_cast<Eigen::Index>(nb.size());
    Eigen::MatrixXd P(m, n_basis);
    Eigen::VectorXd sw(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Vec3 z = (points[nb[static_cast<std::size_t>(k)]] - points[i]) / h_local;
      double row[10];
      basis(z, row);
      sw(k) = std::exp(-0.5 * z.squaredNorm());  // sqrt of the window exp(-|z|^2)
      for (int c = 0; c < n_basis; ++c) P(k, c) = sw(k) * row[c];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (!(s(n_basis - 1) > 1e-10 * s(0)))
      throw ConfigError("DC-PSE: degenerate neighbourhood at point " + std::to_string(i) +
                        " (neighbours do not span the quadratic basis)");
    // Coefficients c = pinv(P) (sw .* df); the gradient picks the linear rows.
    const Eigen::MatrixXd pinv = svd.solve(Eigen::MatrixXd::Identity(m, m));
    for (int a = 0; a < 3; ++a) {
      auto& w = ops.weights[i][static_cast<std::size_t>(a)];
      w.resize(nb.size());
      for (Eigen::Index k = 0; k < m; ++k) w[static_cast<std::size_t>(k)] = pinv(a + shift, k) * sw(k) / h_local;
    }
    ops.neighbors[i] = std::move(nb);
    ops.cutoff[i] = cut;
  }
  return ops;
}

/// Largest error of the operators on the monomials of degree 0..2 in
/// (x - center) / scale, relative to the derivative scale 1/scale.
inline double dcpse_monomial_error(const DerivativeOperators& ops, const std::vector<Vec3>& points, const Vec3& center,
                                   double scale) {
  double worst = 0.0;
  auto mono = [](double v, int p) { return p == 0 ? 1.0 : (p == 1 ? v : v * v); };
  for (int px = 0; px <= 2; ++px)
    for (int py = 0; py <= 2 - px; ++py)
      for (int pz = 0; pz <= 2 - px - py; ++pz) {
        std::vector<double> f(points.size());
        for (std::size_t j = 0; j < f.size(); ++j) {
          const Vec3 x = (points[j] - center) / scale;
          f[j] = mono(x.x(), px) * mono(x.y(), py) * mono(x.z(), pz);
        }
        for (std::size_t i = 0; i < ops.size(); ++i) {
          const Vec3 x = (points[i] - center) / scale;
          const std::array<double, 3> exact = {px * mono(x.x(), px - 1) * mono(x.y(), py) * mono(x.z(), pz),
                                               py * mono(x.x(), px) * mono(x.y(), py - 1) * mono(x.z(), pz),
                                               pz * mono(x.x(), px) * mono(x.y(), py) * mono(x.z(), pz - 1)};
          for (int a = 0; a < 3; ++a)
            worst = std::max(worst, std::abs(ops.apply(i, a, f) * scale - exact[static_cast<std::size_t>(a)]));
        }
      }
  return worst;
}

// ---------------------------------------------------------------------------
// Wall shear stress

struct WSSField {
  std::vector<Eigen::Matrix3d> strain;  // symmetric strain rate, 1/s
  std::vector<Vec3> traction;           // 2 mu eps n
  std::vector<Vec3> shear;              // tangential traction t_s
  std::vector<double> magnitude;        // |t_s|
};

/// Strain from DC-PSE gradients of u sampled on the operator point set; the
/// traction is 2 mu eps . n and the WSS is its tangential part.
inline WSSField wall_shear_stress(const DerivativeOperators& ops, const std::vector<Vec3>& u_samples,
                                  const std::vector<Vec3>& normals, double mu) {
  if (normals.size() < ops.size()) throw ConfigError("wall_shear_stress: missing normals");
  std::array<std::vector<double>, 3> comp;
  for (int c = 0; c < 3; ++c) {
    comp[static_cast<std::size_t>(c)].resize(u_samples.size());
    for (std::size_t i = 0; i < u_samples.size(); ++i) comp[static_cast<std::size_t>(c)][i] = u_samples[i][c];
  }
  WSSField w;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    Eigen::Matrix3d grad;  // grad(r, c) = d u_r / d x_c
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) grad(r, c) = ops.apply(i, c, comp[static_cast<std::size_t>(r)]);
    const Eigen::Matrix3d eps = 0.5 * (grad + grad.transpose());
    const Vec3 n = normals[i].normalized();
    const Vec3 t = 2.0 * mu * eps * n;
    const Vec3 ts = t - t.dot(n) * n;
    w.strain.push_back(eps);
    w.traction.push_back(t);
    w.shear.push_back(ts);
    w.magnitude.push_back(ts.norm());
  }
  return w;
}

/// Surface points followed by copies offset inward along the normals by each
/// entry of `offsets`; the first points.size() entries are the surface.
inline std::vector<Vec3> collar_points(const std::vector<Vec3>& points, const std::vector<Vec3>& outward_normals,
                                       const std::vector<double>& offsets) {
  std::vector<Vec3> out = points;
  for (double d : offsets)
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back(points[i] - d * outward_normals[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// Trilinear interpolation of a scalar field; NaN if any corner is inactive or
/// the point lies outside the box.
inline double sample_trilinear(const EulerianGrid& g, const ScalarField& q, const Vec3& x) {
  const Vec3 s = (x - g.box().min_corner) / g.spacing();
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::min(static_cast<int>(std::floor(s[a])), g.dims()[a] - 2);
    if (s[a] < -1e-9 || i0[a] < 0) return std::numeric_limits<double>::quiet_NaN();
    f[a] = s[a] - i0[a];
    if (f[a] > 1.0 + 1e-9) return std::numeric_limits<double>::quiet_NaN();
  }
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const auto a = g.active_at(i0[0] + di, i0[1] + dj, i0[2] + dk);
    if (a == kNoNode) return std::numeric_limits<double>::quiet_NaN();
    const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
    v += w * q[static_cast<std::size_t>(a)];
  }
  return v;
}

// ---------------------------------------------------------------------------
// Legacy VTK and CSV

struct LatticeFields {
  std::map<std::string, ScalarField> scalars;  // per active node
  std::map<std::string, VectorField> vectors;
};

/// ASCII STRUCTURED_POINTS over the full lattice; inactive nodes hold 0 and
/// an `active` scalar marks the mask. Values are written with 17 significant
/// digits so a re-read is bit-exact.
inline void write_vtk_structured_points(const std::filesystem::path& path, const EulerianGrid& g,
                                        const LatticeFields& fields) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  const auto& d = g.dims();
  const Vec3 o = g.box().min_corner;
  out << "# vtk DataFile Version 3.0\nibflow lattice fields\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
  out << "ORIGIN " << o.x() << ' ' << o.y() << ' ' << o.z() << '\n';
  out << "SPACING " << g.spacing() << ' ' << g.spacing() << ' ' << g.spacing() << '\n';
  out << "POINT_DATA " << g.lattice_size() << '\n';
  out << "SCALARS active int 1\nLOOKUP_TABLE default\n";
  for (std::size_t n = 0; n < g.lattice_size(); ++n) out << (g.mask()[n] ? 1 : 0) << '\n';
  auto value = [&](const ScalarField& q, std::size_t n) {
    const auto a = g.global_to_active(n);
    return a == kNoNode ? 0.0 : q[static_cast<std::size_t>(a)];
  };
  for (const auto& [name, q] : fields.scalars) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t n = 0; n < g.lattice_size(); ++n) out << value(q, n) << '\n';
  }
  for (const auto& [name, v] : fields.vectors) {
    out << "VECTORS " << name << " double\n";
    for (std::size_t n = 0; n < g.lattice_size(); ++n)
      out << value(v[0], n) << ' ' << value(v[1], n) << ' ' << value(v[2], n) << '\n';
  }
  if (!out) throw IoError("error while writing " + path.string());
}

struct VtkStructuredPoints {
  std::array<int, 3> dims{};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Zero();
  std::map<std::string, std::vector<double>> scalars;  // per lattice node
  std::map<std::string, std::vector<Vec3>> vectors;
};

inline VtkStructuredPoints read_vtk_structured_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  VtkStructuredPoints r;
  std::string tok;
  std::size_t count = 0;
  while (in >> tok) {
    if (tok == "DIMENSIONS") {
      in >> r.dims[0] >> r.dims[1] >> r.dims[2];
    } else if (tok == "ORIGIN") {
      in >> r.origin.x() >> r.origin.y() >> r.origin.z();
    } else if (tok == "SPACING") {
      in >> r.spacing.x() >> r.spacing.y() >> r.spacing.z();
    } else if (tok == "POINT_DATA") {
      in >> count;
    } else if (tok == "SCALARS") {
      std::string name, type, lookup, table;
      int comps = 1;
      in >> name >> type >> comps >> lookup >> table;
      auto& v = r.scalars[name];
      v.resize(count);
      for (auto& x : v) in >> x;
    } else if (tok == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      auto& v = r.vectors[name];
      v.resize(count);
      for (auto& x : v) in >> x.x() >> x.y() >> x.z();
    }
    if (!in && !in.eof()) throw IoError("malformed VTK file " + path.string());
  }
  return r;
}

/// ASCII POLYDATA of points with vertex cells and per-point data.
inline void write_vtk_polydata(const std::filesystem::path& path, const std::vector<Vec3>& points,
                               const std::map<std::string, std::vector<double>>& scalars,
                               const std::map<std::string, std::vector<Vec3>>& vectors) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "# vtk DataFile Version 3.0\nibflow surface points\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << points.size() << " double\n";
  for (const auto& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out << "VERTICES " << points.size() << ' ' << 2 * points.size() << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) out << "1 " << i << '\n';
  out << "POINT_DATA " << points.size() << '\n';
  for (const auto& [name, q] : scalars) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : q) out << v << '\n';
  }
  for (const auto& [name, v] : vectors) {
    out << "VECTORS " << name << " double\n";
    for (const auto& x : v) out << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  if (!out) throw IoError("error while writing " + path.string());
}

struct ProbeLine {
  std::string name;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  int samples = 50;
  bool operator==(const ProbeLine&) const = default;
};

/// CSV columns: s,x,y,z,ux,uy,uz,p (trilinear samples; empty where undefined).
inline void write_probe_csv(const std::filesystem::path& path, const EulerianGrid& g, const VectorField& u,
                            const ScalarField& p, const ProbeLine& line) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "s,x,y,z,ux,uy,uz,p\n";
  const int n = std::max(2, line.samples);
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    const Vec3 x = line.start + s * (line.end - line.start);
    out << s * (line.end - line.start).norm() << ',' << x.x() << ',' << x.y() << ',' << x.z();
    for (const ScalarField* q : {&u[0], &u[1], &u[2], &p}) {
      const double v = sample_trilinear(g, *q, x);
      out << ',';
      if (std::isfinite(v)) out << v;
    }
    out << '\n';
  }
}

}  // namespace ibflow
