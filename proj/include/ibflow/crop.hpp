#pragma once

// Active-region cropping: keep lattice nodes inside the immersed solid or
// within a distance band of its surface.

#include "ibflow/grid.hpp"
#include "ibflow/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ibflow {

/// Inside flag per lattice node (ignores the active mask). Parity ray casting
/// along x-lines; the lines are nudged off the lattice by a tiny offset so they
/// do not graze mesh edges. Nodes on the surface count as inside.
inline std::vector<char> classify_lattice_inside(const EulerianGrid& g, const TriangleSurface& s) {
  const auto& d = g.dims();
  const double h = g.spacing();
  const Vec3 o = g.box().min_corner;
  const double jy = 1.2345678e-7 * h, jz = 2.3456789e-7 * h;
  const auto ny = static_cast<std::size_t>(d[1]), nz = static_cast<std::size_t>(d[2]);
  std::vector<std::vector<double>> crossings(ny * nz);

  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    const auto t = s.triangle(f);
    const double ymin = std::min({t[0].y(), t[1].y(), t[2].y()}), ymax = std::max({t[0].y(), t[1].y(), t[2].y()});
    const double zmin = std::min({t[0].z(), t[1].z(), t[2].z()}), zmax = std::max({t[0].z(), t[1].z(), t[2].z()});
    const int j0 = std::max(0, static_cast<int>(std::floor((ymin - o.y() - jy) / h)));
    const int j1 = std::min(d[1] - 1, static_cast<int>(std::ceil((ymax - o.y() - jy) / h)));
    const int k0 = std::max(0, static_cast<int>(std::floor((zmin - o.z() - jz) / h)));
    const int k1 = std::min(d[2] - 1, static_cast<int>(std::ceil((zmax - o.z() - jz) / h)));
    // Barycentric coordinates in the yz projection.
    const double y0 = t[0].y(), z0 = t[0].z();
    const double a11 = t[1].y() - y0, a12 = t[2].y() - y0, a21 = t[1].z() - z0, a22 = t[2].z() - z0;
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0) continue;  // facet parallel to x: never crossed by an x-line
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j) {
        const double py = o.y() + h * j + jy - y0, pz = o.z() + h * k + jz - z0;
        const double b1 = (a22 * py - a12 * pz) / det;
        const double b2 = (-a21 * py + a11 * pz) / det;
        if (b1 < 0.0 || b2 < 0.0 || b1 + b2 > 1.0) continue;
        const double x = (1 - b1 - b2) * t[0].x() + b1 * t[1].x() + b2 * t[2].x();
        crossings[static_cast<std::size_t>(j) + ny * static_cast<std::size_t>(k)].push_back(x);
      }
  }

  std::vector<char> inside(g.lattice_size(), 0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j) {
      auto& xs = crossings[static_cast<std::size_t>(j) + ny * static_cast<std::size_t>(k)];
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      std::size_t c = 0;
      for (int i = 0; i < d[0]; ++i) {
        const double x = o.x() + h * i;
        while (c < xs.size() && xs[c] < x) ++c;
        if (c % 2 == 1) inside[g.lattice_index(i, j, k)] = 1;
      }
    }
  return inside;
}

/// Unsigned distance to the surface per lattice node, exact up to `reach`;
/// nodes farther away hold +infinity.
inline std::vector<double> lattice_surface_distance(const EulerianGrid& g, const TriangleSurface& s, double reach) {
  const auto& d = g.dims();
  const double h = g.spacing();
  const Vec3 o = g.box().min_corner;
  std::vector<double> dist(g.lattice_size(), std::numeric_limits<double>::infinity());
  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    const auto t = s.triangle(f);
    const Vec3 lo = t[0].cwiseMin(t[1]).cwiseMin(t[2]).array() - reach;
    const Vec3 hi = t[0].cwiseMax(t[1]).cwiseMax(t[2]).array() + reach;
    std::array<int, 3> a{}, b{};
    bool empty = false;
    for (int ax = 0; ax < 3; ++ax) {
      a[ax] = std::max(0, static_cast<int>(std::ceil((lo[ax] - o[ax]) / h - 1e-9)));
      b[ax] = std::min(d[ax] - 1, static_cast<int>(std::floor((hi[ax] - o[ax]) / h + 1e-9)));
      empty = empty || a[ax] > b[ax];
    }
    if (empty) continue;
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) {
          const Vec3 x = g.lattice_position(i, j, k);
          const double dd = (closest_point_on_triangle(x, t[0], t[1], t[2]) - x).norm();
          auto& slot = dist[g.lattice_index(i, j, k)];
          if (dd < slot) slot = dd;
        }
  }
  return dist;
}

struct CropResult {
  EulerianGrid grid;
  std::vector<char> inside;  // per lattice node
  double inside_fraction_before = 0.0;
  double inside_fraction_after = 0.0;
};

/// Keeps a node active iff it was active and lies inside the solid or within
/// `band` of its surface.
inline CropResult crop_active_region(const EulerianGrid& grid, const TriangleSurface& solid, double band) {
  const double h = grid.spacing();
  if (band < 2.0 * h * (1.0 - 1e-12))
    throw ConfigError("crop band must be at least 2h so the delta kernel support stays active");
  CropResult out;
  out.inside = classify_lattice_inside(grid, solid);
  const auto dist = lattice_surface_distance(grid, solid, band);
  const double tol = on_surface_tolerance(solid);
  for (std::size_t n = 0; n < dist.size(); ++n)
    if (dist[n] <= tol) out.inside[n] = 1;

  std::vector<char> mask(grid.lattice_size(), 0);
  std::size_t before_in = 0, before = 0, after_in = 0, after = 0;
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (!grid.mask()[n]) continue;
    ++before;
    before_in += out.inside[n] ? 1 : 0;
    if (out.inside[n] || dist[n] <= band) {
      mask[n] = 1;
      ++after;
      after_in += out.inside[n] ? 1 : 0;
    }
  }
  out.grid = grid.with_mask(std::move(mask));
  out.inside_fraction_before = before ? static_cast<double>(before_in) / static_cast<double>(before) : 0.0;
  out.inside_fraction_after = after ? static_cast<double>(after_in) / static_cast<double>(after) : 0.0;
  return out;
}

}  // namespace ibflow
