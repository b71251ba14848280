#pragma once

// Analytic closed surfaces used by presets and tests.

#include "ibflow/surface.hpp"

#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace ibflow {

/// Facet group tags used by the tube generators.
inline constexpr int kWallGroup = 0;
inline constexpr int kCapGroup = 1;

inline TriangleSurface make_box_surface(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) v.emplace_back(i ? hi.x() : lo.x(), j ? hi.y() : lo.y(), k ? hi.z() : lo.z());
  // Corner index = i + 2j + 4k.
  const std::vector<Facet> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return TriangleSurface::from_indexed(std::move(v), f);
}

inline TriangleSurface make_unit_cube() { return make_box_surface(Vec3::Zero(), Vec3::Ones()); }

namespace detail {
inline std::pair<std::vector<Vec3>, std::vector<Facet>> icosahedron_mesh() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Facet> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return {v, f};
}
}  // namespace detail

/// Regular icosahedron with the given edge length, centred at the origin.
inline TriangleSurface make_icosahedron(double edge) {
  auto [v, f] = detail::icosahedron_mesh();
  for (auto& p : v) p *= edge / 2.0;  // base mesh has edge 2
  return TriangleSurface::from_indexed(std::move(v), std::move(f));
}

/// Icosphere: icosahedron refined `subdivisions` times, vertices pushed to the sphere.
inline TriangleSurface make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
  auto [v, f] = detail::icosahedron_mesh();
  for (auto& p : v) p.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      mid[key] = idx;
      return idx;
    };
    std::vector<Facet> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = center + radius * p;
  return TriangleSurface::from_indexed(std::move(v), std::move(f));
}

/// Tube of radius R swept along a polyline centreline, closed by flat caps at
/// both ends. Wall facets carry kWallGroup, caps kCapGroup. `up` must never be
/// parallel to the centreline tangent.
inline TriangleSurface make_swept_tube(const std::vector<Vec3>& path, double radius, int n_theta,
                                       const Vec3& up = Vec3::UnitZ()) {
  if (path.size() < 2) throw ConfigError("tube path needs at least two points");
  if (!(radius > 0.0)) throw ConfigError("tube radius must be positive");
  if (n_theta < 3) throw ConfigError("tube needs at least three segments around");
  const std::size_t rings = path.size();
  const auto nt = static_cast<std::size_t>(n_theta);
  std::vector<Vec3> v;
  std::vector<Facet> f;
  std::vector<int> groups;
  for (std::size_t r = 0; r < rings; ++r) {
    Vec3 t = r == 0 ? Vec3(path[1] - path[0])
                    : (r + 1 == rings ? Vec3(path[r] - path[r - 1]) : Vec3(path[r + 1] - path[r - 1]));
    t.normalize();
    const Vec3 e1 = (up - up.dot(t) * t).normalized();
    const Vec3 e2 = t.cross(e1);
    for (std::size_t s = 0; s < nt; ++s) {
      const double th = 2.0 * M_PI * static_cast<double>(s) / static_cast<double>(nt);
      v.push_back(path[r] + radius * (std::cos(th) * e1 + std::sin(th) * e2));
    }
  }
  auto id = [&](std::size_t r, std::size_t s) { return static_cast<int>(r * nt + s % nt); };
  for (std::size_t r = 0; r + 1 < rings; ++r)
    for (std::size_t s = 0; s < nt; ++s) {
      f.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
      f.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
      groups.insert(groups.end(), 2, kWallGroup);
    }
  const int c0 = static_cast<int>(v.size());
  v.push_back(path.front());
  const int c1 = static_cast<int>(v.size());
  v.push_back(path.back());
  for (std::size_t s = 0; s < nt; ++s) {
    f.push_back({c0, id(0, s), id(0, s + 1)});
    f.push_back({c1, id(rings - 1, s + 1), id(rings - 1, s)});
    groups.insert(groups.end(), 2, kCapGroup);
  }
  return TriangleSurface::from_indexed(std::move(v), std::move(f), std::move(groups));
}

/// Straight capped cylinder from p0 to p1. Axial spacing follows the
/// circumferential facet width.
inline TriangleSurface make_capped_cylinder(const Vec3& p0, const Vec3& p1, double radius, int n_theta = 96) {
  const double len = (p1 - p0).norm();
  if (!(len > 0.0)) throw ConfigError("cylinder length must be positive");
  const double seg = 2.0 * M_PI * radius / n_theta;
  const auto n_axial = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / seg)));
  std::vector<Vec3> path;
  for (std::size_t i = 0; i <= n_axial; ++i)
    path.push_back(p0 + (p1 - p0) * (static_cast<double>(i) / static_cast<double>(n_axial)));
  const Vec3 axis = (p1 - p0) / len;
  const Vec3 up = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  return make_swept_tube(path, radius, n_theta, up);
}

struct UBendGeometry {
  double bend_radius = 0.024;     // centreline radius of curvature
  double inner_diameter = 0.004;
  double inlet_extension = 0.001;
  double outlet_extension = 0.001;
  double bend_angle_deg = 90.0;

  /// Inlet centre on the y = 0 plane; the tube runs along +y.
  Vec3 inlet_center() const { return {bend_radius, 0.0, 0.0}; }
  Vec3 bend_center() const { return {0.0, inlet_extension, 0.0}; }
  Vec3 bend_end() const {
    const double a = bend_angle_deg * M_PI / 180.0;
    return bend_center() + bend_radius * Vec3(std::cos(a), std::sin(a), 0.0);
  }
  Vec3 outlet_direction() const {
    const double a = bend_angle_deg * M_PI / 180.0;
    return {-std::sin(a), std::cos(a), 0.0};
  }
  Vec3 outlet_center() const { return bend_end() + outlet_extension * outlet_direction(); }
};

/// Curved tube in the z = 0 plane: a straight inlet along +y, a circular bend
/// about bend_center(), and a straight outlet. For the default 90 degree bend
/// the outlet runs along -x and ends at x = -outlet_extension.
inline TriangleSurface make_u_bend(const UBendGeometry& g, int n_theta = 64) {
  const double r = g.inner_diameter / 2.0;
  const double seg = 2.0 * M_PI * r / n_theta;
  std::vector<Vec3> path;
  auto straight = [&](const Vec3& a, const Vec3& b, bool include_first) {
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a).norm() / seg)));
    for (std::size_t i = include_first ? 0 : 1; i <= n; ++i)
      path.push_back(a + (b - a) * (static_cast<double>(i) / static_cast<double>(n)));
  };
  const Vec3 bend_start = g.bend_center() + Vec3(g.bend_radius, 0, 0);
  if (g.inlet_extension > 0) straight(g.inlet_center(), bend_start, true);
  else path.push_back(bend_start);
  const double a_end = g.bend_angle_deg * M_PI / 180.0;
  const auto n_arc = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(g.bend_radius * a_end / seg)));
  for (std::size_t i = 1; i <= n_arc; ++i) {
    const double a = a_end * static_cast<double>(i) / static_cast<double>(n_arc);
    path.push_back(g.bend_center() + g.bend_radius * Vec3(std::cos(a), std::sin(a), 0.0));
  }
  if (g.outlet_extension > 0) straight(g.bend_end(), g.outlet_center(), false);
  return make_swept_tube(path, r, n_theta, Vec3::UnitZ());
}

}  // namespace ibflow
