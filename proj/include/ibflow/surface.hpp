#pragma once

// Closed triangle surfaces: STL/OBJ input, watertightness validation,
// facet statistics, inside/outside queries, and resampling into a cloud of
// Lagrangian points with equal assigned area.

#include "ibflow/error.hpp"
#include "ibflow/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace ibflow {

using Facet = std::array<int, 3>;
using Triangle = std::array<Vec3, 3>;

class TriangleSurface {
 public:
  TriangleSurface() = default;

  /// Builds from an indexed mesh and validates it. `groups` tags facets
  /// (e.g. wall = 0, caps = 1); empty means all zero.
  static TriangleSurface from_indexed(std::vector<Vec3> vertices, std::vector<Facet> facets,
                                      std::vector<int> groups = {}) {
    TriangleSurface s;
    s.vertices_ = std::move(vertices);
    s.facets_ = std::move(facets);
    s.groups_ = groups.empty() ? std::vector<int>(s.facets_.size(), 0) : std::move(groups);
    if (s.groups_.size() != s.facets_.size()) throw SurfaceError("facet group count does not match facets");
    s.finalize();
    return s;
  }

  /// Builds from a triangle soup, welding coincident vertices.
  static TriangleSurface from_triangles(const std::vector<Triangle>& tris, std::vector<int> groups = {}) {
    if (tris.empty()) throw SurfaceError("surface has no facets");
    Vec3 lo = tris[0][0], hi = tris[0][0];
    for (const auto& t : tris)
      for (const auto& v : t) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
    const double tol = 1e-9 * std::max((hi - lo).norm(), 1e-300);
    struct KeyHash {
      std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
        std::size_t h = 1469598103934665603ull;
        for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
        return h;
      }
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<int>, KeyHash> buckets;
    std::vector<Vec3> verts;
    std::vector<Facet> facets;
    facets.reserve(tris.size());
    auto key_of = [&](const Vec3& v) {
      return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor((v.x() - lo.x()) / tol)),
                                         static_cast<std::int64_t>(std::floor((v.y() - lo.y()) / tol)),
                                         static_cast<std::int64_t>(std::floor((v.z() - lo.z()) / tol))};
    };
    auto weld = [&](const Vec3& v) {
      const auto k = key_of(v);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            auto it = buckets.find({k[0] + dx, k[1] + dy, k[2] + dz});
            if (it == buckets.end()) continue;
            for (int idx : it->second)
              if ((verts[static_cast<std::size_t>(idx)] - v).norm() <= tol) return idx;
          }
      const int idx = static_cast<int>(verts.size());
      verts.push_back(v);
      buckets[k].push_back(idx);
      return idx;
    };
    for (const auto& t : tris) facets.push_back({weld(t[0]), weld(t[1]), weld(t[2])});
    return from_indexed(std::move(verts), std::move(facets), std::move(groups));
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<double>& areas() const { return areas_; }
  const std::vector<int>& groups() const { return groups_; }
  std::size_t facet_count() const { return facets_.size(); }

  Triangle triangle(std::size_t f) const {
    const auto& t = facets_[f];
    return {vertices_[static_cast<std::size_t>(t[0])], vertices_[static_cast<std::size_t>(t[1])],
            vertices_[static_cast<std::size_t>(t[2])]};
  }

  double total_area() const { return std::accumulate(areas_.begin(), areas_.end(), 0.0); }

  double signed_volume() const {
    double v = 0.0;
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      const auto t = triangle(f);
      v += t[0].dot(t[1].cross(t[2]));
    }
    return v / 6.0;
  }

  Vec3 bbox_min() const { return lo_; }
  Vec3 bbox_max() const { return hi_; }
  double diagonal() const { return (hi_ - lo_).norm(); }

  /// Unit normal at corner `c` of facet `f`, averaged over same-group facets
  /// sharing that vertex whose normals lie within 60 degrees (crease aware).
  Vec3 corner_normal(std::size_t f, int c) const {
    const auto v = static_cast<std::size_t>(facets_[f][static_cast<std::size_t>(c)]);
    Vec3 acc = Vec3::Zero();
    for (int g : vertex_facets_[v]) {
      const auto gf = static_cast<std::size_t>(g);
      if (groups_[gf] != groups_[f] || normals_[gf].dot(normals_[f]) < 0.5) continue;
      acc += areas_[gf] * normals_[gf];
    }
    return acc.norm() > 0 ? Vec3(acc.normalized()) : normals_[f];
  }

 private:
  void finalize() {
    if (facets_.empty()) throw SurfaceError("surface has no facets");
    lo_ = hi_ = vertices_.front();
    for (const auto& v : vertices_) {
      lo_ = lo_.cwiseMin(v);
      hi_ = hi_.cwiseMax(v);
    }
    const double diag = diagonal();
    const double area_floor = 1e-14 * diag * diag;
    areas_.resize(facets_.size());
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      for (int idx : facets_[f])
        if (idx < 0 || static_cast<std::size_t>(idx) >= vertices_.size())
          throw SurfaceError("facet " + std::to_string(f) + " references a missing vertex");
      const auto t = triangle(f);
      areas_[f] = triangle_area(t[0], t[1], t[2]);
      if (!(areas_[f] > area_floor)) throw SurfaceError("facet " + std::to_string(f) + " has zero area");
    }
    check_closed();
    if (signed_volume() < 0.0) {
      for (auto& t : facets_) std::swap(t[1], t[2]);
    }
    normals_.resize(facets_.size());
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      const auto t = triangle(f);
      normals_[f] = (t[1] - t[0]).cross(t[2] - t[0]).normalized();
    }
    vertex_facets_.assign(vertices_.size(), {});
    for (std::size_t f = 0; f < facets_.size(); ++f)
      for (int idx : facets_[f]) vertex_facets_[static_cast<std::size_t>(idx)].push_back(static_cast<int>(f));
  }

  void check_closed() const {
    // Directed edge a->b seen from facet f. A closed, consistently wound
    // surface has each undirected edge exactly once in each direction.
    std::map<std::pair<int, int>, std::vector<std::pair<std::size_t, bool>>> edges;
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      for (int e = 0; e < 3; ++e) {
        const int a = facets_[f][static_cast<std::size_t>(e)];
        const int b = facets_[f][static_cast<std::size_t>((e + 1) % 3)];
        edges[{std::min(a, b), std::max(a, b)}].push_back({f, a < b});
      }
    }
    for (const auto& [key, uses] : edges) {
      if (uses.size() == 1)
        throw SurfaceError("open boundary: edge of facet " + std::to_string(uses[0].first) +
                           " is not shared by another facet");
      if (uses.size() > 2)
        throw SurfaceError("non-manifold edge at facet " + std::to_string(uses[0].first) + " (shared by " +
                           std::to_string(uses.size()) + " facets)");
      if (uses[0].second == uses[1].second)
        throw SurfaceError("inconsistent winding between facets " + std::to_string(uses[0].first) + " and " +
                           std::to_string(uses[1].first));
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Facet> facets_;
  std::vector<int> groups_;
  std::vector<Vec3> normals_;
  std::vector<double> areas_;
  std::vector<std::vector<int>> vertex_facets_;
  Vec3 lo_ = Vec3::Zero();
  Vec3 hi_ = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline std::vector<Triangle> read_stl_binary(const std::string& bytes, const std::string& path) {
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  if (bytes.size() < 84 + 50ull * count) throw SurfaceError(path + ": truncated binary STL");
  std::vector<Triangle> tris(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* rec = bytes.data() + 84 + 50ull * i;
    float v[9];
    std::memcpy(v, rec + 12, sizeof(v));
    for (int c = 0; c < 3; ++c) tris[i][static_cast<std::size_t>(c)] = Vec3(v[3 * c], v[3 * c + 1], v[3 * c + 2]);
  }
  return tris;
}

inline std::vector<Triangle> read_stl_ascii(const std::string& bytes, const std::string& path) {
  std::istringstream in(bytes);
  std::string tok;
  std::vector<Vec3> verts;
  while (in >> tok) {
    if (tok == "vertex") {
      double x, y, z;
      if (!(in >> x >> y >> z)) throw SurfaceError(path + ": malformed vertex line");
      verts.emplace_back(x, y, z);
    }
  }
  if (verts.size() % 3 != 0) throw SurfaceError(path + ": vertex count is not a multiple of three");
  std::vector<Triangle> tris(verts.size() / 3);
  for (std::size_t i = 0; i < tris.size(); ++i) tris[i] = {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
  return tris;
}

inline std::vector<Triangle> read_obj(const std::string& bytes, const std::string& path) {
  std::istringstream in(bytes);
  std::string line;
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw SurfaceError(path + ": malformed vertex line");
      verts.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string ref;
      while (ls >> ref) {
        const int i = std::stoi(ref.substr(0, ref.find('/')));
        const int resolved = i < 0 ? static_cast<int>(verts.size()) + i : i - 1;
        if (resolved < 0 || static_cast<std::size_t>(resolved) >= verts.size())
          throw SurfaceError(path + ": face references a missing vertex");
        idx.push_back(resolved);
      }
      if (idx.size() < 3) throw SurfaceError(path + ": face with fewer than three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        tris.push_back({verts[static_cast<std::size_t>(idx[0])], verts[static_cast<std::size_t>(idx[k])],
                        verts[static_cast<std::size_t>(idx[k + 1])]});
    }
  }
  return tris;
}

}  // namespace detail

/// Reads STL (binary or ASCII) or OBJ, welds, validates and orients outward.
inline TriangleSurface load_surface(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open surface file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  std::vector<Triangle> tris;
  if (ext == ".obj") {
    tris = detail::read_obj(bytes, path.string());
  } else {
    bool binary = false;
    if (bytes.size() >= 84) {
      std::uint32_t count = 0;
      std::memcpy(&count, bytes.data() + 80, 4);
      binary = bytes.size() == 84 + 50ull * count;
    }
    if (!binary && bytes.rfind("solid", 0) != 0) {
      if (bytes.size() < 84) throw SurfaceError(path.string() + ": not an STL file");
      binary = true;
    }
    tris = binary ? detail::read_stl_binary(bytes, path.string()) : detail::read_stl_ascii(bytes, path.string());
  }
  return TriangleSurface::from_triangles(tris);
}

inline void write_stl_binary(const TriangleSurface& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  char header[80] = "ibflow binary stl";
  out.write(header, 80);
  const auto count = static_cast<std::uint32_t>(s.facet_count());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    float rec[12];
    const auto t = s.triangle(f);
    for (int a = 0; a < 3; ++a) rec[a] = static_cast<float>(s.normals()[f][a]);
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) rec[3 + 3 * c + a] = static_cast<float>(t[static_cast<std::size_t>(c)][a]);
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

inline void write_stl_ascii(const TriangleSurface& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "solid ibflow\n";
  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    const auto& n = s.normals()[f];
    out << "  facet normal " << n.x() << ' ' << n.y() << ' ' << n.z() << "\n    outer loop\n";
    for (const auto& v : s.triangle(f)) out << "      vertex " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    out << "    endloop\n  endfacet\n";
  }
  out << "endsolid ibflow\n";
}

// ---------------------------------------------------------------------------
// Statistics

struct SurfaceStats {
  double edge_mean = 0, edge_std = 0;
  double area_mean = 0, area_std = 0;
  double edge_min = 0, edge_max = 0;
  std::size_t edge_count = 0, facet_count = 0;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}
}  // namespace detail

inline std::vector<double> unique_edge_lengths(const TriangleSurface& s) {
  std::map<std::pair<int, int>, double> edges;
  for (const auto& t : s.facets())
    for (int e = 0; e < 3; ++e) {
      const int a = t[static_cast<std::size_t>(e)], b = t[static_cast<std::size_t>((e + 1) % 3)];
      edges[{std::min(a, b), std::max(a, b)}] =
          (s.vertices()[static_cast<std::size_t>(a)] - s.vertices()[static_cast<std::size_t>(b)]).norm();
    }
  std::vector<double> out;
  out.reserve(edges.size());
  for (const auto& [k, len] : edges) out.push_back(len);
  return out;
}

inline SurfaceStats facet_stats(const TriangleSurface& s) {
  SurfaceStats st;
  const auto edges = unique_edge_lengths(s);
  std::tie(st.edge_mean, st.edge_std) = detail::mean_std(edges);
  std::tie(st.area_mean, st.area_std) = detail::mean_std(s.areas());
  st.edge_min = *std::min_element(edges.begin(), edges.end());
  st.edge_max = *std::max_element(edges.begin(), edges.end());
  st.edge_count = edges.size();
  st.facet_count = s.facet_count();
  return st;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 boundaries
  std::vector<std::size_t> counts;
};

inline Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  if (values.empty() || bins == 0) throw ConfigError("histogram needs values and at least one bin");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn;
  const double width = (*mx > *mn) ? (*mx - *mn) / static_cast<double>(bins) : 1.0;
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + width * static_cast<double>(b));
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Spatial queries

/// Uniform bucket grid over facet bounding boxes for nearest-facet queries.
class FacetIndex {
 public:
  FacetIndex(const TriangleSurface& s, double cell, std::vector<std::size_t> facets = {}) : s_(&s), cell_(cell) {
    if (facets.empty()) {
      facets.resize(s.facet_count());
      std::iota(facets.begin(), facets.end(), std::size_t{0});
    }
    facets_ = std::move(facets);
    origin_ = s.bbox_min();
    for (std::size_t f : facets_) {
      const auto t = s.triangle(f);
      Vec3 lo = t[0].cwiseMin(t[1]).cwiseMin(t[2]);
      Vec3 hi = t[0].cwiseMax(t[1]).cwiseMax(t[2]);
      const auto a = key(lo), b = key(hi);
      for (auto i = a[0]; i <= b[0]; ++i)
        for (auto j = a[1]; j <= b[1]; ++j)
          for (auto k = a[2]; k <= b[2]; ++k) buckets_[{i, j, k}].push_back(f);
    }
  }

  struct Hit {
    std::size_t facet = 0;
    Vec3 point = Vec3::Zero();
    std::array<double, 3> bary{};
    double distance = std::numeric_limits<double>::infinity();
  };

  /// Nearest point on the indexed facets.
  Hit nearest(const Vec3& p) const {
    Hit best;
    const auto c = key(p);
    const double diag = s_->diagonal() + (p - s_->bbox_min()).norm();
    const auto max_ring = static_cast<std::int64_t>(std::ceil(diag / cell_)) + 1;
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      for (auto i = c[0] - ring; i <= c[0] + ring; ++i)
        for (auto j = c[1] - ring; j <= c[1] + ring; ++j)
          for (auto k = c[2] - ring; k <= c[2] + ring; ++k) {
            if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != ring) continue;
            auto it = buckets_.find({i, j, k});
            if (it == buckets_.end()) continue;
            for (std::size_t f : it->second) {
              const auto t = s_->triangle(f);
              std::array<double, 3> bary;
              const Vec3 q = closest_point_on_triangle(p, t[0], t[1], t[2], &bary);
              const double d = (q - p).norm();
              if (d < best.distance) best = {f, q, bary, d};
            }
          }
      // Every facet in unvisited cells is farther than ring*cell.
      if (best.distance <= static_cast<double>(ring) * cell_) break;
    }
    return best;
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      return static_cast<std::size_t>(k[0] * 73856093 ^ k[1] * 19349663 ^ k[2] * 83492791);
    }
  };
  std::array<std::int64_t, 3> key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p.x() - origin_.x()) / cell_)),
            static_cast<std::int64_t>(std::floor((p.y() - origin_.y()) / cell_)),
            static_cast<std::int64_t>(std::floor((p.z() - origin_.z()) / cell_))};
  }

  const TriangleSurface* s_;
  double cell_;
  Vec3 origin_;
  std::vector<std::size_t> facets_;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, KeyHash> buckets_;
};

inline double distance_to_surface(const TriangleSurface& s, const Vec3& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    const auto t = s.triangle(f);
    best = std::min(best, (closest_point_on_triangle(x, t[0], t[1], t[2]) - x).norm());
  }
  return best;
}

/// Generalized winding number of a closed surface around x (1 inside, 0 outside).
inline double winding_number(const TriangleSurface& s, const Vec3& x) {
  double omega = 0.0;
  for (std::size_t f = 0; f < s.facet_count(); ++f) {
    const auto t = s.triangle(f);
    omega += solid_angle(x, t[0], t[1], t[2]);
  }
  return omega / (4.0 * M_PI);
}

/// Tolerance under which a point counts as lying on the surface.
inline double on_surface_tolerance(const TriangleSurface& s) { return 1e-9 * s.diagonal(); }

/// Inside test for a closed surface. Points on the surface count as inside.
inline bool point_in_solid(const TriangleSurface& s, const Vec3& x) {
  const Vec3 lo = s.bbox_min(), hi = s.bbox_max();
  const double tol = on_surface_tolerance(s);
  for (int a = 0; a < 3; ++a)
    if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
  if (distance_to_surface(s, x) <= tol) return true;
  return winding_number(s, x) > 0.5;
}

// ---------------------------------------------------------------------------
// Lagrangian points

struct LagrangianCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> areas;
  std::vector<Vec3> boundary_velocity;

  std::size_t size() const { return points.size(); }

  /// Keeps the points where keep(i) is true.
  template <class Pred>
  LagrangianCloud filtered(Pred keep) const {
    LagrangianCloud c;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!keep(i)) continue;
      c.points.push_back(points[i]);
      c.normals.push_back(normals[i]);
      c.areas.push_back(areas[i]);
      c.boundary_velocity.push_back(boundary_velocity[i]);
    }
    return c;
  }
};

struct ResampleOptions {
  std::uint64_t seed = 20240601;
  /// Facet groups to sample; empty samples every facet.
  std::vector<int> groups;
  /// Candidate points generated per target point.
  int candidates_per_point = 12;
};

namespace detail {

class PointHash {
 public:
  PointHash(double cell, const Vec3& origin) : cell_(cell), origin_(origin) {}
  void insert(const Vec3& p, std::size_t id) { cells_[key(p)].push_back(id); }
  template <class Fn>
  void visit(const Vec3& p, int reach, Fn&& fn) const {
    const auto k = key(p);
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j)
        for (int l = -reach; l <= reach; ++l) {
          auto it = cells_.find({k[0] + i, k[1] + j, k[2] + l});
          if (it == cells_.end()) continue;
          for (std::size_t id : it->second) fn(id);
        }
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      return static_cast<std::size_t>(k[0] * 73856093 ^ k[1] * 19349663 ^ k[2] * 83492791);
    }
  };
  std::array<std::int64_t, 3> key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p.x() - origin_.x()) / cell_)),
            static_cast<std::int64_t>(std::floor((p.y() - origin_.y()) / cell_)),
            static_cast<std::int64_t>(std::floor((p.z() - origin_.z()) / cell_))};
  }
  double cell_;
  Vec3 origin_;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, KeyHash> cells_;
};

inline std::vector<std::size_t> greedy_disk_selection(const std::vector<Vec3>& cand, double radius,
                                                      const Vec3& origin) {
  PointHash hash(radius, origin);
  std::vector<std::size_t> chosen;
  const double r2 = radius * radius;
  for (std::size_t c = 0; c < cand.size(); ++c) {
    bool ok = true;
    hash.visit(cand[c], 1, [&](std::size_t id) {
      if (ok && (cand[chosen[id]] - cand[c]).squaredNorm() < r2) ok = false;
    });
    if (ok) {
      hash.insert(cand[c], chosen.size());
      chosen.push_back(c);
    }
  }
  return chosen;
}

}  // namespace detail

/// Quasi-uniform resampling: area-weighted random candidates, a greedy
/// minimum-distance selection whose radius is tuned so that the point count
/// matches area/ds^2, then one Lloyd pass (candidate centroids projected back
/// onto the surface). Every point carries the same area A/M.
inline LagrangianCloud resample_uniform(const TriangleSurface& s, double target_ds, const ResampleOptions& opt = {}) {
  if (!(target_ds > 0.0)) throw ConfigError("target spacing must be positive");
  if (target_ds >= s.diagonal()) throw ConfigError("target spacing must be smaller than the surface bounding-box diagonal");

  std::vector<std::size_t> facets;
  for (std::size_t f = 0; f < s.facet_count(); ++f)
    if (opt.groups.empty() || std::find(opt.groups.begin(), opt.groups.end(), s.groups()[f]) != opt.groups.end())
      facets.push_back(f);
  if (facets.empty()) throw ConfigError("no facets selected for resampling");

  std::vector<double> cumulative(facets.size());
  double area = 0.0;
  for (std::size_t i = 0; i < facets.size(); ++i) cumulative[i] = (area += s.areas()[facets[i]]);

  const double target_count = area / (target_ds * target_ds);
  if (target_count < 4.0) throw ConfigError("target spacing leaves fewer than four Lagrangian points");

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto n_cand = static_cast<std::size_t>(std::ceil(target_count * opt.candidates_per_point)) + 64;
  std::vector<Vec3> cand(n_cand);
  for (auto& c : cand) {
    const double pick = uni(rng) * area;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t f = facets[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), facets.size() - 1)];
    const auto t = s.triangle(f);
    const double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
    c = (1 - r1) * t[0] + r1 * (1 - r2) * t[1] + r1 * r2 * t[2];
  }

  // Bisection on the exclusion radius so the count lands within 2% of target.
  const Vec3 origin = s.bbox_min();
  double lo = 0.3 * target_ds, hi = 1.5 * target_ds;
  std::vector<std::size_t> chosen;
  for (int it = 0; it < 40; ++it) {
    const double r = 0.5 * (lo + hi);
    chosen = detail::greedy_disk_selection(cand, r, origin);
    const double n = static_cast<double>(chosen.size());
    if (std::abs(n - target_count) <= 0.02 * target_count) break;
    (n > target_count ? lo : hi) = r;
  }
  if (chosen.size() < 4) throw ConfigError("target spacing leaves fewer than four Lagrangian points");

  std::vector<Vec3> pts(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) pts[i] = cand[chosen[i]];

  // One Lloyd pass with the candidates as density samples.
  {
    detail::PointHash hash(target_ds, origin);
    for (std::size_t i = 0; i < pts.size(); ++i) hash.insert(pts[i], i);
    std::vector<Vec3> sum(pts.size(), Vec3::Zero());
    std::vector<std::size_t> count(pts.size(), 0);
    for (const auto& c : cand) {
      std::size_t best = pts.size();
      double bd = std::numeric_limits<double>::infinity();
      for (int reach = 1; best == pts.size() && reach <= 8; reach *= 2)
        hash.visit(c, reach, [&](std::size_t id) {
          const double d = (pts[id] - c).squaredNorm();
          if (d < bd) {
            bd = d;
            best = id;
          }
        });
      if (best == pts.size()) continue;
      sum[best] += c;
      count[best]++;
    }
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (count[i] > 0) pts[i] = sum[i] / static_cast<double>(count[i]);
  }

  FacetIndex index(s, 2.0 * target_ds, facets);
  LagrangianCloud cloud;
  cloud.points.reserve(pts.size());
  const double ds_area = area / static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const auto hit = index.nearest(p);
    Vec3 n = Vec3::Zero();
    for (int c = 0; c < 3; ++c) n += hit.bary[static_cast<std::size_t>(c)] * s.corner_normal(hit.facet, c);
    cloud.points.push_back(hit.point);
    cloud.normals.push_back(n.norm() > 0 ? Vec3(n.normalized()) : s.normals()[hit.facet]);
    cloud.areas.push_back(ds_area);
    cloud.boundary_velocity.push_back(Vec3::Zero());
  }
  return cloud;
}

inline void write_cloud_csv(const LagrangianCloud& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "x,y,z,nx,ny,nz,dS\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.points[i];
    const auto& n = c.normals[i];
    out << p.x() << ',' << p.y() << ',' << p.z() << ',' << n.x() << ',' << n.y() << ',' << n.z() << ','
        << c.areas[i] << '\n';
  }
}

/// Mean distance from each point to its nearest neighbour.
inline double mean_nearest_neighbor_spacing(const std::vector<Vec3>& pts, double cell_hint) {
  if (pts.size() < 2) return 0.0;
  Vec3 origin = pts[0];
  for (const auto& p : pts) origin = origin.cwiseMin(p);
  detail::PointHash hash(cell_hint, origin);
  for (std::size_t i = 0; i < pts.size(); ++i) hash.insert(pts[i], i);
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int reach = 1; !std::isfinite(best) && reach <= 64; reach *= 2)
      hash.visit(pts[i], reach, [&](std::size_t id) {
        if (id != i) best = std::min(best, (pts[id] - pts[i]).norm());
      });
    total += best;
  }
  return total / static_cast<double>(pts.size());
}

}  // namespace ibflow
