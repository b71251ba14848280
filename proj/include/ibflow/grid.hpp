#pragma once

// Uniform Cartesian node lattice, its active subset, and the finite
// difference stencils that act on fields stored on active nodes.

#include "ibflow/error.hpp"
#include "ibflow/geometry.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ibflow {

struct BoxDomain {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Ones();

  Vec3 extent() const { return max_corner - min_corner; }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (!(max_corner[a] > min_corner[a])) {
        throw ConfigError("box: max_corner must exceed min_corner on axis " + std::string(1, "xyz"[a]));
      }
    }
  }
};

/// Checks applied by EulerianGrid::build.
struct GridChecks {
  /// Require every extent to be at least 4h so the delta kernel fits.
  bool kernel_halo = true;
};

using ScalarField = std::vector<double>;

/// Three component arrays, each with one value per active node.
struct VectorField {
  std::array<ScalarField, 3> comp;

  VectorField() = default;
  explicit VectorField(std::size_t n, double value = 0.0) {
    for (auto& c : comp) c.assign(n, value);
  }

  std::size_t size() const { return comp[0].size(); }
  ScalarField& operator[](int a) { return comp[static_cast<std::size_t>(a)]; }
  const ScalarField& operator[](int a) const { return comp[static_cast<std::size_t>(a)]; }

  Vec3 at(std::size_t i) const { return {comp[0][i], comp[1][i], comp[2][i]}; }
  void set(std::size_t i, const Vec3& v) {
    comp[0][i] = v.x();
    comp[1][i] = v.y();
    comp[2][i] = v.z();
  }

  bool operator==(const VectorField&) const = default;
};

inline constexpr std::int64_t kNoNode = -1;

/// Lattice nodes min_corner + h*(i,j,k). Fields live on the active subset
/// only; `active_to_global` and `global_to_active` translate between the two
/// numberings.
class EulerianGrid {
 public:
  /// Relative tolerance on extent/h being an integer.
  static constexpr double kRoundingTolerance = 1e-9;

  static EulerianGrid build(const BoxDomain& box, double h, GridChecks checks = {}) {
    box.validate();
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid spacing h must be positive");
    EulerianGrid g;
    g.box_ = box;
    g.h_ = h;
    const Vec3 ext = box.extent();
    for (int a = 0; a < 3; ++a) {
      const char axis = "xyz"[a];
      if (checks.kernel_halo && ext[a] < 4.0 * h * (1.0 - kRoundingTolerance)) {
        throw ConfigError(std::string("box extent along ") + axis +
                          " is smaller than 4h; the kernel needs a two-cell halo");
      }
      const double cells = ext[a] / h;
      const double rounded = std::round(cells);
      if (std::abs(cells - rounded) > kRoundingTolerance * std::max(1.0, cells)) {
        throw ConfigError(std::string("box extent along ") + axis + " is not an integer multiple of h (" +
                          std::to_string(cells) + " cells)");
      }
      g.dims_[a] = static_cast<int>(rounded) + 1;
    }
    const std::size_t total = g.lattice_size();
    g.mask_.assign(total, 1);
    g.rebuild_maps();
    return g;
  }

  /// Same lattice with a new active mask (one entry per lattice node).
  EulerianGrid with_mask(std::vector<char> mask) const {
    if (mask.size() != lattice_size()) throw ConfigError("mask size does not match lattice");
    EulerianGrid g = *this;
    g.mask_ = std::move(mask);
    g.rebuild_maps();
    return g;
  }

  const BoxDomain& box() const { return box_; }
  double spacing() const { return h_; }
  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t lattice_size() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
  }
  std::size_t active_count() const { return active_to_global_.size(); }
  const std::vector<char>& mask() const { return mask_; }

  std::size_t lattice_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  std::array<int, 3> lattice_coords(std::size_t g) const {
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    return {static_cast<int>(g % nx), static_cast<int>((g / nx) % ny), static_cast<int>(g / (nx * ny))};
  }
  bool in_lattice(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  Vec3 lattice_position(int i, int j, int k) const {
    return box_.min_corner + h_ * Vec3(i, j, k);
  }
  Vec3 position(std::size_t active) const {
    const auto c = lattice_coords(active_to_global_[active]);
    return lattice_position(c[0], c[1], c[2]);
  }
  std::array<int, 3> coords(std::size_t active) const { return lattice_coords(active_to_global_[active]); }

  std::size_t active_to_global(std::size_t a) const { return active_to_global_[a]; }
  std::int64_t global_to_active(std::size_t g) const { return global_to_active_[g]; }
  std::int64_t active_at(int i, int j, int k) const {
    if (!in_lattice(i, j, k)) return kNoNode;
    return global_to_active_[lattice_index(i, j, k)];
  }

  /// Active neighbour of `a` one step along `axis` in direction `dir` (+1/-1).
  std::int64_t neighbor(std::size_t a, int axis, int dir) const { return neighbor_[a][2 * axis + (dir > 0)]; }

  /// All six neighbours active.
  bool is_interior(std::size_t a) const {
    for (auto n : neighbor_[a])
      if (n == kNoNode) return false;
    return true;
  }

 private:
  void rebuild_maps() {
    active_to_global_.clear();
    global_to_active_.assign(lattice_size(), kNoNode);
    for (std::size_t g = 0; g < mask_.size(); ++g) {
      if (mask_[g]) {
        global_to_active_[g] = static_cast<std::int64_t>(active_to_global_.size());
        active_to_global_.push_back(g);
      }
    }
    neighbor_.assign(active_to_global_.size(), {});
    for (std::size_t a = 0; a < active_to_global_.size(); ++a) {
      const auto c = lattice_coords(active_to_global_[a]);
      for (int axis = 0; axis < 3; ++axis) {
        for (int s = 0; s < 2; ++s) {
          auto n = c;
          n[axis] += s ? 1 : -1;
          neighbor_[a][2 * axis + s] = active_at(n[0], n[1], n[2]);
        }
      }
    }
  }

  BoxDomain box_;
  double h_ = 0.0;
  std::array<int, 3> dims_{};
  std::vector<char> mask_;
  std::vector<std::size_t> active_to_global_;
  std::vector<std::int64_t> global_to_active_;
  std::vector<std::array<std::int64_t, 6>> neighbor_;
};

/// Velocity, pressure and force fields for one time level transition.
struct FieldState {
  VectorField u_n;
  VectorField u_star;
  VectorField u_next;
  ScalarField p_n;
  ScalarField phi;
  VectorField f_body;
  double time = 0.0;
  long step = 0;

  explicit FieldState(std::size_t n = 0)
      : u_n(n), u_star(n), u_next(n), p_n(n, 0.0), phi(n, 0.0), f_body(n) {}

  std::size_t node_count() const { return p_n.size(); }
};

// ---------------------------------------------------------------------------
// Stencils. Central differences where both neighbours are active; one-sided
// second-order differences otherwise (first order if only one neighbour is
// available on that side).

namespace detail {

inline double first_derivative(const EulerianGrid& g, const ScalarField& q, std::size_t a, int axis) {
  const double h = g.spacing();
  const auto p = g.neighbor(a, axis, +1);
  const auto m = g.neighbor(a, axis, -1);
  if (p != kNoNode && m != kNoNode) return (q[static_cast<std::size_t>(p)] - q[static_cast<std::size_t>(m)]) / (2 * h);
  if (p != kNoNode) {
    const auto pp = g.neighbor(static_cast<std::size_t>(p), axis, +1);
    if (pp != kNoNode)
      return (-3 * q[a] + 4 * q[static_cast<std::size_t>(p)] - q[static_cast<std::size_t>(pp)]) / (2 * h);
    return (q[static_cast<std::size_t>(p)] - q[a]) / h;
  }
  if (m != kNoNode) {
    const auto mm = g.neighbor(static_cast<std::size_t>(m), axis, -1);
    if (mm != kNoNode)
      return (3 * q[a] - 4 * q[static_cast<std::size_t>(m)] + q[static_cast<std::size_t>(mm)]) / (2 * h);
    return (q[a] - q[static_cast<std::size_t>(m)]) / h;
  }
  return 0.0;
}

inline void check_size(const EulerianGrid& g, std::size_t n) {
  if (n != g.active_count()) throw ConfigError("field length does not match active node count");
}

}  // namespace detail

inline VectorField gradient(const EulerianGrid& g, const ScalarField& p) {
  detail::check_size(g, p.size());
  VectorField out(g.active_count());
  for (std::size_t a = 0; a < g.active_count(); ++a)
    for (int axis = 0; axis < 3; ++axis) out[axis][a] = detail::first_derivative(g, p, a, axis);
  return out;
}

inline ScalarField divergence(const EulerianGrid& g, const VectorField& u) {
  detail::check_size(g, u.size());
  ScalarField out(g.active_count(), 0.0);
  for (std::size_t a = 0; a < g.active_count(); ++a)
    for (int axis = 0; axis < 3; ++axis) out[a] += detail::first_derivative(g, u[axis], a, axis);
  return out;
}

/// divergence(gradient(q)). In the interior this is the wide (2h) seven-point
/// operator, the one the pressure projection inverts.
inline ScalarField laplacian(const EulerianGrid& g, const ScalarField& q) { return divergence(g, gradient(g, q)); }

inline VectorField laplacian(const EulerianGrid& g, const VectorField& u) {
  VectorField out(g.active_count());
  for (int a = 0; a < 3; ++a) out[a] = laplacian(g, u[a]);
  return out;
}

/// Compact (h) seven-point Laplacian; one-sided second-order second
/// differences where a neighbour is missing. Used for momentum diffusion.
inline ScalarField compact_laplacian(const EulerianGrid& g, const ScalarField& q) {
  detail::check_size(g, q.size());
  const double h2 = g.spacing() * g.spacing();
  ScalarField out(g.active_count(), 0.0);
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    double s = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      const auto p = g.neighbor(a, axis, +1);
      const auto m = g.neighbor(a, axis, -1);
      if (p != kNoNode && m != kNoNode) {
        s += (q[static_cast<std::size_t>(p)] - 2 * q[a] + q[static_cast<std::size_t>(m)]) / h2;
        continue;
      }
      const int dir = p != kNoNode ? +1 : -1;
      std::int64_t n1 = p != kNoNode ? p : m;
      if (n1 == kNoNode) continue;
      const auto n2 = g.neighbor(static_cast<std::size_t>(n1), axis, dir);
      const auto n3 = n2 == kNoNode ? kNoNode : g.neighbor(static_cast<std::size_t>(n2), axis, dir);
      if (n3 == kNoNode) continue;
      s += (2 * q[a] - 5 * q[static_cast<std::size_t>(n1)] + 4 * q[static_cast<std::size_t>(n2)] -
            q[static_cast<std::size_t>(n3)]) /
           h2;
    }
    out[a] = s;
  }
  return out;
}

}  // namespace ibflow
