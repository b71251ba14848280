#pragma once

// Incremental pressure-correction time stepping with IB enforcement on the
// collocated lattice.
//
// Step layout: tentative velocity (semi-implicit momentum), IB force solve and
// velocity correction, pressure-increment Poisson solve on the corrected
// velocity, projection of velocity and pressure update.
//
// The projection is exact in the discrete sense. With G the central gradient
// evaluated at velocity unknowns and W a diagonal weight, the Poisson operator
// is G^T W G and the discrete divergence it zeroes is the central divergence.
// Pressure patches use an odd ghost reflection (Phi_ghost = 2 Phi_b - Phi_in)
// with weight 1/2 on that one-sided gradient, which keeps the operator
// symmetric and pins every sub-lattice of the wide stencil.

#include "ibflow/grid.hpp"
#include "ibflow/ibforce.hpp"
#include "ibflow/kernel.hpp"
#include "ibflow/linsolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ibflow {

// ---------------------------------------------------------------------------
// Boundary conditions

enum class Face { XMin = 0, XMax, YMin, YMax, ZMin, ZMax };

inline int face_axis(Face f) { return static_cast<int>(f) / 2; }
inline int face_side(Face f) { return static_cast<int>(f) % 2; }  // 0 = min, 1 = max
inline Vec3 inward_normal(Face f) {
  Vec3 n = Vec3::Zero();
  n[face_axis(f)] = face_side(f) ? -1.0 : 1.0;
  return n;
}

/// Piecewise-linear table of (time, value), clamped outside its range. An
/// empty table is the constant 1.
struct TimeTable {
  std::vector<std::pair<double, double>> points;

  double operator()(double t) const {
    if (points.empty()) return 1.0;
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](double x, const std::pair<double, double>& p) { return x < p.first; });
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
  }

  void validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].first > points[i - 1].first)) throw ConfigError("time table times must increase strictly");
  }

  bool operator==(const TimeTable&) const = default;
};

enum class PatchKind { NoSlip, Velocity, Pressure };

enum class VelocityProfile { Uniform, Parabolic };

struct BoundaryPatch {
  std::string name;
  Face face = Face::XMin;
  PatchKind kind = PatchKind::NoSlip;
  /// Optional disk on the face; without it the patch covers the whole face.
  std::optional<Vec3> disk_center;
  double disk_radius = 0.0;
  /// Velocity patches: uniform value, or parabolic u_max (1 - r^2/R^2) along
  /// `velocity` (whose magnitude is u_max) over the disk.
  Vec3 velocity = Vec3::Zero();
  VelocityProfile profile = VelocityProfile::Uniform;
  /// Pressure patches, Pa.
  double pressure = 0.0;
  /// Multiplies the velocity or pressure value.
  TimeTable scale;

  bool contains(const Vec3& x) const {
    if (!disk_center) return true;
    Vec3 d = x - *disk_center;
    d[face_axis(face)] = 0.0;
    return d.norm() <= disk_radius * (1.0 + 1e-9);
  }

  Vec3 velocity_at(const Vec3& x, double t) const {
    if (kind != PatchKind::Velocity) return Vec3::Zero();
    Vec3 v = velocity * scale(t);
    if (profile == VelocityProfile::Parabolic) {
      if (!disk_center) throw ConfigError("patch " + name + ": a parabolic profile needs a disk");
      Vec3 d = x - *disk_center;
      d[face_axis(face)] = 0.0;
      const double s = d.norm() / disk_radius;
      v *= std::max(0.0, 1.0 - s * s);
    }
    return v;
  }

  double pressure_at(double t) const { return pressure * scale(t); }
};

/// Patches are matched first-come on the box faces; unclaimed face nodes are
/// no-slip. Nodes on a box edge take the first patch claiming any of their faces.
struct BoundaryConditionSet {
  std::vector<BoundaryPatch> patches;

  bool has_pressure_patch() const {
    return std::any_of(patches.begin(), patches.end(), [](const auto& p) { return p.kind == PatchKind::Pressure; });
  }
};

struct FluidProperties {
  double rho = 1.0;
  double mu = 1.0;
  double nu() const { return mu / rho; }
  void validate() const {
    if (!(rho > 0.0)) throw ConfigError("fluid density must be positive");
    if (!(mu > 0.0)) throw ConfigError("fluid viscosity must be positive");
  }
};

struct TimeControls {
  double dt = 1e-3;
  double t_end = 1.0;
  double steady_tolerance = 1e-8;
  long max_steps = 1000000;
  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (!(steady_tolerance > 0.0)) throw ConfigError("steady tolerance must be positive");
    if (!(t_end > 0.0)) throw ConfigError("end time must be positive");
  }
};

enum class MonitorMode { Verbatim, Rms };

/// Normalized change between successive velocity fields, per component:
/// sqrt(sum d^2 / N^2) / (max u_prev - min u_prev) (Verbatim), or with N in
/// place of N^2 (Rms). A constant previous field gives 0.
inline std::array<double, 3> steady_monitor(const VectorField& u_prev, const VectorField& u_next,
                                            MonitorMode mode = MonitorMode::Verbatim) {
  if (u_prev.size() != u_next.size()) throw ConfigError("steady monitor: field sizes differ");
  std::array<double, 3> out{};
  const auto n = static_cast<double>(u_prev.size());
  if (u_prev.size() == 0) return out;
  for (int a = 0; a < 3; ++a) {
    const auto [mn, mx] = std::minmax_element(u_prev[a].begin(), u_prev[a].end());
    const double range = *mx - *mn;
    if (range == 0.0) continue;
    const double ss = deterministic_sum(u_prev.size(), [&](std::size_t i) {
      const double d = u_next[a][i] - u_prev[a][i];
      return d * d;
    });
    out[static_cast<std::size_t>(a)] = std::sqrt(ss / (mode == MonitorMode::Verbatim ? n * n : n)) / range;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Node roles

enum class NodeRole : std::uint8_t {
  Interior,        // momentum equation, velocity unknown
  PressurePatch,   // pressure Dirichlet, velocity extrapolated from inside
  VelocityWall,    // velocity Dirichlet on a box face
  CropWall,        // velocity Dirichlet (no-slip) on the cropped boundary
};

struct BoundaryLayout {
  std::vector<NodeRole> role;
  std::vector<int> patch;     // index into bc.patches, -1 if none
  std::vector<int> out_axis;  // pressure patches: axis of the owning face
  std::vector<int> out_dir;   // pressure patches: +1 if the face is a max face

  bool velocity_unknown(std::size_t a) const {
    return role[a] == NodeRole::Interior || role[a] == NodeRole::PressurePatch;
  }
};

inline BoundaryLayout classify_nodes(const EulerianGrid& g, const BoundaryConditionSet& bc) {
  const std::size_t n = g.active_count();
  BoundaryLayout L;
  L.role.assign(n, NodeRole::Interior);
  L.patch.assign(n, -1);
  L.out_axis.assign(n, -1);
  L.out_dir.assign(n, 0);
  const auto& d = g.dims();
  for (std::size_t a = 0; a < n; ++a) {
    const auto c = g.coords(a);
    std::array<bool, 6> on{};
    bool on_face = false;
    for (int ax = 0; ax < 3; ++ax) {
      on[2 * ax] = c[ax] == 0;
      on[2 * ax + 1] = c[ax] == d[ax] - 1;
      on_face = on_face || on[2 * ax] || on[2 * ax + 1];
    }
    if (!on_face) {
      if (!g.is_interior(a)) L.role[a] = NodeRole::CropWall;
      continue;
    }
    L.role[a] = NodeRole::VelocityWall;
    const Vec3 x = g.position(a);
    for (std::size_t p = 0; p < bc.patches.size(); ++p) {
      const auto& P = bc.patches[p];
      if (!on[static_cast<std::size_t>(P.face)] || !P.contains(x)) continue;
      L.patch[a] = static_cast<int>(p);
      if (P.kind == PatchKind::Pressure) {
        const int ax = face_axis(P.face);
        const int dir = face_side(P.face) ? 1 : -1;
        // A pressure node needs its inward neighbour for the velocity extrapolation.
        if (g.neighbor(a, ax, -dir) != kNoNode) {
          L.role[a] = NodeRole::PressurePatch;
          L.out_axis[a] = ax;
          L.out_dir[a] = dir;
        }
      }
      break;
    }
  }
  return L;
}

// ---------------------------------------------------------------------------
// Projection operator

/// Gradient rows at velocity unknowns and the Poisson system built from them.
class ProjectionOperator {
 public:
  struct GradRow {
    std::int64_t n0 = kNoNode, n1 = kNoNode;  // (G Phi) = c0 Phi[n0] + c1 Phi[n1]
    double c0 = 0.0, c1 = 0.0;
    double w = 0.0;
  };

  ProjectionOperator() = default;

  ProjectionOperator(const EulerianGrid& g, const BoundaryLayout& L) : n_(g.active_count()), h_(g.spacing()) {
    rows_.assign(3 * n_, GradRow{});
    for (std::size_t a = 0; a < n_; ++a) {
      if (!L.velocity_unknown(a)) continue;
      for (int ax = 0; ax < 3; ++ax) {
        const auto p = g.neighbor(a, ax, +1), m = g.neighbor(a, ax, -1);
        GradRow& r = rows_[3 * a + static_cast<std::size_t>(ax)];
        if (p != kNoNode && m != kNoNode) {
          r = {p, m, 1.0 / (2 * h_), -1.0 / (2 * h_), 1.0};
        } else if (L.role[a] == NodeRole::PressurePatch && (p != kNoNode || m != kNoNode)) {
          // Odd ghost reflection through the pressure node.
          const auto in = p != kNoNode ? p : m;
          const double s = p != kNoNode ? 1.0 : -1.0;
          r = {in, static_cast<std::int64_t>(a), s / h_, -s / h_, 0.5};
        }
      }
    }
    // Pressure unknowns: touched by some gradient row and not pressure Dirichlet.
    dirichlet_.assign(n_, 0);
    for (std::size_t a = 0; a < n_; ++a) dirichlet_[a] = L.role[a] == NodeRole::PressurePatch;
    std::vector<char> touched(n_, 0);
    for (const auto& r : rows_) {
      if (r.n0 != kNoNode) touched[static_cast<std::size_t>(r.n0)] = 1;
      if (r.n1 != kNoNode) touched[static_cast<std::size_t>(r.n1)] = 1;
    }
    unknown_index_.assign(n_, -1);
    for (std::size_t a = 0; a < n_; ++a)
      if (touched[a] && !dirichlet_[a]) {
        unknown_index_[a] = static_cast<std::int64_t>(unknowns_.size());
        unknowns_.push_back(a);
      }

    // A = G^T W G split into unknown-unknown and unknown-Dirichlet parts.
    std::vector<SparseOperator::Triplet> t, tb;
    for (const auto& r : rows_) {
      if (r.n0 == kNoNode) continue;
      const std::array<std::pair<std::int64_t, double>, 2> e = {{{r.n0, r.c0}, {r.n1, r.c1}}};
      for (const auto& [ni, ci] : e) {
        const auto ui = unknown_index_[static_cast<std::size_t>(ni)];
        if (ui < 0) continue;
        for (const auto& [nj, cj] : e) {
          const auto uj = unknown_index_[static_cast<std::size_t>(nj)];
          if (uj >= 0)
            t.push_back({static_cast<std::size_t>(ui), static_cast<std::size_t>(uj), r.w * ci * cj});
          else if (dirichlet_[static_cast<std::size_t>(nj)])
            tb.push_back({static_cast<std::size_t>(ui), static_cast<std::size_t>(nj), r.w * ci * cj});
        }
      }
    }
    A_ = SparseOperator::from_triplets(unknowns_.size(), std::move(t), true);
    boundary_coupling_ = std::move(tb);
    find_unpinned_components();
  }

  std::size_t unknown_count() const { return unknowns_.size(); }
  const std::vector<std::size_t>& unknowns() const { return unknowns_; }
  const SparseOperator& matrix() const { return A_; }
  const std::vector<char>& dirichlet() const { return dirichlet_; }
  const std::vector<std::vector<std::size_t>>& floating_components() const { return floating_; }
  const GradRow& row(std::size_t a, int axis) const { return rows_[3 * a + static_cast<std::size_t>(axis)]; }

  double apply_row(std::size_t a, int axis, const ScalarField& phi) const {
    const auto& r = row(a, axis);
    if (r.n0 == kNoNode) return 0.0;
    return r.c0 * phi[static_cast<std::size_t>(r.n0)] + r.c1 * phi[static_cast<std::size_t>(r.n1)];
  }

  /// Central divergence with missing neighbours contributing nothing. Equals
  /// -G^T W u + (Dirichlet terms) at every pressure unknown.
  ScalarField divergence(const EulerianGrid& g, const VectorField& u) const {
    ScalarField out(n_, 0.0);
    for (std::size_t a = 0; a < n_; ++a) {
      double s = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        const auto p = g.neighbor(a, ax, +1), m = g.neighbor(a, ax, -1);
        if (p != kNoNode) s += u[ax][static_cast<std::size_t>(p)];
        if (m != kNoNode) s -= u[ax][static_cast<std::size_t>(m)];
      }
      out[a] = s / (2 * h_);
    }
    return out;
  }

  /// 2-norm of the divergence over the pressure unknowns.
  double divergence_norm(const EulerianGrid& g, const VectorField& u) const {
    const auto d = divergence(g, u);
    return std::sqrt(deterministic_sum(unknowns_.size(), [&](std::size_t k) { return d[unknowns_[k]] * d[unknowns_[k]]; }));
  }

  /// Solves G^T W G Phi = -scale * source on the unknowns with Phi fixed at
  /// Dirichlet nodes (phi holds those values on entry and the warm start).
  SolveReport solve(const ScalarField& source, double scale, ScalarField& phi, const SolveOptions& opt) const {
    DVec b(unknowns_.size());
    for (std::size_t k = 0; k < unknowns_.size(); ++k) b[k] = -scale * source[unknowns_[k]];
    for (const auto& e : boundary_coupling_) b[e.row] -= e.value * phi[e.col];
    for (const auto& comp : floating_) {
      double sum = 0.0, mag = 0.0;
      for (std::size_t k : comp) {
        sum += b[k];
        mag += std::abs(b[k]);
      }
      if (std::abs(sum) > 1e-8 * mag && std::abs(sum) > 1e-300)
        throw NumericalError("pressure Poisson source is incompatible with the all-Neumann boundary (nonzero mean "
                             "on an unpinned sub-lattice of " + std::to_string(comp.size()) + " nodes)");
      const double mean = sum / static_cast<double>(comp.size());
      for (std::size_t k : comp) b[k] -= mean;
    }
    DVec x(unknowns_.size());
    for (std::size_t k = 0; k < unknowns_.size(); ++k) x[k] = phi[unknowns_[k]];
    SolveReport rep = cg_solve(A_, b, x, opt);
    for (const auto& comp : floating_) {
      // Fix the free constant: zero mean on each unpinned component.
      double mean = 0.0;
      for (std::size_t k : comp) mean += x[k];
      mean /= static_cast<double>(comp.size());
      for (std::size_t k : comp) x[k] -= mean;
    }
    for (std::size_t k = 0; k < unknowns_.size(); ++k) phi[unknowns_[k]] = x[k];
    return rep;
  }

 private:
  void find_unpinned_components() {
    const std::size_t m = unknowns_.size();
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    const auto& rp = A_.row_ptr();
    const auto& cols = A_.col();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t e = rp[r]; e < rp[r + 1]; ++e) parent[find(r)] = find(cols[e]);
    std::vector<char> pinned(m, 0);
    for (const auto& e : boundary_coupling_) pinned[find(e.row)] = 1;
    std::vector<std::int64_t> slot(m, -1);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t root = find(r);
      if (pinned[root]) continue;
      if (slot[root] < 0) {
        slot[root] = static_cast<std::int64_t>(floating_.size());
        floating_.emplace_back();
      }
      floating_[static_cast<std::size_t>(slot[root])].push_back(r);
    }
  }

  std::size_t n_ = 0;
  double h_ = 0.0;
  std::vector<GradRow> rows_;
  std::vector<char> dirichlet_;
  std::vector<std::int64_t> unknown_index_;
  std::vector<std::size_t> unknowns_;
  SparseOperator A_;
  std::vector<SparseOperator::Triplet> boundary_coupling_;  // (unknown, node, value)
  std::vector<std::vector<std::size_t>> floating_;
};

// ---------------------------------------------------------------------------
// Solver

/// LinearUpwind keeps first-order upwind in the matrix and adds the
/// second-order upwind difference on u^n to the right-hand side.
enum class Advection { Central, Upwind, LinearUpwind };

struct SolverSettings {
  Advection advection = Advection::Central;
  double momentum_tol = 1e-8;
  double poisson_tol = 1e-10;
  int max_iterations = 20000;
  bool ib_enabled = true;
  MonitorMode monitor = MonitorMode::Verbatim;
  std::size_t dense_cap = kDefaultDenseCap;
};

struct StepRecord {
  long step = 0;
  double time = 0.0;
  std::array<double, 3> monitor{};
  double enforcement_corrected = 0.0;  // after the IB correction
  double enforcement_projected = 0.0;  // after the projection
  double div_star = 0.0;
  double div_corrected = 0.0;
  double div_next = 0.0;
  int momentum_iterations = 0;
  int poisson_iterations = 0;
  double poisson_residual = 0.0;
};

class IpcsSolver {
 public:
  IpcsSolver(EulerianGrid grid, BoundaryConditionSet bc, FluidProperties props, double dt,
             SolverSettings settings = {})
      : grid_(std::move(grid)), bc_(std::move(bc)), props_(props), dt_(dt), settings_(settings) {
    props_.validate();
    if (!(dt_ > 0.0)) throw ConfigError("time step must be positive");
    for (const auto& p : bc_.patches) p.scale.validate();
    layout_ = classify_nodes(grid_, bc_);
    projection_ = ProjectionOperator(grid_, layout_);
    state_ = FieldState(grid_.active_count());
    apply_velocity_dirichlet(state_.u_n, 0.0);
    for (std::size_t a = 0; a < grid_.active_count(); ++a)
      if (layout_.role[a] == NodeRole::PressurePatch)
        state_.p_n[a] = bc_.patches[static_cast<std::size_t>(layout_.patch[a])].pressure_at(0.0);
  }

  /// Builds the coupling and caches the factored force matrix for a rigid boundary.
  void attach_boundary(const LagrangianCloud& cloud) {
    if (!settings_.ib_enabled || cloud.size() == 0) {
      ib_ = IbCorrector();
      return;
    }
    std::vector<char> correctable(grid_.active_count(), 0);
    for (std::size_t a = 0; a < correctable.size(); ++a) correctable[a] = layout_.velocity_unknown(a);
    ib_ = IbCorrector(build_coupling(grid_, cloud), cloud.areas, cloud.boundary_velocity, dt_, props_.rho,
                      std::move(correctable), settings_.dense_cap);
  }

  const EulerianGrid& grid() const { return grid_; }
  const BoundaryLayout& layout() const { return layout_; }
  const ProjectionOperator& projection() const { return projection_; }
  const FluidProperties& properties() const { return props_; }
  const BoundaryConditionSet& boundary_conditions() const { return bc_; }
  const SolverSettings& settings() const { return settings_; }
  const IbCorrector& ib() const { return ib_; }
  double dt() const { return dt_; }
  FieldState& state() { return state_; }
  const FieldState& state() const { return state_; }

  /// Overwrites velocity at velocity-Dirichlet nodes with their values at t.
  void apply_velocity_dirichlet(VectorField& u, double t) const {
    for (std::size_t a = 0; a < grid_.active_count(); ++a) {
      if (layout_.velocity_unknown(a)) continue;
      u.set(a, dirichlet_velocity(a, t));
    }
  }

  Vec3 dirichlet_velocity(std::size_t a, double t) const {
    if (layout_.role[a] != NodeRole::VelocityWall || layout_.patch[a] < 0) return Vec3::Zero();
    return bc_.patches[static_cast<std::size_t>(layout_.patch[a])].velocity_at(grid_.position(a), t);
  }

  /// Semi-implicit momentum step: u* + dt (u^n . grad) u* - dt nu lap u* = u^n - (dt/rho) grad p^n.
  VectorField tentative_velocity(int* iterations = nullptr) {
    const double t_next = state_.time + dt_;
    const SparseOperator A = momentum_matrix(state_.u_n);
    VectorField u_star(grid_.active_count());
    int iters = 0;
    for (int ax = 0; ax < 3; ++ax) {
      DVec b(grid_.active_count(), 0.0);
      for (std::size_t a = 0; a < b.size(); ++a) {
        switch (layout_.role[a]) {
          case NodeRole::Interior:
            b[a] = state_.u_n[ax][a] - dt_ / props_.rho * projection_.apply_row(a, ax, state_.p_n);
            if (settings_.advection == Advection::LinearUpwind) b[a] -= dt_ * upwind_correction(a, state_.u_n[ax]);
            break;
          case NodeRole::PressurePatch:
            b[a] = 0.0;
            break;
          default:
            b[a] = dirichlet_velocity(a, t_next)[ax];
        }
      }
      DVec x = state_.u_n[ax];
      SolveOptions opt;
      opt.tol = settings_.momentum_tol;
      opt.max_iter = settings_.max_iterations;
      const SolveReport rep = krylov_solve(A, b, x, opt);
      if (!rep.converged)
        throw NumericalError(std::string("momentum solve (") + "xyz"[ax] + " component) failed: " + rep.summary());
      iters += rep.iterations;
      u_star[ax] = std::move(x);
    }
    if (iterations) *iterations = iters;
    return u_star;
  }

  /// Pressure increment Phi (Pa) from the divergence of u: lap Phi = (rho/dt) div u,
  /// Phi = p_b(t_next) - p^n on pressure patches. `phi` is the warm start.
  SolveReport pressure_poisson(const VectorField& u, ScalarField& phi, double t_next) const {
    return solve_pressure_increment(projection_.divergence(grid_, u), phi, t_next);
  }

  SolveReport solve_pressure_increment(const ScalarField& source, ScalarField& phi, double t_next) const {
    if (phi.size() != grid_.active_count()) phi.assign(grid_.active_count(), 0.0);
    for (std::size_t a = 0; a < phi.size(); ++a)
      if (layout_.role[a] == NodeRole::PressurePatch)
        phi[a] = bc_.patches[static_cast<std::size_t>(layout_.patch[a])].pressure_at(t_next) - state_.p_n[a];
    SolveOptions opt;
    opt.tol = settings_.poisson_tol;
    opt.max_iter = settings_.max_iterations;
    const SolveReport rep = projection_.solve(source, props_.rho / dt_, phi, opt);
    if (!rep.converged) throw NumericalError("pressure Poisson solve failed: " + rep.summary());
    return rep;
  }

  /// u^{n+1} = u - (dt/rho) G Phi at velocity unknowns; p^{n+1} = p^n + Phi.
  void update_velocity_pressure(const VectorField& u, const ScalarField& phi, VectorField& u_next,
                                ScalarField& p_next) const {
    u_next = u;
    const double s = dt_ / props_.rho;
    for (std::size_t a = 0; a < grid_.active_count(); ++a) {
      if (!layout_.velocity_unknown(a)) continue;
      for (int ax = 0; ax < 3; ++ax) u_next[ax][a] -= s * projection_.apply_row(a, ax, phi);
    }
    p_next = state_.p_n;
    for (std::size_t a = 0; a < p_next.size(); ++a) p_next[a] += phi[a];
  }

  /// One full time step; rotates u^{n+1} into u^n.
  StepRecord advance() {
    StepRecord rec;
    const double t_next = state_.time + dt_;
    state_.u_star = tentative_velocity(&rec.momentum_iterations);
    rec.div_star = projection_.divergence_norm(grid_, state_.u_star);

    VectorField u_corr = state_.u_star;
    if (ib_.enabled()) {
      const auto res = ib_.correct(u_corr, &state_.f_body);
      rec.enforcement_corrected = res.enforcement_residual;
    }
    rec.div_corrected = projection_.divergence_norm(grid_, u_corr);

    const SolveReport rep = pressure_poisson(u_corr, state_.phi, t_next);
    rec.poisson_iterations = rep.iterations;
    rec.poisson_residual = rep.relative_residual;

    ScalarField p_next;
    update_velocity_pressure(u_corr, state_.phi, state_.u_next, p_next);
    rec.div_next = projection_.divergence_norm(grid_, state_.u_next);
    if (ib_.enabled()) rec.enforcement_projected = ib_.enforcement_error(state_.u_next);

    rec.monitor = steady_monitor(state_.u_n, state_.u_next, settings_.monitor);
    state_.u_n = state_.u_next;
    state_.p_n = std::move(p_next);
    state_.time = t_next;
    state_.step += 1;
    rec.step = state_.step;
    rec.time = state_.time;
    return rec;
  }

 private:
  /// u . (D2 - D1) q at an interior node: second-order minus first-order upwind,
  /// zero along an axis where the second upwind node is missing.
  double upwind_correction(std::size_t a, const DVec& q) const {
    const double h = grid_.spacing();
    double sum = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      const double c = state_.u_n[ax][a];
      if (c == 0.0) continue;
      const int up = c > 0 ? -1 : +1;
      const auto n1 = grid_.neighbor(a, ax, up);
      if (n1 == kNoNode) continue;
      const auto n2 = grid_.neighbor(static_cast<std::size_t>(n1), ax, up);
      if (n2 == kNoNode) continue;
      const double d2 = q[a] - 2.0 * q[static_cast<std::size_t>(n1)] + q[static_cast<std::size_t>(n2)];
      sum += std::abs(c) * d2 / (2.0 * h);
    }
    return sum;
  }

  SparseOperator momentum_matrix(const VectorField& u_n) const {
    const std::size_t n = grid_.active_count();
    const double h = grid_.spacing();
    const double dnu = dt_ * props_.nu() / (h * h);
    std::vector<SparseOperator::Triplet> t;
    t.reserve(7 * n);
    for (std::size_t a = 0; a < n; ++a) {
      switch (layout_.role[a]) {
        case NodeRole::Interior: {
          double diag = 1.0;
          for (int ax = 0; ax < 3; ++ax) {
            const auto p = static_cast<std::size_t>(grid_.neighbor(a, ax, +1));
            const auto m = static_cast<std::size_t>(grid_.neighbor(a, ax, -1));
            const double c = dt_ * u_n[ax][a] / h;
            double cp = -dnu, cm = -dnu;
            diag += 2 * dnu;
            if (settings_.advection == Advection::Central) {
              cp += 0.5 * c;
              cm -= 0.5 * c;
            } else if (c > 0) {
              diag += c;
              cm -= c;
            } else {
              diag -= c;
              cp += c;
            }
            t.push_back({a, p, cp});
            t.push_back({a, m, cm});
          }
          t.push_back({a, a, diag});
          break;
        }
        case NodeRole::PressurePatch: {
          // u0 - (4 u1 - u2)/3 = 0 along the inward normal; first order if u2 is missing.
          const int ax = layout_.out_axis[a];
          const int in = -layout_.out_dir[a];
          const auto n1 = grid_.neighbor(a, ax, in);
          const auto n2 = grid_.neighbor(static_cast<std::size_t>(n1), ax, in);
          t.push_back({a, a, 1.0});
          if (n2 != kNoNode) {
            t.push_back({a, static_cast<std::size_t>(n1), -4.0 / 3.0});
            t.push_back({a, static_cast<std::size_t>(n2), 1.0 / 3.0});
          } else {
            t.push_back({a, static_cast<std::size_t>(n1), -1.0});
          }
          break;
        }
        default:
          t.push_back({a, a, 1.0});
      }
    }
    return SparseOperator::from_triplets(n, std::move(t));
  }

  EulerianGrid grid_;
  BoundaryConditionSet bc_;
  FluidProperties props_;
  double dt_;
  SolverSettings settings_;
  BoundaryLayout layout_;
  ProjectionOperator projection_;
  IbCorrector ib_;
  FieldState state_;
};

}  // namespace ibflow
