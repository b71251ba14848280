#pragma once

// Case configuration: JSON schema with unit-suffixed keys, strict validation,
// serialization and built-in verification presets.

#include "ibflow/error.hpp"
#include "ibflow/ipcs.hpp"
#include "ibflow/post.hpp"
#include "ibflow/shapes.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ibflow {

using Json = nlohmann::ordered_json;

enum class SurfacePreset { None, Cylinder, UBend, File };

struct CylinderSpec {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3(0.05, 0, 0);
  double radius = 0.005;
  int segments = 96;
  bool operator==(const CylinderSpec&) const = default;
};

struct UBendSpec {
  UBendGeometry geometry;
  int segments = 64;
  bool operator==(const UBendSpec& o) const {
    const auto& a = geometry;
    const auto& b = o.geometry;
    return a.bend_radius == b.bend_radius && a.inner_diameter == b.inner_diameter &&
           a.inlet_extension == b.inlet_extension && a.outlet_extension == b.outlet_extension &&
           a.bend_angle_deg == b.bend_angle_deg && segments == o.segments;
  }
};

struct SurfaceConfig {
  SurfacePreset preset = SurfacePreset::None;
  std::string path;  // File preset
  CylinderSpec cylinder;
  UBendSpec u_bend;
  double target_ds = 0.0;  // m
  /// Facet groups that receive Lagrangian points; empty means all.
  std::vector<int> groups{kWallGroup};
  std::uint64_t seed = ResampleOptions{}.seed;
  bool operator==(const SurfaceConfig&) const = default;
};

struct GridConfig {
  BoxDomain box;
  double h = 1e-3;
  bool crop = false;
  double crop_band_cells = 3.0;
  bool kernel_halo_check = true;
  bool operator==(const GridConfig& o) const {
    return box.min_corner == o.box.min_corner && box.max_corner == o.box.max_corner && h == o.h &&
           crop == o.crop && crop_band_cells == o.crop_band_cells && kernel_halo_check == o.kernel_halo_check;
  }
};

struct TimeConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  double steady_tolerance = 1e-8;
  bool stop_when_steady = true;
  long max_steps = 1000000;
  bool operator==(const TimeConfig&) const = default;
};

struct OutputConfig {
  bool write_fields = true;
  long field_cadence_steps = 0;  // 0: final state only
  long log_cadence_steps = 100;
  std::vector<ProbeLine> probes;
  bool operator==(const OutputConfig&) const = default;
};

/// Straight-pipe reference for the error report and WSS oracle.
struct PoiseuilleReference {
  Vec3 axis_start = Vec3::Zero();
  Vec3 axis_end = Vec3(0.05, 0, 0);
  double radius = 0.005;
  double dpdz = -20.0;  // Pa/m along axis_start -> axis_end
  bool operator==(const PoiseuilleReference&) const = default;
};

struct WssConfig {
  bool enabled = false;
  std::vector<double> collar_offsets_cells{2.0, 3.0, 4.0};
  /// Use the interpolated surface velocity as the stencil centre value. Off by
  /// default: the kernel smears the wall over +-2h, so the fit uses the collar only.
  bool anchor_surface_value = false;
  double mid_fraction = 0.5;
  bool operator==(const WssConfig&) const = default;
};

struct CaseConfig {
  std::string name = "case";
  GridConfig grid;
  SurfaceConfig surface;
  FluidProperties fluid;
  std::vector<BoundaryPatch> boundaries;
  TimeConfig time;
  SolverSettings solver;
  OutputConfig output;
  std::optional<PoiseuilleReference> exact;
  WssConfig wss;
};

// ---------------------------------------------------------------------------
// Enum spellings

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<Face> kFaceNames[] = {{Face::XMin, "x-min"}, {Face::XMax, "x-max"}, {Face::YMin, "y-min"},
                                                {Face::YMax, "y-max"}, {Face::ZMin, "z-min"}, {Face::ZMax, "z-max"}};
inline constexpr EnumName<PatchKind> kPatchKindNames[] = {
    {PatchKind::NoSlip, "no-slip"}, {PatchKind::Velocity, "velocity"}, {PatchKind::Pressure, "pressure"}};
inline constexpr EnumName<VelocityProfile> kProfileNames[] = {{VelocityProfile::Uniform, "uniform"},
                                                              {VelocityProfile::Parabolic, "parabolic"}};
inline constexpr EnumName<SurfacePreset> kSurfaceNames[] = {{SurfacePreset::None, "none"},
                                                            {SurfacePreset::Cylinder, "cylinder"},
                                                            {SurfacePreset::UBend, "u-bend"},
                                                            {SurfacePreset::File, "file"}};
inline constexpr EnumName<Advection> kAdvectionNames[] = {{Advection::Central, "central"},
                                                          {Advection::Upwind, "upwind"},
                                                          {Advection::LinearUpwind, "linear-upwind"}};
inline constexpr EnumName<MonitorMode> kMonitorNames[] = {{MonitorMode::Verbatim, "verbatim"},
                                                          {MonitorMode::Rms, "rms"}};

template <class E, std::size_t N>
const char* enum_to_string(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  throw ConfigError("unknown enum value");
}

template <class E, std::size_t N>
E enum_from_string(const EnumName<E> (&table)[N], const std::string& s, const std::string& where) {
  std::string options;
  for (const auto& e : table) {
    if (s == e.name) return e.value;
    options += (options.empty() ? "" : ", ") + std::string(e.name);
  }
  throw ConfigError(where + ": unknown value \"" + s + "\" (expected one of " + options + ")");
}

/// Reads one JSON object while tracking which keys were consumed.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required field " + field(key));
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    return convert<T>(at(key), field(key));
  }

  template <class T>
  T get_or(const std::string& key, const T& fallback) {
    return has(key) ? convert<T>(j_.at(key), field(key)) : fallback;
  }

  Vec3 vec(const std::string& key) { return to_vec(at(key), field(key)); }
  Vec3 vec_or(const std::string& key, const Vec3& fallback) {
    return has(key) ? to_vec(j_.at(key), field(key)) : fallback;
  }

  Reader child(const std::string& key) { return Reader(at(key), field(key)); }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + field(it.key()));
  }

  template <class T>
  static T convert(const Json& v, const std::string& name) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(name + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(name + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(name + ": expected a string");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(name + ": " + e.what());
    }
  }

  static Vec3 to_vec(const Json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(name + ": expected an array of three numbers");
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = convert<double>(v[static_cast<std::size_t>(a)], name);
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline void require_positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + " must be positive");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing

inline BoundaryPatch parse_patch(const Json& j, const std::string& path) {
  detail::Reader r(j, path);
  BoundaryPatch p;
  p.name = r.get_or<std::string>("name", "");
  p.face = detail::enum_from_string(detail::kFaceNames, r.get<std::string>("face"), r.field("face"));
  p.kind = detail::enum_from_string(detail::kPatchKindNames, r.get<std::string>("kind"), r.field("kind"));
  p.pressure = r.get_or<double>("pressure_pa", 0.0);
  p.velocity = r.vec_or("velocity_m_per_s", Vec3::Zero());
  if (r.has("disk_center_m")) {
    p.disk_center = r.vec("disk_center_m");
    p.disk_radius = r.get<double>("disk_radius_m");
    detail::require_positive(p.disk_radius, r.field("disk_radius_m"));
  } else if (r.has("disk_radius_m")) {
    throw ConfigError(r.field("disk_radius_m") + " needs disk_center_m");
  }
  p.profile = detail::enum_from_string(detail::kProfileNames, r.get_or<std::string>("profile", "uniform"),
                                       r.field("profile"));
  if (p.profile == VelocityProfile::Parabolic && !p.disk_center)
    throw ConfigError(r.field("profile") + ": a parabolic profile needs disk_center_m and disk_radius_m");
  if (r.has("scale_table")) {
    const auto& t = r.at("scale_table");
    if (!t.is_array()) throw ConfigError(r.field("scale_table") + ": expected an array of [time_s, factor] pairs");
    for (const auto& row : t) {
      if (!row.is_array() || row.size() != 2)
        throw ConfigError(r.field("scale_table") + ": expected an array of [time_s, factor] pairs");
      p.scale.points.emplace_back(detail::Reader::convert<double>(row[0], r.field("scale_table")),
                                  detail::Reader::convert<double>(row[1], r.field("scale_table")));
    }
    p.scale.validate();
  }
  r.finish();
  return p;
}

inline CaseConfig parse_config(const Json& j) {
  detail::Reader root(j, "");
  CaseConfig c;
  c.name = root.get_or<std::string>("name", "case");

  {
    auto g = root.child("grid");
    c.grid.box.min_corner = g.vec("box_min_m");
    c.grid.box.max_corner = g.vec("box_max_m");
    c.grid.box.validate();
    c.grid.h = g.get<double>("h_m");
    detail::require_positive(c.grid.h, g.field("h_m"));
    c.grid.crop = g.get_or<bool>("crop", false);
    c.grid.crop_band_cells = g.get_or<double>("crop_band_cells", 3.0);
    if (c.grid.crop_band_cells < 2.0) throw ConfigError(g.field("crop_band_cells") + " must be at least 2");
    c.grid.kernel_halo_check = g.get_or<bool>("kernel_halo_check", true);
    g.finish();
  }

  if (root.has("surface")) {
    auto s = root.child("surface");
    c.surface.preset =
        detail::enum_from_string(detail::kSurfaceNames, s.get<std::string>("preset"), s.field("preset"));
    if (c.surface.preset != SurfacePreset::None) {
      c.surface.target_ds = s.get<double>("target_ds_m");
      detail::require_positive(c.surface.target_ds, s.field("target_ds_m"));
    } else {
      c.surface.target_ds = s.get_or<double>("target_ds_m", 0.0);
    }
    c.surface.path = s.get_or<std::string>("path", "");
    if (c.surface.preset == SurfacePreset::File && c.surface.path.empty())
      throw ConfigError("missing required field " + s.field("path"));
    if (s.has("groups")) {
      c.surface.groups.clear();
      for (const auto& v : s.at("groups")) c.surface.groups.push_back(detail::Reader::convert<int>(v, s.field("groups")));
    }
    c.surface.seed = s.get_or<std::uint64_t>("seed", c.surface.seed);
    if (s.has("cylinder")) {
      auto cy = s.child("cylinder");
      c.surface.cylinder.start = cy.vec("start_m");
      c.surface.cylinder.end = cy.vec("end_m");
      c.surface.cylinder.radius = cy.get<double>("radius_m");
      detail::require_positive(c.surface.cylinder.radius, cy.field("radius_m"));
      c.surface.cylinder.segments = cy.get_or<int>("segments", 96);
      cy.finish();
    } else if (c.surface.preset == SurfacePreset::Cylinder) {
      throw ConfigError("missing required field " + s.field("cylinder"));
    }
    if (s.has("u_bend")) {
      auto u = s.child("u_bend");
      auto& g = c.surface.u_bend.geometry;
      g.bend_radius = u.get_or<double>("bend_radius_m", g.bend_radius);
      g.inner_diameter = u.get_or<double>("inner_diameter_m", g.inner_diameter);
      g.inlet_extension = u.get_or<double>("inlet_extension_m", g.inlet_extension);
      g.outlet_extension = u.get_or<double>("outlet_extension_m", g.outlet_extension);
      g.bend_angle_deg = u.get_or<double>("bend_angle_deg", g.bend_angle_deg);
      c.surface.u_bend.segments = u.get_or<int>("segments", 64);
      detail::require_positive(g.bend_radius, u.field("bend_radius_m"));
      detail::require_positive(g.inner_diameter, u.field("inner_diameter_m"));
      u.finish();
    }
    s.finish();
  }

  {
    auto f = root.child("fluid");
    c.fluid.rho = f.get<double>("density_kg_per_m3");
    c.fluid.mu = f.get<double>("viscosity_pa_s");
    detail::require_positive(c.fluid.rho, f.field("density_kg_per_m3"));
    detail::require_positive(c.fluid.mu, f.field("viscosity_pa_s"));
    f.finish();
  }

  if (root.has("boundaries")) {
    const auto& b = root.at("boundaries");
    if (!b.is_array()) throw ConfigError("boundaries: expected an array");
    for (std::size_t i = 0; i < b.size(); ++i) c.boundaries.push_back(parse_patch(b[i], "boundaries[" + std::to_string(i) + "]"));
  }

  {
    auto t = root.child("time");
    c.time.dt = t.get<double>("dt_s");
    c.time.t_end = t.get<double>("t_end_s");
    detail::require_positive(c.time.dt, t.field("dt_s"));
    detail::require_positive(c.time.t_end, t.field("t_end_s"));
    c.time.steady_tolerance = t.get_or<double>("steady_tolerance", 1e-8);
    detail::require_positive(c.time.steady_tolerance, t.field("steady_tolerance"));
    c.time.stop_when_steady = t.get_or<bool>("stop_when_steady", true);
    c.time.max_steps = t.get_or<long>("max_steps", 1000000);
    if (c.time.max_steps < 1) throw ConfigError(t.field("max_steps") + " must be at least 1");
    t.finish();
  }

  if (root.has("solver")) {
    auto s = root.child("solver");
    c.solver.advection = detail::enum_from_string(detail::kAdvectionNames, s.get_or<std::string>("advection", "central"),
                                                  s.field("advection"));
    c.solver.ib_enabled = s.get_or<bool>("ib_enabled", true);
    c.solver.monitor = detail::enum_from_string(detail::kMonitorNames, s.get_or<std::string>("monitor", "verbatim"),
                                                s.field("monitor"));
    c.solver.momentum_tol = s.get_or<double>("momentum_tolerance", c.solver.momentum_tol);
    c.solver.poisson_tol = s.get_or<double>("poisson_tolerance", c.solver.poisson_tol);
    c.solver.max_iterations = s.get_or<int>("max_iterations", c.solver.max_iterations);
    c.solver.dense_cap = s.get_or<std::size_t>("dense_cap", c.solver.dense_cap);
    detail::require_positive(c.solver.momentum_tol, s.field("momentum_tolerance"));
    detail::require_positive(c.solver.poisson_tol, s.field("poisson_tolerance"));
    s.finish();
  }

  if (root.has("output")) {
    auto o = root.child("output");
    c.output.write_fields = o.get_or<bool>("write_fields", true);
    c.output.field_cadence_steps = o.get_or<long>("field_cadence_steps", 0);
    c.output.log_cadence_steps = o.get_or<long>("log_cadence_steps", 100);
    if (o.has("probes")) {
      const auto& arr = o.at("probes");
      if (!arr.is_array()) throw ConfigError(o.field("probes") + ": expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Reader p(arr[i], o.field("probes") + "[" + std::to_string(i) + "]");
        ProbeLine line;
        line.name = p.get<std::string>("name");
        line.start = p.vec("start_m");
        line.end = p.vec("end_m");
        line.samples = p.get_or<int>("samples", 50);
        if (line.samples < 2) throw ConfigError(p.field("samples") + " must be at least 2");
        p.finish();
        c.output.probes.push_back(line);
      }
    }
    o.finish();
  }

  if (root.has("exact")) {
    auto e = root.child("exact");
    const auto kind = e.get<std::string>("kind");
    if (kind != "poiseuille") throw ConfigError(e.field("kind") + ": unknown value \"" + kind + "\" (expected poiseuille)");
    PoiseuilleReference ref;
    ref.axis_start = e.vec("axis_start_m");
    ref.axis_end = e.vec("axis_end_m");
    ref.radius = e.get<double>("radius_m");
    ref.dpdz = e.get<double>("dpdz_pa_per_m");
    detail::require_positive(ref.radius, e.field("radius_m"));
    if (!((ref.axis_end - ref.axis_start).norm() > 0.0)) throw ConfigError(e.field("axis_end_m") + " must differ from axis_start_m");
    e.finish();
    c.exact = ref;
  }

  if (root.has("wss")) {
    auto w = root.child("wss");
    c.wss.enabled = w.get_or<bool>("enabled", false);
    if (w.has("collar_offsets_cells")) {
      c.wss.collar_offsets_cells.clear();
      for (const auto& v : w.at("collar_offsets_cells"))
        c.wss.collar_offsets_cells.push_back(detail::Reader::convert<double>(v, w.field("collar_offsets_cells")));
    }
    c.wss.anchor_surface_value = w.get_or<bool>("anchor_surface_value", false);
    c.wss.mid_fraction = w.get_or<double>("mid_fraction", 0.5);
    if (!(c.wss.mid_fraction > 0.0 && c.wss.mid_fraction <= 1.0))
      throw ConfigError(w.field("mid_fraction") + " must lie in (0, 1]");
    w.finish();
  }

  root.finish();
  return c;
}

inline CaseConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline CaseConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

inline Json patch_json(const BoundaryPatch& p) {
  Json j;
  j["name"] = p.name;
  j["face"] = detail::enum_to_string(detail::kFaceNames, p.face);
  j["kind"] = detail::enum_to_string(detail::kPatchKindNames, p.kind);
  j["pressure_pa"] = p.pressure;
  j["velocity_m_per_s"] = detail::vec_json(p.velocity);
  if (p.disk_center) {
    j["disk_center_m"] = detail::vec_json(*p.disk_center);
    j["disk_radius_m"] = p.disk_radius;
  }
  j["profile"] = detail::enum_to_string(detail::kProfileNames, p.profile);
  if (!p.scale.points.empty()) {
    Json t = Json::array();
    for (const auto& [time, v] : p.scale.points) t.push_back(Json::array({time, v}));
    j["scale_table"] = t;
  }
  return j;
}

inline Json to_json(const CaseConfig& c) {
  Json j;
  j["name"] = c.name;
  j["grid"] = {{"box_min_m", detail::vec_json(c.grid.box.min_corner)},
               {"box_max_m", detail::vec_json(c.grid.box.max_corner)},
               {"h_m", c.grid.h},
               {"crop", c.grid.crop},
               {"crop_band_cells", c.grid.crop_band_cells},
               {"kernel_halo_check", c.grid.kernel_halo_check}};
  {
    Json s;
    s["preset"] = detail::enum_to_string(detail::kSurfaceNames, c.surface.preset);
    s["target_ds_m"] = c.surface.target_ds;
    s["path"] = c.surface.path;
    s["groups"] = c.surface.groups;
    s["seed"] = c.surface.seed;
    const auto& cy = c.surface.cylinder;
    s["cylinder"] = {{"start_m", detail::vec_json(cy.start)},
                     {"end_m", detail::vec_json(cy.end)},
                     {"radius_m", cy.radius},
                     {"segments", cy.segments}};
    const auto& g = c.surface.u_bend.geometry;
    s["u_bend"] = {{"bend_radius_m", g.bend_radius},
                   {"inner_diameter_m", g.inner_diameter},
                   {"inlet_extension_m", g.inlet_extension},
                   {"outlet_extension_m", g.outlet_extension},
                   {"bend_angle_deg", g.bend_angle_deg},
                   {"segments", c.surface.u_bend.segments}};
    j["surface"] = s;
  }
  j["fluid"] = {{"density_kg_per_m3", c.fluid.rho}, {"viscosity_pa_s", c.fluid.mu}};
  j["boundaries"] = Json::array();
  for (const auto& p : c.boundaries) j["boundaries"].push_back(patch_json(p));
  j["time"] = {{"dt_s", c.time.dt},
               {"t_end_s", c.time.t_end},
               {"steady_tolerance", c.time.steady_tolerance},
               {"stop_when_steady", c.time.stop_when_steady},
               {"max_steps", c.time.max_steps}};
  j["solver"] = {{"advection", detail::enum_to_string(detail::kAdvectionNames, c.solver.advection)},
                 {"ib_enabled", c.solver.ib_enabled},
                 {"monitor", detail::enum_to_string(detail::kMonitorNames, c.solver.monitor)},
                 {"momentum_tolerance", c.solver.momentum_tol},
                 {"poisson_tolerance", c.solver.poisson_tol},
                 {"max_iterations", c.solver.max_iterations},
                 {"dense_cap", c.solver.dense_cap}};
  {
    Json o;
    o["write_fields"] = c.output.write_fields;
    o["field_cadence_steps"] = c.output.field_cadence_steps;
    o["log_cadence_steps"] = c.output.log_cadence_steps;
    o["probes"] = Json::array();
    for (const auto& p : c.output.probes)
      o["probes"].push_back({{"name", p.name},
                             {"start_m", detail::vec_json(p.start)},
                             {"end_m", detail::vec_json(p.end)},
                             {"samples", p.samples}});
    j["output"] = o;
  }
  if (c.exact)
    j["exact"] = {{"kind", "poiseuille"},
                  {"axis_start_m", detail::vec_json(c.exact->axis_start)},
                  {"axis_end_m", detail::vec_json(c.exact->axis_end)},
                  {"radius_m", c.exact->radius},
                  {"dpdz_pa_per_m", c.exact->dpdz}};
  j["wss"] = {{"enabled", c.wss.enabled},
              {"collar_offsets_cells", c.wss.collar_offsets_cells},
              {"anchor_surface_value", c.wss.anchor_surface_value},
              {"mid_fraction", c.wss.mid_fraction}};
  return j;
}

/// Doubles print in shortest round-trip form, so a re-parse is exact.
inline std::string serialize_config(const CaseConfig& c) { return to_json(c).dump(2) + "\n"; }

inline bool operator==(const CaseConfig& a, const CaseConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"poiseuille-coarse", "poiseuille-fine", "poiseuille-double",
                                                 "u-bend", "lid-driven"};
  return names;
}

namespace detail {

/// Straight tube of radius 5 mm and length 10R along x in a 12 mm square box,
/// driven by a pressure drop between the two end faces.
inline CaseConfig poiseuille_case(double h, double dp) {
  CaseConfig c;
  const double R = 0.005, L = 10 * R;
  c.grid.box = {Vec3(0, -0.006, -0.006), Vec3(L, 0.006, 0.006)};
  c.grid.h = h;
  c.grid.crop = true;
  c.grid.crop_band_cells = 3.0;
  c.surface.preset = SurfacePreset::Cylinder;
  c.surface.cylinder = {Vec3(0, 0, 0), Vec3(L, 0, 0), R, 96};
  c.surface.target_ds = h;
  c.fluid = {1050.0, 0.00345};
  BoundaryPatch in, out;
  in.name = "inlet";
  in.face = Face::XMin;
  in.kind = PatchKind::Pressure;
  in.pressure = dp;
  out.name = "outlet";
  out.face = Face::XMax;
  out.kind = PatchKind::Pressure;
  out.pressure = 0.0;
  c.boundaries = {in, out};
  c.time.dt = 2.5e-3;
  c.time.t_end = 60.0;
  c.time.steady_tolerance = 1e-8;
  c.solver.advection = Advection::Central;
  c.exact = PoiseuilleReference{Vec3(0, 0, 0), Vec3(L, 0, 0), R, -dp / L};
  c.wss.enabled = true;
  c.output.probes = {{"centerline", Vec3(0, 0, 0), Vec3(L, 0, 0), 51},
                     {"mid_diameter", Vec3(L / 2, -R, 0), Vec3(L / 2, R, 0), 41}};
  return c;
}

}  // namespace detail

inline CaseConfig preset_config(const std::string& name) {
  if (name == "poiseuille-coarse") {
    auto c = detail::poiseuille_case(1e-3, 1.0);
    c.name = name;
    return c;
  }
  if (name == "poiseuille-fine") {
    auto c = detail::poiseuille_case(5e-4, 1.0);
    c.name = name;
    return c;
  }
  if (name == "poiseuille-double") {
    // Cell Reynolds number about 22: central differencing drifts into an
    // odd-even instability after a few thousand steps.
    auto c = detail::poiseuille_case(1e-3, 2.0);
    c.name = name;
    c.solver.advection = Advection::LinearUpwind;
    return c;
  }
  if (name == "u-bend") {
    // 90 degree bend, D_i = 4 mm, bend radius 24 mm, Re = 300 on the mean
    // inlet velocity. The outlet extension reaches the x-min box face so the
    // outlet patch lies on the cropped region.
    CaseConfig c;
    c.name = name;
    const double h = 4e-4;
    c.grid.box = {Vec3(-0.0064, 0.0, -0.0064), Vec3(0.032, 0.0384, 0.0064)};
    c.grid.h = h;
    c.grid.crop = true;
    c.grid.crop_band_cells = 3.0;
    c.surface.preset = SurfacePreset::UBend;
    c.surface.u_bend.geometry = UBendGeometry{0.024, 0.004, 0.001, 0.0064, 90.0};
    c.surface.u_bend.segments = 48;
    c.surface.target_ds = h;
    const double umax = 0.122625, rho = 1050.0;
    const double nu = 0.5 * umax * 0.004 / 300.0;
    c.fluid = {rho, rho * nu};
    BoundaryPatch in, out;
    in.name = "inlet";
    in.face = Face::YMin;
    in.kind = PatchKind::Velocity;
    in.disk_center = c.surface.u_bend.geometry.inlet_center();
    in.disk_radius = 0.002;
    in.velocity = Vec3(0, umax, 0);
    in.profile = VelocityProfile::Parabolic;
    out.name = "outlet";
    out.face = Face::XMin;
    out.kind = PatchKind::Pressure;
    out.disk_center = c.surface.u_bend.geometry.outlet_center();
    out.disk_radius = 0.002 + 3 * h;
    c.boundaries = {in, out};
    c.time.dt = 1e-3;
    c.time.t_end = 1.0;
    c.time.stop_when_steady = false;
    c.solver.advection = Advection::LinearUpwind;
    const Vec3 e = c.surface.u_bend.geometry.bend_end();
    c.output.probes = {{"outlet_start_radial", e - Vec3(0, 0.002, 0), e + Vec3(0, 0.002, 0), 41}};
    return c;
  }
  if (name == "lid-driven") {
    // Cubic cavity without an immersed surface; exercises plain IPCS.
    CaseConfig c;
    c.name = name;
    c.grid.box = {Vec3::Zero(), Vec3::Constant(0.01)};
    c.grid.h = 5e-4;
    c.fluid = {1000.0, 0.1};
    // Side and bottom walls first so the lid does not claim the edge nodes.
    for (Face f : {Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin}) {
      BoundaryPatch w;
      w.name = std::string("wall-") + detail::enum_to_string(detail::kFaceNames, f);
      w.face = f;
      c.boundaries.push_back(w);
    }
    BoundaryPatch lid;
    lid.name = "lid";
    lid.face = Face::ZMax;
    lid.kind = PatchKind::Velocity;
    lid.velocity = Vec3(0.01, 0, 0);
    c.boundaries.push_back(lid);
    c.time.dt = 1e-3;
    c.time.t_end = 0.05;
    c.time.stop_when_steady = false;
    c.solver.ib_enabled = false;
    c.output.probes = {{"vertical_centerline", Vec3(0.005, 0.005, 0), Vec3(0.005, 0.005, 0.01), 21}};
    return c;
  }
  std::string options;
  for (const auto& n : preset_names()) options += (options.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset \"" + name + "\" (expected one of " + options + ")");
}

}  // namespace ibflow
