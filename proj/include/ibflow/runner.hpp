#pragma once

// Case orchestration: grid, surface, cropping, resampling, coupling, time
// loop and postprocessing, plus multi-resolution convergence studies.

#include "ibflow/config.hpp"
#include "ibflow/crop.hpp"
#include "ibflow/ipcs.hpp"
#include "ibflow/post.hpp"
#include "ibflow/shapes.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/sinks/null_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ibflow {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  /// Artifacts go here; empty disables all file output.
  std::filesystem::path output_dir;
  std::shared_ptr<spdlog::logger> log;
  /// Called after every step.
  std::function<void(const StepRecord&)> on_step;
};

struct WssSummary {
  std::size_t points = 0;
  std::size_t mid_points = 0;
  double mid_mean = 0.0;  // Pa, over points in the middle of the tube length
  double mid_min = 0.0;
  double mid_max = 0.0;
  double max_normal_ratio = 0.0;  // max |t_s . n| / |t|
};

struct RunResult {
  CaseConfig config;
  EulerianGrid grid;
  VectorField u;
  ScalarField p;
  long steps = 0;
  double time = 0.0;
  bool steady = false;
  std::array<double, 3> final_monitor{};

  std::size_t full_active_nodes = 0;
  std::size_t active_nodes = 0;
  double inside_fraction_before = 0.0;
  double inside_fraction_after = 0.0;

  std::size_t lagrangian_points = 0;
  std::size_t dropped_points = 0;
  double spacing_ratio = 0.0;  // h / sqrt(mean dS)

  double max_enforcement_corrected = 0.0;  // over all steps
  double worst_div_ratio = 0.0;            // div_next / div_star over steps after the first
  double peak_velocity = 0.0;              // max axial velocity (or max |u| without a reference)

  std::optional<ErrorReport> error;
  std::optional<WssSummary> wss;
  std::optional<double> dcpse_monomial_error;
  double wall_seconds = 0.0;
};

namespace detail {

inline std::shared_ptr<spdlog::logger> quiet_logger() {
  static auto log = std::make_shared<spdlog::logger>("ibflow-null", std::make_shared<spdlog::sinks::null_sink_mt>());
  return log;
}

inline TriangleSurface build_surface(const SurfaceConfig& s) {
  switch (s.preset) {
    case SurfacePreset::Cylinder:
      return make_capped_cylinder(s.cylinder.start, s.cylinder.end, s.cylinder.radius, s.cylinder.segments);
    case SurfacePreset::UBend:
      return make_u_bend(s.u_bend.geometry, s.u_bend.segments);
    case SurfacePreset::File:
      return load_surface(s.path);
    case SurfacePreset::None:
      break;
  }
  throw ConfigError("surface preset none has no geometry");
}

/// Distance from the reference axis and the axial coordinate in [0, 1].
inline std::pair<double, double> axis_coordinates(const PoiseuilleReference& ref, const Vec3& x) {
  const Vec3 d = ref.axis_end - ref.axis_start;
  const double len = d.norm();
  const Vec3 e = d / len;
  const Vec3 rel = x - ref.axis_start;
  const double s = rel.dot(e);
  return {(rel - s * e).norm(), s / len};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error while writing " + path.string());
}

inline Json error_json(const ErrorReport& e) {
  return {{"samples", e.samples},
          {"l_inf_m_per_s", e.l_inf},
          {"l_2_m_per_s", e.l_2},
          {"l_inf_component_m_per_s", e.l_inf_component},
          {"l_2_component_m_per_s", e.l_2_component}};
}

}  // namespace detail

/// Exact Poiseuille error over active nodes strictly inside the tube.
inline ErrorReport poiseuille_error(const EulerianGrid& g, const VectorField& u, const PoiseuilleReference& ref,
                                    double mu) {
  const Vec3 e = (ref.axis_end - ref.axis_start).normalized();
  std::vector<Vec3> num, ex;
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    const auto [r, s] = detail::axis_coordinates(ref, g.position(a));
    if (!(r < ref.radius) || s < -1e-12 || s > 1.0 + 1e-12) continue;
    num.push_back(u.at(a));
    ex.push_back(poiseuille_exact(r, ref.radius, mu, ref.dpdz) * e);
  }
  if (num.empty()) throw ConfigError("exact solution: no active nodes inside the reference tube");
  return error_norms(num, ex);
}

inline Json run_summary_json(const RunResult& r) {
  Json j;
  j["name"] = r.config.name;
  j["version"] = kVersion;
  j["steps"] = r.steps;
  j["time_s"] = r.time;
  j["steady"] = r.steady;
  j["final_monitor"] = r.final_monitor;
  j["full_active_nodes"] = r.full_active_nodes;
  j["active_nodes"] = r.active_nodes;
  j["inside_fraction_before"] = r.inside_fraction_before;
  j["inside_fraction_after"] = r.inside_fraction_after;
  j["lagrangian_points"] = r.lagrangian_points;
  j["dropped_points"] = r.dropped_points;
  j["spacing_ratio_h_over_sqrt_ds"] = r.spacing_ratio;
  j["max_enforcement_corrected_m_per_s"] = r.max_enforcement_corrected;
  j["worst_divergence_ratio"] = r.worst_div_ratio;
  j["peak_velocity_m_per_s"] = r.peak_velocity;
  if (r.error) j["error"] = detail::error_json(*r.error);
  if (r.wss)
    j["wss"] = {{"points", r.wss->points},
                {"mid_points", r.wss->mid_points},
                {"mid_mean_pa", r.wss->mid_mean},
                {"mid_min_pa", r.wss->mid_min},
                {"mid_max_pa", r.wss->mid_max},
                {"max_normal_ratio", r.wss->max_normal_ratio}};
  if (r.dcpse_monomial_error) j["dcpse_monomial_error"] = *r.dcpse_monomial_error;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

/// build -> crop -> resample -> couple -> time loop -> postprocess.
inline RunResult run_case(const CaseConfig& cfg, const RunOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto log = opt.log ? opt.log : detail::quiet_logger();
  const auto& dir = opt.output_dir;
  const bool files = !dir.empty();
  if (files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    detail::write_text(dir / "resolved_config.json", serialize_config(cfg));
    detail::write_text(dir / "version.txt", std::string("ibflow ") + kVersion + "\n");
  }

  RunResult res;
  res.config = cfg;
  const double h = cfg.grid.h;

  // Grid and surface.
  EulerianGrid grid = EulerianGrid::build(cfg.grid.box, h, GridChecks{cfg.grid.kernel_halo_check});
  res.full_active_nodes = grid.active_count();
  log->info("grid {}x{}x{} nodes, h = {} m", grid.dims()[0], grid.dims()[1], grid.dims()[2], h);

  std::optional<TriangleSurface> surface;
  if (cfg.surface.preset != SurfacePreset::None) {
    surface = detail::build_surface(cfg.surface);
    if (cfg.grid.crop) {
      const auto crop = crop_active_region(grid, *surface, cfg.grid.crop_band_cells * h);
      res.inside_fraction_before = crop.inside_fraction_before;
      res.inside_fraction_after = crop.inside_fraction_after;
      grid = crop.grid;
      log->info("cropped to {} of {} nodes; inside fraction {:.4f} -> {:.4f}", grid.active_count(),
                res.full_active_nodes, res.inside_fraction_before, res.inside_fraction_after);
    }
  } else if (cfg.grid.crop) {
    throw ConfigError("grid.crop needs a surface");
  }
  res.active_nodes = grid.active_count();

  // Lagrangian cloud. Points whose kernel support would leave the box are dropped.
  LagrangianCloud cloud;
  if (surface && cfg.solver.ib_enabled) {
    ResampleOptions ro;
    ro.seed = cfg.surface.seed;
    ro.groups = cfg.surface.groups;
    const auto all = resample_uniform(*surface, cfg.surface.target_ds, ro);
    const Vec3 lo = cfg.grid.box.min_corner.array() + h, hi = cfg.grid.box.max_corner.array() - h;
    cloud = all.filtered([&](std::size_t i) {
      const Vec3& x = all.points[i];
      return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    });
    res.dropped_points = all.size() - cloud.size();
    res.lagrangian_points = cloud.size();
    double mean_area = 0.0;
    for (double a : cloud.areas) mean_area += a;
    mean_area /= static_cast<double>(std::max<std::size_t>(1, cloud.size()));
    res.spacing_ratio = h / std::sqrt(mean_area);
    if (res.spacing_ratio < 0.1 || res.spacing_ratio > 2.5)
      log->warn("h / sqrt(dS) = {:.3f} lies outside [0.1, 2.5]", res.spacing_ratio);
    log->info("{} Lagrangian points ({} dropped near the box faces), h / sqrt(dS) = {:.3f}", cloud.size(),
              res.dropped_points, res.spacing_ratio);
    if (files) write_cloud_csv(cloud, dir / "lagrangian_points.csv");

    // Kernel closure: where the surface normal runs along a lattice diagonal the
    // 4x4x4 support reaches 2 sqrt(3) h from the wall, past a 3h crop band.
    if (cfg.grid.crop) {
      auto mask = grid.mask();
      std::size_t added = 0;
      for (const auto& x : cloud.points) {
        const Vec3 sc = (x - grid.box().min_corner) / h;
        std::array<int, 3> base{};
        for (int a = 0; a < 3; ++a) base[a] = static_cast<int>(std::floor(sc[a])) - 1;
        for (int qk = 0; qk < 4; ++qk)
          for (int qj = 0; qj < 4; ++qj)
            for (int qi = 0; qi < 4; ++qi) {
              const std::array<int, 3> idx{base[0] + qi, base[1] + qj, base[2] + qk};
              bool inside = true, support = true;
              for (int a = 0; a < 3; ++a) {
                inside = inside && idx[a] >= 0 && idx[a] < grid.dims()[static_cast<std::size_t>(a)];
                support = support && delta_1d(sc[a] - idx[a]) != 0.0;
              }
              if (!inside || !support) continue;
              auto& m = mask[grid.lattice_index(idx[0], idx[1], idx[2])];
              if (!m) {
                m = 1;
                ++added;
              }
            }
      }
      if (added > 0) {
        grid = grid.with_mask(mask);
        res.active_nodes = grid.active_count();
        log->info("activated {} more nodes to cover the kernel support", added);
      }
    }
  }

  // Solver.
  BoundaryConditionSet bc{cfg.boundaries};
  IpcsSolver solver(grid, bc, cfg.fluid, cfg.time.dt, cfg.solver);
  solver.attach_boundary(cloud);
  if (solver.ib().enabled()) log->info("force matrix factored, reciprocal condition {:.3e}", solver.ib().rcond());

  // Time loop.
  std::ofstream run_log;
  if (files) {
    run_log.open(dir / "run_log.csv");
    if (!run_log) throw IoError("cannot write " + (dir / "run_log.csv").string());
    run_log.precision(10);
    run_log << "step,time_s,monitor_x,monitor_y,monitor_z,enforcement_corrected,enforcement_projected,div_star,"
               "div_next,div_ratio,momentum_iterations,poisson_iterations\n";
  }
  log->info("steady monitor: normalized change with N^2 ({}); a component whose previous field is constant "
            "reports 0, so steady state is only declared from step 2 on",
            cfg.solver.monitor == MonitorMode::Verbatim ? "verbatim" : "rms variant, N");
  const long n_steps =
      std::min(cfg.time.max_steps, static_cast<long>(std::ceil(cfg.time.t_end / cfg.time.dt - 1e-9)));
  auto write_fields = [&](const std::string& tag) {
    LatticeFields f;
    f.vectors["velocity"] = solver.state().u_n;
    f.vectors["force"] = solver.state().f_body;
    f.scalars["pressure"] = solver.state().p_n;
    write_vtk_structured_points(dir / ("fields_" + tag + ".vtk"), grid, f);
  };
  for (long n = 1; n <= n_steps; ++n) {
    const StepRecord rec = solver.advance();
    res.max_enforcement_corrected = std::max(res.max_enforcement_corrected, rec.enforcement_corrected);
    const double ratio = rec.div_star > 0.0 ? rec.div_next / rec.div_star : 0.0;
    if (n > 1) res.worst_div_ratio = std::max(res.worst_div_ratio, ratio);
    res.final_monitor = rec.monitor;
    res.steps = rec.step;
    res.time = rec.time;
    if (opt.on_step) opt.on_step(rec);
    if (files) {
      run_log << rec.step << ',' << rec.time << ',' << rec.monitor[0] << ',' << rec.monitor[1] << ','
              << rec.monitor[2] << ',' << rec.enforcement_corrected << ',' << rec.enforcement_projected << ','
              << rec.div_star << ',' << rec.div_next << ',' << ratio << ',' << rec.momentum_iterations << ','
              << rec.poisson_iterations << '\n';
      if (cfg.output.write_fields && cfg.output.field_cadence_steps > 0 && n % cfg.output.field_cadence_steps == 0)
        write_fields("step" + std::to_string(n));
    }
    const double mon = std::max({rec.monitor[0], rec.monitor[1], rec.monitor[2]});
    if (cfg.output.log_cadence_steps > 0 && n % cfg.output.log_cadence_steps == 0)
      log->info("step {} t = {:.4f} s monitor {:.3e} enforcement {:.2e} div ratio {:.2e}", n, rec.time, mon,
                rec.enforcement_corrected, ratio);
    if (!std::isfinite(mon)) throw NumericalError("solution diverged at step " + std::to_string(n));
    if (cfg.time.stop_when_steady && n >= 2 && mon < cfg.time.steady_tolerance) {
      res.steady = true;
      log->info("steady state at step {} (monitor {:.3e} < {:.1e})", n, mon, cfg.time.steady_tolerance);
      break;
    }
  }
  if (cfg.time.stop_when_steady && !res.steady)
    log->warn("steady tolerance {:.1e} not reached after {} steps", cfg.time.steady_tolerance, res.steps);

  res.u = solver.state().u_n;
  res.p = solver.state().p_n;
  res.grid = grid;

  // Postprocessing.
  std::optional<Vec3> axis;
  if (cfg.exact) axis = (cfg.exact->axis_end - cfg.exact->axis_start).normalized();
  for (std::size_t a = 0; a < grid.active_count(); ++a)
    res.peak_velocity = std::max(res.peak_velocity, axis ? res.u.at(a).dot(*axis) : res.u.at(a).norm());
  if (cfg.exact) {
    res.error = poiseuille_error(grid, res.u, *cfg.exact, cfg.fluid.mu);
    log->info("error vs exact: L_inf = {:.4e} m/s, L_2 = {:.4e} m/s over {} nodes", res.error->l_inf,
              res.error->l_2, res.error->samples);
    if (files) {
      Json j = detail::error_json(*res.error);
      j["h_m"] = h;
      j["u_max_exact_m_per_s"] = poiseuille_exact(0.0, cfg.exact->radius, cfg.fluid.mu, cfg.exact->dpdz);
      j["peak_velocity_m_per_s"] = res.peak_velocity;
      detail::write_text(dir / "error_report.json", j.dump(2) + "\n");
    }
  }

  if (cfg.wss.enabled && cloud.size() > 0) {
    std::vector<double> offsets;
    for (double c : cfg.wss.collar_offsets_cells) offsets.push_back(c * h);
    if (offsets.empty()) throw ConfigError("wss.collar_offsets_cells must not be empty");
    const auto pts = collar_points(cloud.points, cloud.normals, offsets);
    // Collar-only fits scale the window with the collar depth so every layer contributes.
    DcpseStencil stencil;
    double h_fit = h;
    if (!cfg.wss.anchor_surface_value) {
      stencil = {cloud.size(), true};
      h_fit = 0.5 * *std::max_element(offsets.begin(), offsets.end());
    }
    const auto ops = build_dcpse(pts, cloud.size(), h_fit, 2, stencil);
    // Surface velocities from the kernel interpolation, collar velocities trilinear.
    std::vector<Vec3> us = interpolate(build_coupling(grid, cloud), res.u);
    for (std::size_t i = cloud.size(); i < pts.size(); ++i) {
      Vec3 v;
      for (int a = 0; a < 3; ++a) v[a] = sample_trilinear(grid, res.u[a], pts[i]);
      if (!v.allFinite()) throw NumericalError("WSS collar point " + std::to_string(i) + " lies outside the active grid");
      us.push_back(v);
    }
    const auto w = wall_shear_stress(ops, us, cloud.normals, cfg.fluid.mu);
    WssSummary sum;
    sum.points = w.magnitude.size();
    sum.mid_min = std::numeric_limits<double>::infinity();
    sum.mid_max = 0.0;
    for (std::size_t i = 0; i < w.magnitude.size(); ++i) {
      const double tn = w.traction[i].norm();
      if (tn > 0) sum.max_normal_ratio = std::max(sum.max_normal_ratio, std::abs(w.shear[i].dot(cloud.normals[i].normalized())) / tn);
      bool mid = true;
      if (cfg.exact) {
        const double s = detail::axis_coordinates(*cfg.exact, cloud.points[i]).second;
        mid = std::abs(s - 0.5) <= 0.5 * cfg.wss.mid_fraction;
      }
      if (!mid) continue;
      ++sum.mid_points;
      sum.mid_mean += w.magnitude[i];
      sum.mid_min = std::min(sum.mid_min, w.magnitude[i]);
      sum.mid_max = std::max(sum.mid_max, w.magnitude[i]);
    }
    if (sum.mid_points) sum.mid_mean /= static_cast<double>(sum.mid_points);
    res.wss = sum;
    const Vec3 center = 0.5 * (surface->bbox_min() + surface->bbox_max());
    const double scale = 0.5 * (surface->bbox_max() - surface->bbox_min()).maxCoeff();
    res.dcpse_monomial_error = dcpse_monomial_error(ops, pts, center, scale);
    log->info("WSS mean over the middle {:.0f}% = {:.5f} Pa ({} points); DC-PSE monomial error {:.2e}",
              100 * cfg.wss.mid_fraction, sum.mid_mean, sum.mid_points, *res.dcpse_monomial_error);
    if (files) write_vtk_polydata(dir / "surface_wss.vtk", cloud.points, {{"wss_magnitude", w.magnitude}},
                                  {{"wss", w.shear}, {"traction", w.traction}, {"normal", cloud.normals}});
  }

  if (files) {
    if (cfg.output.write_fields) write_fields("final");
    for (const auto& line : cfg.output.probes)
      write_probe_csv(dir / ("probe_" + line.name + ".csv"), grid, res.u, res.p, line);
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (files) detail::write_text(dir / "summary.json", run_summary_json(res).dump(2) + "\n");
  log->info("finished {} steps in {:.1f} s", res.steps, res.wall_seconds);
  return res;
}

// ---------------------------------------------------------------------------
// Convergence study

struct StudyRow {
  double h = 0.0;
  ErrorReport error;
  long steps = 0;
  bool steady = false;
};

struct StudyReport {
  std::vector<StudyRow> rows;           // sorted coarse to fine
  std::vector<double> order_l_inf;      // between consecutive rows
  std::vector<double> order_l_2;
};

/// Runs the case at each resolution; the Lagrangian spacing keeps its ratio to h.
inline StudyReport convergence_study(const CaseConfig& base, std::vector<double> resolutions,
                                     const RunOptions& opt = {}) {
  if (!base.exact) throw ConfigError("convergence study needs an exact solution (exact)");
  if (resolutions.empty()) throw ConfigError("convergence study needs at least one resolution");
  std::sort(resolutions.begin(), resolutions.end(), std::greater<>());
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    detail::require_positive(resolutions[i], "resolution");
    if (i > 0 && std::abs(resolutions[i] - resolutions[i - 1]) <= 1e-12 * resolutions[i])
      throw ConfigError("resolution " + std::to_string(resolutions[i]) + " m is listed twice");
  }
  const double ds_ratio = base.surface.target_ds / base.grid.h;
  StudyReport rep;
  for (double h : resolutions) {
    CaseConfig c = base;
    c.grid.h = h;
    c.surface.target_ds = ds_ratio * h;
    std::ostringstream tag;
    tag << "h_" << h;
    c.name = base.name + "_" + tag.str();
    RunOptions o = opt;
    if (!opt.output_dir.empty()) o.output_dir = opt.output_dir / tag.str();
    const auto r = run_case(c, o);
    rep.rows.push_back({h, *r.error, r.steps, r.steady});
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    rep.order_l_inf.push_back(observed_order(a.error.l_inf, b.error.l_inf, a.h, b.h));
    rep.order_l_2.push_back(observed_order(a.error.l_2, b.error.l_2, a.h, b.h));
  }
  if (!opt.output_dir.empty()) {
    Json j;
    j["rows"] = Json::array();
    for (const auto& r : rep.rows) {
      Json row = detail::error_json(r.error);
      row["h_m"] = r.h;
      row["steps"] = r.steps;
      row["steady"] = r.steady;
      j["rows"].push_back(row);
    }
    j["order_l_inf"] = rep.order_l_inf;
    j["order_l_2"] = rep.order_l_2;
    detail::write_text(opt.output_dir / "study_report.json", j.dump(2) + "\n");
  }
  return rep;
}

}  // namespace ibflow
