// Command line front end: run a case, run a convergence study, inspect a
// surface file or dump a preset config.

#include "ibflow/config.hpp"
#include "ibflow/parallel.hpp"
#include "ibflow/runner.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ibflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

/// A config argument is either a file path or "preset:<name>".
CaseConfig resolve_config(const std::string& arg) {
  const std::string prefix = "preset:";
  if (arg.rfind(prefix, 0) == 0) return preset_config(arg.substr(prefix.size()));
  return load_config(arg);
}

fs::path output_dir_for(const std::string& flag, const CaseConfig& cfg) {
  if (!flag.empty()) return flag;
  return fs::path("out") / (cfg.name.empty() ? std::string("case") : cfg.name);
}

int run_command(const std::string& config, const std::string& out, std::shared_ptr<spdlog::logger> log) {
  const auto cfg = resolve_config(config);
  RunOptions opt;
  opt.output_dir = output_dir_for(out, cfg);
  opt.log = log;
  log->info("case {} -> {}", cfg.name, opt.output_dir.string());
  const auto r = run_case(cfg, opt);
  std::cout << run_summary_json(r).dump(2) << "\n";
  return kExitOk;
}

int study_command(const std::string& config, const std::vector<double>& resolutions, const std::string& out,
                  std::shared_ptr<spdlog::logger> log) {
  const auto cfg = resolve_config(config);
  RunOptions opt;
  opt.output_dir = output_dir_for(out, cfg);
  opt.log = log;
  const auto rep = convergence_study(cfg, resolutions, opt);
  std::printf("%-12s %-14s %-14s %-8s\n", "h_m", "l_inf_m_per_s", "l_2_m_per_s", "steps");
  for (const auto& row : rep.rows)
    std::printf("%-12.4e %-14.6e %-14.6e %-8ld\n", row.h, row.error.l_inf, row.error.l_2, row.steps);
  for (std::size_t i = 0; i < rep.order_l_inf.size(); ++i)
    std::printf("order %zu->%zu: l_inf %.3f, l_2 %.3f\n", i, i + 1, rep.order_l_inf[i], rep.order_l_2[i]);
  if (rep.order_l_inf.empty()) std::printf("single resolution: no observed order\n");
  return kExitOk;
}

int check_surface_command(const std::string& path, double target_ds) {
  const auto s = load_surface(path);
  const auto st = facet_stats(s);
  const Vec3 lo = s.bbox_min(), hi = s.bbox_max();
  std::printf("facets        %zu\n", s.facet_count());
  std::printf("vertices      %zu\n", s.vertices().size());
  std::printf("bbox_min_m    %.6g %.6g %.6g\n", lo.x(), lo.y(), lo.z());
  std::printf("bbox_max_m    %.6g %.6g %.6g\n", hi.x(), hi.y(), hi.z());
  std::printf("area_m2       %.6g\n", s.total_area());
  std::printf("volume_m3     %.6g\n", s.signed_volume());
  std::printf("edge_m        mean %.4g std %.4g min %.4g max %.4g\n", st.edge_mean, st.edge_std, st.edge_min,
              st.edge_max);
  std::printf("facet_area_m2 mean %.4g std %.4g\n", st.area_mean, st.area_std);
  if (target_ds > 0) {
    const auto cloud = resample_uniform(s, target_ds);
    std::printf("resampled     %zu points at target_ds %.4g m (mean spacing %.4g m)\n", cloud.size(), target_ds,
                mean_nearest_neighbor_spacing(cloud.points, target_ds));
  }
  std::printf("closed, manifold and outward oriented\n");
  return kExitOk;
}

int preset_command(const std::string& name, const std::string& out, const std::string& surface_out) {
  if (name.empty()) {
    for (const auto& n : preset_names()) std::cout << n << "\n";
    return kExitOk;
  }
  const std::string text = serialize_config(preset_config(name));
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out);
    f << text;
  }
  if (!surface_out.empty()) {
    const auto cfg = preset_config(name);
    if (cfg.surface.preset == SurfacePreset::None) throw ConfigError("preset " + name + " has no surface");
    write_stl_binary(detail::build_surface(cfg.surface), surface_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ibflow: immersed boundary incompressible flow solver"};
  app.set_version_flag("--version", std::string("ibflow ") + kVersion);
  app.require_subcommand(1);

  std::string output_dir, log_level = "info";
  int threads = 0;
  app.add_option("--output-dir", output_dir, "Directory for artifacts (default out/<case name>)");
  app.add_option("--threads", threads, "Worker threads (default IBFLOW_THREADS or 1)")->check(CLI::NonNegativeNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config;
  auto* run = app.add_subcommand("run", "Run one case");
  run->add_option("config", config, "Config file or preset:<name>")->required();

  std::vector<double> resolutions;
  auto* study = app.add_subcommand("study", "Run a case at several grid spacings and report observed orders");
  study->add_option("config", config, "Config file or preset:<name>")->required();
  study->add_option("--resolutions", resolutions, "Grid spacings in m")->required()->expected(1, -1);

  std::string surface_path;
  double target_ds = 0.0;
  auto* check = app.add_subcommand("check-surface", "Load and validate an STL or OBJ surface");
  check->add_option("surface", surface_path, "Surface file")->required();
  check->add_option("--target-ds", target_ds, "Also resample at this spacing in m");

  std::string preset_name, preset_out, preset_stl;
  auto* preset = app.add_subcommand("preset", "List presets, or print one as a config");
  preset->add_option("name", preset_name, "Preset name");
  preset->add_option("-o,--out", preset_out, "Write to a file instead of stdout");
  preset->add_option("--surface-out", preset_stl, "Also write the preset surface as binary STL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto log = spdlog::stderr_color_mt("ibflow");
  log->set_level(spdlog::level::from_str(log_level));
  if (threads > 0) set_thread_count(threads);

  try {
    if (*run) return run_command(config, output_dir, log);
    if (*study) return study_command(config, resolutions, output_dir, log);
    if (*check) return check_surface_command(surface_path, target_ds);
    if (*preset) return preset_command(preset_name, preset_out, preset_stl);
  } catch (const NumericalError& e) {
    log->error("numerical failure: {}", e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    log->error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log->error("unexpected error: {}", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
