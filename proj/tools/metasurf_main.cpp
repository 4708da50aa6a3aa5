#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "metasurf/config.hpp"
#include "metasurf/reference.hpp"
#include "metasurf/vtk_io.hpp"

namespace {

using namespace metasurf;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitNotConverged = 4;

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return cfg.output_dir + "/" + name;
}

void write_coeff_csv(const std::string& path, int iteration,
                     const HomogenizedCoeffs& c, bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::out);
  if (!os) throw std::runtime_error("cannot open '" + path + "'");
  if (!append) os << "iteration,A11,B1,Kinv,F\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", iteration, c.A11,
                c.B1, c.Kinv, c.F);
  os << buf;
}

std::pair<CellSolution, HomogenizedCoeffs> run_cell_pipeline(const RunConfig& cfg) {
  auto base = std::make_shared<const TriMesh>(
      generate_cell_mesh(cfg.cell_nx, cfg.cell_ny, cfg.ndd_height));
  const LevelSet phi = cfg.make_levelset(base);
  ConformOptions opts;
  opts.snap_fraction = cfg.snap_fraction;
  const ConformResult conform = conform_to_levelset(*base, phi.phi, opts);
  CellSolution cell = solve_cell_problems(conform.mesh, cfg.materials);
  const HomogenizedCoeffs coeffs = homogenized_coefficients(cell, cfg.materials);
  return {std::move(cell), coeffs};
}

int cmd_homogenize(const RunConfig& cfg) {
  auto [cell, coeffs] = run_cell_pipeline(cfg);
  write_coeff_csv(out_path(cfg, "coefficients.csv"), 0, coeffs, false);
  VtkFile vtk(*cell.mesh);
  vtk.add_point_field("eta", cell.eta_nodal());
  vtk.add_point_field("xi", cell.xi_nodal());
  vtk.write(out_path(cfg, "cell.vtk"));
  write_manifest(cfg, out_path(cfg, "manifest.ini"));
  std::printf("A11 = %.6g\nB1 = %.6g\nKinv = %.6g\nF = %.6g\n", coeffs.A11, coeffs.B1,
              coeffs.Kinv, coeffs.F);
  return kExitOk;
}

int cmd_macro_solve(const RunConfig& cfg, const std::vector<double>& coeff_override) {
  HomogenizedCoeffs coeffs;
  if (!coeff_override.empty()) {
    coeffs = {coeff_override[0], coeff_override[1], coeff_override[2],
              coeff_override[3]};
  } else {
    coeffs = run_cell_pipeline(cfg).second;
  }
  const MacroConfig mc = cfg.macro_config();
  const MacroSpaces spaces = build_macro_spaces(mc);
  const MacroSolution sol = solve_macro(spaces, coeffs, mc);
  export_macro_vtk(sol, out_path(cfg, "field.vtk"));

  std::ofstream os(out_path(cfg, "flux.csv"));
  os << "quantity,value\n";
  char buf[128];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g\n", name, v);
    os << buf;
  };
  row("flux_inlet_w_per_m", boundary_energy_flux(sol, BoundaryTag::Inlet, mc));
  row("flux_outlet1_w_per_m", boundary_energy_flux(sol, BoundaryTag::Outlet1, mc));
  row("norm2_outlet1_pa2_m",
      boundary_norm2(*sol.spaces.P_minus, sol.P_minus, BoundaryTag::Outlet1));
  if (mc.geometry == MacroGeometry::Design) {
    row("flux_outlet2_w_per_m", boundary_energy_flux(sol, BoundaryTag::Outlet2, mc));
    row("norm2_outlet2_pa2_m",
        boundary_norm2(*sol.spaces.P_minus, sol.P_minus, BoundaryTag::Outlet2));
  }
  row("residual", sol.residual);
  write_manifest(cfg, out_path(cfg, "manifest.ini"));
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg) {
  auto base = std::make_shared<const TriMesh>(
      generate_cell_mesh(cfg.cell_nx, cfg.cell_ny, cfg.ndd_height));
  const LevelSet phi = cfg.make_levelset(base);
  ConformOptions opts;
  opts.snap_fraction = cfg.snap_fraction;
  const ConformResult conform = conform_to_levelset(*base, phi.phi, opts);
  const auto rows = frequency_sweep(conform.mesh, cfg.materials, cfg.macro_config(),
                                    cfg.sweep_k0_min_per_m, cfg.sweep_k0_max_per_m,
                                    cfg.sweep_k0_step_per_m, cfg.sweep_jobs);
  write_sweep_csv(rows, out_path(cfg, "sweep.csv"));
  write_manifest(cfg, out_path(cfg, "manifest.ini"));
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg, bool strict) {
  OptimizerConfig oc = cfg.optimizer_config();
  oc.output_dir = cfg.output_dir;
  std::filesystem::create_directories(cfg.output_dir);
  write_manifest(cfg, out_path(cfg, "manifest.ini"));
  const OptimizerResult res = run_optimizer(oc);
  const auto& last = res.state.history.back();
  std::printf("iterations = %zu\nconverged = %s\nJ = %.6g (J1 = %.6g, J2 = %.6g)\n"
              "B1 = %.6g\n",
              res.state.history.size(), res.state.converged ? "true" : "false",
              last.J, last.J1, last.J2, res.final_coeffs.B1);
  if (strict && !res.state.converged) return kExitNotConverged;
  return kExitOk;
}

int cmd_td_check(const RunConfig& cfg) {
  TdCheckConfig tc;
  tc.materials = cfg.materials;
  tc.macro = cfg.macro_config();
  tc.objective = cfg.objective_spec();
  tc.cell_nx = cfg.cell_nx;
  tc.cell_ny = cfg.cell_ny;
  tc.ndd_height = cfg.ndd_height;
  const Vec2 center{cfg.circle_center_x, cfg.circle_center_y};
  const double radius = cfg.circle_radius_cell;
  tc.base_profile = [center, radius](const Vec2& p) {
    return (radius - (p - center).norm()) / radius;
  };
  tc.probes = cfg.td_probe_points();
  tc.eps_coarse = cfg.td_eps_coarse_cell;
  tc.eps_fine = cfg.td_eps_fine_cell;

  const auto results = td_perturbation_check(tc);
  std::ofstream os(out_path(cfg, "td_check.csv"));
  os << "probe_x,probe_y,dT,fd_coarse,fd_fine,rel_err_coarse,rel_err_fine\n";
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.probe.x, r.probe.y, r.dT, r.fd_coarse, r.fd_fine, r.rel_err_coarse,
                  r.rel_err_fine);
    os << buf;
    std::printf("probe (%.3f, %.3f): dT = %.6g, fd = %.6g / %.6g, rel err = %.3f / %.3f\n",
                r.probe.x, r.probe.y, r.dT, r.fd_coarse, r.fd_fine, r.rel_err_coarse,
                r.rel_err_fine);
  }
  write_manifest(cfg, out_path(cfg, "manifest.ini"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic metasurface homogenization and unit-cell optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir_override;
  std::vector<double> coeff_override;
  bool strict = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "configuration file (INI)");
    cmd->add_option("-o,--output", output_dir_override, "output directory override");
  };

  CLI::App* homogenize = app.add_subcommand(
      "homogenize", "solve the cell problems and report the four coefficients");
  add_common(homogenize);
  CLI::App* macro_solve =
      app.add_subcommand("macro-solve", "solve the coupled interface problem");
  add_common(macro_solve);
  macro_solve->add_option("--coeffs", coeff_override,
                          "A11 B1 Kinv F (skip the cell solve)")
      ->expected(4);
  CLI::App* sweep = app.add_subcommand(
      "sweep", "frequency sweep of the homogenized vs reference transmission");
  add_common(sweep);
  CLI::App* optimize =
      app.add_subcommand("optimize", "run the unit-cell optimization loop");
  add_common(optimize);
  optimize->add_flag("--strict", strict, "exit 4 when the cap is hit unconverged");
  CLI::App* td_check = app.add_subcommand(
      "td-check", "compare the topological derivative against disk insertions");
  add_common(td_check);

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (!output_dir_override.empty()) cfg.output_dir = output_dir_override;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }

  try {
    if (homogenize->parsed()) return cmd_homogenize(cfg);
    if (macro_solve->parsed()) return cmd_macro_solve(cfg, coeff_override);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (optimize->parsed()) return cmd_optimize(cfg, strict);
    if (td_check->parsed()) return cmd_td_check(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
