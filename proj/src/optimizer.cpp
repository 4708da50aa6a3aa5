#include "metasurf/optimizer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "metasurf/vtk_io.hpp"

namespace metasurf {

namespace {

std::string snapshot_name(const std::string& dir, const char* stem, int iter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06d.vtk", stem, iter);
  return dir + "/" + buf;
}

double moving_average(const std::vector<IterationRecord>& history) {
  // 10-sample window of |dJ/J| over consecutive iterations; defined once 11
  // records exist.
  if (history.size() < 11) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  const size_t n = history.size();
  for (size_t i = n - 10; i < n; ++i) {
    const double denom = std::abs(history[i].J);
    const double dj = std::abs(history[i].J - history[i - 1].J);
    acc += denom > 0.0 ? dj / denom : std::numeric_limits<double>::infinity();
  }
  return acc / 10.0;
}

}  // namespace

void write_history_csv(const std::vector<IterationRecord>& history,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "'");
  os << "iter,J,J1,J2,A11,B1,Kinv,F,moving_avg\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.J,
                  r.J1, r.J2, r.coeffs.A11, r.coeffs.B1, r.coeffs.Kinv, r.coeffs.F,
                  r.moving_avg);
    os << buf;
  }
}

OptimizerResult run_optimizer(const OptimizerConfig& cfg) {
  if (cfg.max_iterations < 1)
    throw std::invalid_argument("optimizer: need at least one iteration");
  cfg.levelset.validate();
  cfg.macro.validate();
  cfg.materials.validate();

  const bool save = !cfg.output_dir.empty();
  if (save) std::filesystem::create_directories(cfg.output_dir);

  auto base_mesh = std::make_shared<const TriMesh>(
      generate_cell_mesh(cfg.cell_nx, cfg.cell_ny, cfg.ndd_height));

  OptimizerResult result;
  OptimizerState& state = result.state;
  state.phi = cfg.init_phi_file.empty()
                  ? initialize_circle(base_mesh, cfg.init_center, cfg.init_radius)
                  : load_levelset(base_mesh, cfg.init_phi_file);

  const LevelSetUpdater updater(base_mesh, cfg.levelset);
  const MacroSpaces spaces = build_macro_spaces(cfg.macro);
  ObjectiveSpec objective = cfg.objective;

  auto run_stage = [&](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      if (save) write_history_csv(state.history, cfg.output_dir + "/history.csv");
      throw StageError(state.iteration, stage, e.what());
    }
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    state.iteration = it;

    ConformResult conform = run_stage("remesh", [&] {
      return conform_to_levelset(*base_mesh, state.phi.phi, cfg.conform);
    });
    CellSolution cell = run_stage("cell_solve", [&] {
      return solve_cell_problems(conform.mesh, cfg.materials);
    });
    HomogenizedCoeffs coeffs = run_stage("coefficients", [&] {
      return homogenized_coefficients(cell, cfg.materials);
    });
    MacroSolution macro_sol = run_stage("macro_solve", [&] {
      return solve_macro(spaces, coeffs, cfg.macro);
    });
    if (it == 0)
      run_stage("normalizers", [&] {
        capture_normalizers(objective, macro_sol);
        return 0;
      });
    const ObjectiveValue J = run_stage("objective", [&] {
      return evaluate_objective(macro_sol, objective);
    });

    IterationRecord rec;
    rec.iter = it;
    rec.J = J.J;
    rec.J1 = J.J1;
    rec.J2 = J.J2;
    rec.coeffs = coeffs;
    state.history.push_back(rec);
    state.history.back().moving_avg = moving_average(state.history);

    if (save) {
      write_history_csv(state.history, cfg.output_dir + "/history.csv");
      if (cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0) {
        save_levelset(state.phi, snapshot_name(cfg.output_dir, "phi", it));
        write_mesh_vtk(conform.mesh, snapshot_name(cfg.output_dir, "design", it));
      }
    }

    result.final_conform = conform;
    result.final_coeffs = coeffs;

    const double avg = state.history.back().moving_avg;
    if (it >= cfg.conv_activation && std::isfinite(avg) && avg < cfg.conv_threshold) {
      state.converged = true;
      break;
    }
    if (it == cfg.max_iterations - 1) break;  // cap reached, skip the update

    AdjointSolution adj = run_stage("adjoint_solve", [&] {
      return solve_macro_adjoint(macro_sol, coeffs, cfg.macro, objective);
    });
    Multipliers mult = run_stage("multipliers", [&] {
      return lagrange_multipliers(macro_sol, adj, cfg.macro);
    });
    SensitivityField sens = run_stage("sensitivity", [&] {
      return evaluate_sensitivity(cell, conform.phi, mult, cfg.materials, state.phi);
    });
    if (save && cfg.debug_fields) {
      VtkFile vtk(conform.mesh);
      vtk.add_point_field("dT_air_to_elastic", sens.dT_air_to_elastic);
      vtk.add_point_field("dT_elastic_to_air", sens.dT_elastic_to_air);
      vtk.write(snapshot_name(cfg.output_dir, "sensitivity", it));
    }
    run_stage("levelset_update", [&] {
      updater.step(state.phi, sens.jprime);
      return 0;
    });
  }

  if (save) {
    write_history_csv(state.history, cfg.output_dir + "/history.csv");
    save_levelset(state.phi, cfg.output_dir + "/phi_final.vtk");
    write_mesh_vtk(result.final_conform.mesh, cfg.output_dir + "/design_final.vtk");
  }
  return result;
}

namespace {

// Objective value of one design (phi profile on a given base mesh) with
// frozen normalizers.
double pipeline_objective(const TriMesh& base_mesh, const LevelSet& phi,
                          const MaterialPair& materials, const MacroSpaces& spaces,
                          const MacroConfig& macro, const ObjectiveSpec& objective,
                          const ConformOptions& conform_opts) {
  const ConformResult conform = conform_to_levelset(base_mesh, phi.phi, conform_opts);
  const CellSolution cell = solve_cell_problems(conform.mesh, materials);
  const HomogenizedCoeffs coeffs = homogenized_coefficients(cell, materials);
  const MacroSolution sol = solve_macro(spaces, coeffs, macro);
  return evaluate_objective(sol, objective).J;
}

}  // namespace

std::vector<TdProbeResult> td_perturbation_check(const TdCheckConfig& cfg) {
  constexpr double kPi = 3.14159265358979323846;
  if (!cfg.base_profile) throw std::invalid_argument("td check: missing base profile");
  const ConformOptions conform_opts;

  auto base_mesh = std::make_shared<const TriMesh>(
      generate_cell_mesh(cfg.cell_nx, cfg.cell_ny, cfg.ndd_height));
  const LevelSet phi0 = initialize_profile(base_mesh, cfg.base_profile);

  // Unperturbed pipeline: coefficients, objective normalizers, adjoint,
  // nodal topological derivative.
  const ConformResult conform = conform_to_levelset(*base_mesh, phi0.phi, conform_opts);
  const CellSolution cell = solve_cell_problems(conform.mesh, cfg.materials);
  const HomogenizedCoeffs coeffs = homogenized_coefficients(cell, cfg.materials);
  const MacroSpaces spaces = build_macro_spaces(cfg.macro);
  const MacroSolution state = solve_macro(spaces, coeffs, cfg.macro);
  ObjectiveSpec objective = cfg.objective;
  capture_normalizers(objective, state);
  const AdjointSolution adj = solve_macro_adjoint(state, coeffs, cfg.macro, objective);
  const Multipliers mult = lagrange_multipliers(state, adj, cfg.macro);
  const std::vector<double> dT = topological_derivative_field(
      cell, conform.phi, mult, cfg.materials, InsertionDirection::AirToElastic);

  std::vector<TdProbeResult> results;
  for (const Vec2& probe : cfg.probes) {
    // Snap to the nearest clearly-air design node of the base mesh.
    int node = -1;
    double best = 1e300;
    for (int n = 0; n < base_mesh->num_nodes(); ++n) {
      if (phi0.phi[n] > -0.1) continue;  // keep the disk inside the air phase
      const double d = (base_mesh->nodes[n] - probe).norm();
      if (d < best) {
        best = d;
        node = n;
      }
    }
    if (node < 0) throw std::runtime_error("td check: no air node near probe");
    const Vec2 y0 = base_mesh->nodes[node];

    TdProbeResult r;
    r.probe = y0;
    r.dT = dT[node];

    for (int pass = 0; pass < 2; ++pass) {
      const double eps = pass == 0 ? cfg.eps_coarse : cfg.eps_fine;
      // The disk's relative mesh resolution improves linearly with eps so
      // the O(eps) expansion remainder dominates the comparison, not the
      // fixed cut-discretization error.
      const double h_target = eps * eps / (3.0 * cfg.eps_coarse);
      const TriMesh refined = refine_around_disk(*base_mesh, y0, 4.0 * eps, h_target);
      auto refined_ptr = std::make_shared<const TriMesh>(refined);
      const LevelSet base_phi = initialize_profile(refined_ptr, cfg.base_profile);
      const LevelSet pert_phi =
          initialize_profile(refined_ptr, [&](const Vec2& p) {
            const double disk = (eps - (p - y0).norm()) / eps;
            return std::max(cfg.base_profile(p), disk);
          });
      const double J_base = pipeline_objective(refined, base_phi, cfg.materials,
                                               spaces, cfg.macro, objective,
                                               conform_opts);
      const double J_pert = pipeline_objective(refined, pert_phi, cfg.materials,
                                               spaces, cfg.macro, objective,
                                               conform_opts);
      const double fd = (J_pert - J_base) / (-kPi * eps * eps);
      const double rel = std::abs(fd - r.dT) / std::max(std::abs(r.dT), 1e-300);
      if (pass == 0) {
        r.fd_coarse = fd;
        r.rel_err_coarse = rel;
      } else {
        r.fd_fine = fd;
        r.rel_err_fine = rel;
      }
    }
    results.push_back(r);
  }
  return results;
}

BandAnalysis analyze_elastic_bands(const TriMesh& mesh) {
  // Union-find over elastic triangles connected by shared edges, with the
  // periodic seam closed by matching left/right boundary edges by height.
  std::vector<int> parent(mesh.num_triangles());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

  std::map<std::pair<int, int>, int> edge_owner;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region != Region::Elastic) continue;
    for (int k = 0; k < 3; ++k) {
      const auto ek = key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3]);
      auto [it, inserted] = edge_owner.try_emplace(ek, t);
      if (!inserted) unite(t, it->second);
    }
  }

  // Seam closure: elastic boundary edges at x=0 paired with x=1 by y-span.
  auto side_edges = [&](BoundaryTag tag) {
    std::vector<std::pair<double, int>> out;  // (y midpoint, triangle)
    for (const auto& be : mesh.boundary_edges) {
      if (be.tag != tag) continue;
      const auto ek = key(be.v[0], be.v[1]);
      auto it = edge_owner.find(ek);
      if (it == edge_owner.end()) continue;  // not an elastic triangle's edge
      out.emplace_back(0.5 * (mesh.nodes[be.v[0]].y + mesh.nodes[be.v[1]].y),
                       it->second);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto left = side_edges(BoundaryTag::PeriodicLeft);
  const auto right = side_edges(BoundaryTag::PeriodicRight);
  for (const auto& [yl, tl] : left)
    for (const auto& [yr, tr] : right)
      if (std::abs(yl - yr) < 1e-9) unite(tl, tr);

  BandAnalysis out;
  std::map<int, std::pair<double, double>> extent;  // root -> x range
  double elastic_area = 0.0, design_area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Region r = mesh.triangles[t].region;
    if (r == Region::Air || r == Region::Elastic) design_area += mesh.triangle_area(t);
    if (r != Region::Elastic) continue;
    elastic_area += mesh.triangle_area(t);
    const int root = find(t);
    auto& ext = extent.try_emplace(root, 1e300, -1e300).first->second;
    for (int k = 0; k < 3; ++k) {
      ext.first = std::min(ext.first, mesh.nodes[mesh.triangles[t].v[k]].x);
      ext.second = std::max(ext.second, mesh.nodes[mesh.triangles[t].v[k]].x);
    }
  }
  out.components = static_cast<int>(extent.size());
  for (const auto& [root, ext] : extent)
    if (ext.first < 1e-9 && ext.second > 1.0 - 1e-9) out.full_width_band = true;
  out.elastic_fraction = design_area > 0.0 ? elastic_area / design_area : 0.0;
  return out;
}

}  // namespace metasurf
