#ifndef METASURF_CONFIG_HPP
#define METASURF_CONFIG_HPP

#include <string>
#include <vector>

#include "metasurf/optimizer.hpp"

namespace metasurf {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat-sectioned strict key-value configuration. Every physical quantity
// carries its unit in the key name; unknown keys are errors; missing keys
// take the documented defaults. The resolved configuration (a valid config
// file again) is written next to every command's outputs as the run manifest.
struct RunConfig {
  // [materials]
  MaterialPair materials;

  // [cell]
  int cell_nx = 80;
  int cell_ny = 80;
  double ndd_height = 0.125;
  std::string inclusion = "circle";  // none | circle | parallelogram | file
  double circle_center_x = 0.5;
  double circle_center_y = 0.5;
  double circle_radius_cell = 0.3;
  double para_base_x = 0.22;
  double para_base_y = 0.22;
  double para_width_cell = 0.24;
  double para_height_cell = 0.56;
  double para_slant_cell = 0.5;
  std::string phi_file;

  // [macro]
  std::string geometry = "design";  // validation | design
  double eps0_m = 0.01;
  double rho0_kg_m3 = 1.2;
  double k0_pa = 1.42e5;
  double interface_length_m = 0.5;
  double depth_m = 0.4;
  double outlet_width_m = 0.2;
  double wall_width_m = 0.1;
  double validation_outlet_width_m = 0.0;
  double validation_outlet_offset_m = 0.3;
  double meas_offset_m = 0.02;
  double meas_x0_m = 0.0;
  double meas_x1_m = 0.5;
  bool outlet1_left = true;
  int macro_nx = 40;
  int macro_ny = 40;

  // [frequency]
  double k0_per_m = 25.0;
  double p_in_pa = 1.0;

  // [sweep]
  double sweep_k0_min_per_m = 5.0;
  double sweep_k0_max_per_m = 60.0;
  double sweep_k0_step_per_m = 1.0;
  int sweep_jobs = 1;

  // [objective]
  double weight = 0.5;
  std::string wiring = "case1";  // case1: suppress outlet2; case2: suppress outlet1

  // [levelset]
  double k_phi = 1.0;
  double tau = 5e-4;
  double dt = 0.5;
  double snap_fraction = 0.05;

  // [optimizer]
  int max_iterations = 400;
  double conv_threshold = 3e-4;
  int conv_activation = 200;
  int snapshot_every = 50;

  // [tdcheck]
  std::string td_probes = "0.20,0.30; 0.72,0.75; 0.84,0.45";
  double td_eps_coarse_cell = 0.01;
  double td_eps_fine_cell = 0.005;

  // [output]
  std::string output_dir = "out";
  bool debug_fields = false;

  // Derived assemblies.
  MacroConfig macro_config() const;
  ObjectiveSpec objective_spec() const;
  LevelSetParams levelset_params() const;
  OptimizerConfig optimizer_config() const;
  std::vector<Vec2> td_probe_points() const;
  // Level-set profile of the configured inclusion on a given mesh.
  LevelSet make_levelset(std::shared_ptr<const TriMesh> mesh) const;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");
void write_manifest(const RunConfig& cfg, const std::string& path);

}  // namespace metasurf

#endif
