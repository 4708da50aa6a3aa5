#ifndef METASURF_OPTIMIZER_HPP
#define METASURF_OPTIMIZER_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "metasurf/adjoint.hpp"
#include "metasurf/cell.hpp"
#include "metasurf/conform.hpp"
#include "metasurf/levelset.hpp"
#include "metasurf/objective.hpp"
#include "metasurf/sensitivity.hpp"

namespace metasurf {

struct OptimizerConfig {
  MaterialPair materials;
  MacroConfig macro;            // design template
  ObjectiveSpec objective;      // case wiring (normalizers captured at it 0)
  LevelSetParams levelset;
  ConformOptions conform;

  int cell_nx = 80;
  int cell_ny = 80;
  double ndd_height = 0.125;
  Vec2 init_center{0.5, 0.5};
  double init_radius = 0.3;
  std::string init_phi_file;  // overrides the circle when set

  int max_iterations = 400;
  double conv_threshold = 3e-4;
  int conv_activation = 200;  // moving-average criterion active after this

  int snapshot_every = 50;    // 0 disables
  std::string output_dir;     // empty disables file output
  bool debug_fields = false;  // per-iteration sensitivity exports
};

struct IterationRecord {
  int iter = 0;
  double J = 0.0, J1 = 0.0, J2 = 0.0;
  HomogenizedCoeffs coeffs;
  double moving_avg = std::numeric_limits<double>::quiet_NaN();
};

struct OptimizerState {
  int iteration = 0;
  std::vector<IterationRecord> history;
  LevelSet phi;
  bool converged = false;
};

struct OptimizerResult {
  OptimizerState state;
  ConformResult final_conform;
  HomogenizedCoeffs final_coeffs;
};

class StageError : public std::runtime_error {
 public:
  StageError(int iteration, const std::string& stage, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ", stage '" +
                           stage + "': " + what),
        iteration(iteration),
        stage(stage) {}
  int iteration;
  std::string stage;
};

OptimizerResult run_optimizer(const OptimizerConfig& cfg);

// Connectivity/aspect heuristic over the elastic phase of a conforming cell
// mesh (periodic wrap included): counts edge-connected elastic components and
// whether one of them spans the full periodic width.
struct BandAnalysis {
  int components = 0;
  bool full_width_band = false;
  double elastic_fraction = 0.0;
};
BandAnalysis analyze_elastic_bands(const TriMesh& conforming_mesh);

void write_history_csv(const std::vector<IterationRecord>& history,
                       const std::string& path);

// Brute-force validation of the topological derivative: an elastic disk of
// radius eps is inserted at each probe (snapped to an air node of the base
// design), the whole pipeline is re-solved on a locally refined mesh, and
// (J_pert - J)/(-pi eps^2) is compared against the nodal derivative.
struct TdCheckConfig {
  MaterialPair materials;
  MacroConfig macro;
  ObjectiveSpec objective;
  int cell_nx = 80;
  int cell_ny = 80;
  double ndd_height = 0.125;
  std::function<double(const Vec2&)> base_profile;  // analytic initial design
  std::vector<Vec2> probes;
  double eps_coarse = 0.01;
  double eps_fine = 0.005;
};

struct TdProbeResult {
  Vec2 probe;             // snapped node position
  double dT = 0.0;        // nodal topological derivative (air -> elastic)
  double fd_coarse = 0.0; // (J_pert - J)/(-pi eps^2) at eps_coarse
  double fd_fine = 0.0;
  double rel_err_coarse = 0.0;
  double rel_err_fine = 0.0;
};

std::vector<TdProbeResult> td_perturbation_check(const TdCheckConfig& cfg);

}  // namespace metasurf

#endif
