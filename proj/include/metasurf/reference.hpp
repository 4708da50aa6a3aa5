#ifndef METASURF_REFERENCE_HPP
#define METASURF_REFERENCE_HPP

#include <memory>
#include <optional>
#include <vector>

#include "metasurf/macro.hpp"
#include "metasurf/materials.hpp"

namespace metasurf {

// Full un-homogenized solution on the explicit cell array, used as the
// verification oracle for the homogenized pipeline.
struct ReferenceSolution {
  std::shared_ptr<const TriMesh> mesh;
  std::shared_ptr<const fem::FunctionSpace> space;  // P2 over the whole domain
  std::vector<Complex> p;                           // DOF vector
  double residual = 0.0;
};

// Replaces the transmission layer by n_cells scaled copies of the unit-cell
// mesh (stitched node-exactly through the periodic pairing) and attaches
// graded outer domains whose seam rows coincide with the cell boundary nodes.
// The outer tags follow the macro template of cfg.
TriMesh build_array_geometry(const TriMesh& cell_mesh, int n_cells,
                             const MacroConfig& cfg);

ReferenceSolution solve_reference(const TriMesh& full_mesh, const MaterialPair& materials,
                                  const MacroConfig& cfg);

// Pointwise comparison fields e+/- on the macro mesh nodes: half-domain
// points are shifted by +-eps0/2 to their reference counterparts (the
// homogenized model collapses the layer onto the interface line).
struct ErrorField {
  std::vector<double> e_plus;   // nodal, zero outside the incident half
  std::vector<double> e_minus;  // nodal, zero outside the transmitted half
  double max_e_plus = 0.0;
  double max_e_minus = 0.0;
};

ErrorField error_field(const MacroSolution& macro_sol, const ReferenceSolution& ref,
                       const MacroConfig& cfg);

// Time-averaged sound intensity per triangle, evaluated at the centroid:
// I = Re(p conj(u))/2 with u = -grad(p)/(i omega rho0).
std::vector<Vec2> intensity(const ReferenceSolution& ref, double rho0, double omega);

double reference_boundary_norm2(const ReferenceSolution& ref, BoundaryTag tag);
double reference_boundary_flux(const ReferenceSolution& ref, BoundaryTag tag,
                               const MacroConfig& cfg);

struct SweepRow {
  double k0 = 0.0;
  double freq_hz = 0.0;
  double h_hom = 0.0;   // NaN on a failed solve
  double h_ref = 0.0;
  double rel_err = 0.0;
};

// integral of |field|^2 along the configured measurement segment of a
// solution (homogenized transmitted half or reference field; the reference
// y-coordinate is shifted by +eps0/2 to the matching physical point).
double measurement_norm2(const MacroSolution& sol, const MacroConfig& cfg);
double measurement_norm2(const ReferenceSolution& ref, const MacroConfig& cfg);

// Frequency response of the transmitted boundary norm for the homogenized
// pipeline vs the reference; rows ordered by k0. The measurement boundary is
// the outlet. jobs > 1 dispatches frequencies across threads (results are
// ordered, so parallel and serial sweeps produce identical tables).
std::vector<SweepRow> frequency_sweep(const TriMesh& cell_mesh,
                                      const MaterialPair& materials,
                                      const MacroConfig& cfg, double k0_begin,
                                      double k0_end, double step, int jobs = 1);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace metasurf

#endif
