#ifndef METASURF_MACRO_HPP
#define METASURF_MACRO_HPP

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "metasurf/cell.hpp"
#include "metasurf/fem.hpp"
#include "metasurf/mesh.hpp"

namespace metasurf {

using Complex = std::complex<double>;

// Macroscale geometry template. The incident half-domain sits below the
// interface line (y in [-depth, 0], inlet at the bottom); the transmitted
// half-domain above (outlets on top). The design template splits the top
// boundary into two outlets separated by a rigid wall segment.
enum class MacroGeometry { Validation, Design };

struct MacroConfig {
  double k0 = 25.0;    // wavenumber [1/m]; omega = k0 * c0
  double P_in = 1.0;   // incident amplitude [Pa]
  double eps0 = 0.01;  // finite cell size [m]
  double rho0 = 1.2;   // background density [kg m^-3]
  double K0 = 1.42e5;  // background bulk modulus [Pa]

  MacroGeometry geometry = MacroGeometry::Design;
  double interface_length = 0.5;  // [m]
  double depth = 0.4;             // each half-domain [m]
  double outlet_width = 0.2;      // design template [m]
  double wall_width = 0.1;        // between the outlets [m]
  // true: outlet1 occupies the left end of the top boundary.
  bool outlet1_left = true;
  // Validation template: one outlet of this width starting at
  // validation_outlet_offset; width 0 opens the whole top boundary (plain
  // duct). A partial outlet turns the transmitted half into a leaky cavity,
  // which is what makes the homogenization error spike at resonances. The
  // default keeps the right outlet of the design template open.
  double validation_outlet_width = 0.0;
  double validation_outlet_offset = 0.3;
  // Transmission measurement line for frequency sweeps: a horizontal segment
  // at meas_offset above the interface (bound interface waves are evanescent,
  // so a near-field line registers the layer resonances that never reach the
  // outlet). meas_offset <= 0 measures on the outlet boundary instead.
  double meas_offset = 0.02;
  double meas_x0 = 0.0;
  double meas_x1 = 0.5;

  int nx = 40;  // elements along the interface (also the 1-D mesh density)
  int ny = 40;  // elements through each half-domain depth

  double c0() const { return std::sqrt(K0 / rho0); }
  double omega() const { return k0 * c0(); }

  void validate() const;
};

struct MacroSpaces {
  std::shared_ptr<const TriMesh> mesh;
  std::shared_ptr<const fem::LineMesh> line;
  std::shared_ptr<fem::FunctionSpace> P_plus;   // P2 on the incident half
  std::shared_ptr<fem::FunctionSpace> P_minus;  // P2 on the transmitted half
  std::shared_ptr<fem::FunctionSpace> p0;       // P2 on the interface line
  std::shared_ptr<fem::FunctionSpace> G_plus;   // P1 on the interface line
  std::shared_ptr<fem::FunctionSpace> G_minus;  // P1 on the interface line

  int total_dofs() const {
    return P_plus->num_dofs() + P_minus->num_dofs() + p0->num_dofs() +
           G_plus->num_dofs() + G_minus->num_dofs();
  }
};

TriMesh build_macro_mesh(const MacroConfig& cfg);
MacroSpaces build_macro_spaces(const MacroConfig& cfg);
std::vector<BoundaryTag> outlet_tags(const MacroConfig& cfg);
// Tag of a point on the transmitted-side far boundary (outlets vs walls).
BoundaryTag far_boundary_tag(const MacroConfig& cfg, double x);

struct MacroSolution {
  MacroSpaces spaces;
  std::vector<Complex> P_plus, P_minus;  // DOF vectors
  std::vector<Complex> p0, G0_plus, G0_minus;
  double residual = 0.0;
};

fem::BlockSystem<Complex> assemble_macro_system(const MacroSpaces& spaces,
                                                const HomogenizedCoeffs& coeffs,
                                                const MacroConfig& cfg);

MacroSolution solve_macro(const MacroSpaces& spaces, const HomogenizedCoeffs& coeffs,
                          const MacroConfig& cfg);

// Time-averaged acoustic power [W/m] through a tagged exterior boundary,
// positive outward: integral of Re(p conj(u_n))/2 with u = -grad(p)/(i w rho).
double boundary_energy_flux(const MacroSolution& sol, BoundaryTag tag,
                            const MacroConfig& cfg);

// integral of |field|^2 over a tagged boundary of the given space.
double boundary_norm2(const fem::FunctionSpace& space, const std::vector<Complex>& dofs,
                      BoundaryTag tag);

// Generic helpers shared with the reference solver.
double boundary_energy_flux_of(const fem::FunctionSpace& space,
                               const std::vector<Complex>& dofs, BoundaryTag tag,
                               double omega, double rho0);

void export_macro_vtk(const MacroSolution& sol, const std::string& path);

}  // namespace metasurf

#endif
