#ifndef METASURF_CELL_HPP
#define METASURF_CELL_HPP

#include <memory>
#include <vector>

#include "metasurf/fem.hpp"
#include "metasurf/materials.hpp"
#include "metasurf/mesh.hpp"

namespace metasurf {

// Microscale fields on the unit cell. eta responds to a unit tangential
// pressure gradient, xi to a unit normal flux through the cell; both are
// periodic in y1 and fixed to the mean-zero gauge.
struct CellSolution {
  std::shared_ptr<const TriMesh> mesh;
  std::shared_ptr<const fem::FunctionSpace> space;  // P2 over the whole cell
  std::vector<double> eta;  // DOF vector
  std::vector<double> xi;   // DOF vector
  double residual_eta = 0.0;
  double residual_xi = 0.0;

  std::vector<double> eta_nodal() const { return space->nodal_values(eta); }
  std::vector<double> xi_nodal() const { return space->nodal_values(xi); }
};

// The four interface coefficients characterizing the cell.
struct HomogenizedCoeffs {
  double A11 = 0.0;   // m^3 kg^-1
  double B1 = 0.0;    // dimensionless
  double Kinv = 0.0;  // Pa^-1
  double F = 0.0;     // kg m^-3
};

// Solves the two cell problems on a conforming, labeled unit-cell mesh with
// periodic sides. Both systems share one factorization of the 1/rho
// stiffness operator; a mean-zero gauge row removes the constant nullspace.
CellSolution solve_cell_problems(const TriMesh& cell_mesh, const MaterialPair& materials);

HomogenizedCoeffs homogenized_coefficients(const CellSolution& sol,
                                           const MaterialPair& materials);

// Independent route for B1 via the boundary traces of eta; must agree with
// the volume formula on refined meshes.
double b1_boundary_trace(const CellSolution& sol);

}  // namespace metasurf

#endif
