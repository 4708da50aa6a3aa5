#ifndef METASURF_SENSITIVITY_HPP
#define METASURF_SENSITIVITY_HPP

#include <vector>

#include "metasurf/adjoint.hpp"
#include "metasurf/cell.hpp"
#include "metasurf/levelset.hpp"

namespace metasurf {

enum class InsertionDirection { AirToElastic, ElasticToAir };

// Nodal topological derivative over the conforming cell mesh for one
// insertion direction. Gradients of (eta, xi) are recovered one-sidedly: at
// each node only elements of the node's own phase contribute (background
// gradients jump across the material interface). Nodes outside the design
// band carry zero.
std::vector<double> topological_derivative_field(const CellSolution& cell,
                                                 const std::vector<double>& phi_conf,
                                                 const Multipliers& mult,
                                                 const MaterialPair& materials,
                                                 InsertionDirection direction);

struct SensitivityField {
  std::vector<double> dT_air_to_elastic;  // nodal, conforming mesh
  std::vector<double> dT_elastic_to_air;
  std::vector<double> jprime;  // nodal, base mesh, L-inf normalized
};

// Branch select by the sign of phi (air branch at phi = 0), then normalize
// by the L-inf norm over the design band (zero field stays zero). The dT
// fields live on the conforming mesh whose first nodes coincide with the
// base design mesh nodes of phi.
std::vector<double> map_to_jprime(const std::vector<double>& dT_air_to_elastic,
                                  const std::vector<double>& dT_elastic_to_air,
                                  const LevelSet& phi);

SensitivityField evaluate_sensitivity(const CellSolution& cell,
                                      const std::vector<double>& phi_conf,
                                      const Multipliers& mult,
                                      const MaterialPair& materials,
                                      const LevelSet& phi);

}  // namespace metasurf

#endif
