#ifndef METASURF_MATERIALS_HPP
#define METASURF_MATERIALS_HPP

#include <stdexcept>

#include "metasurf/mesh.hpp"

namespace metasurf {

// Mass density [kg m^-3] and bulk modulus [Pa] of the two media in the cell.
// The elastic medium is treated as a second acoustic medium; the impedance
// contrast justifies dropping acoustic-elastic interaction.
struct MaterialPair {
  double rho_air = 1.2;
  double K_air = 1.42e5;
  double rho_elastic = 2643.0;
  double K_elastic = 6.87e10;

  void validate() const {
    if (rho_air <= 0 || K_air <= 0 || rho_elastic <= 0 || K_elastic <= 0)
      throw std::invalid_argument("material properties must be positive");
  }

  double rho(Region r) const {
    return material_role(r) == MaterialRole::Elastic ? rho_elastic : rho_air;
  }
  double K(Region r) const {
    return material_role(r) == MaterialRole::Elastic ? K_elastic : K_air;
  }
};

}  // namespace metasurf

#endif
