#ifndef METASURF_ADJOINT_HPP
#define METASURF_ADJOINT_HPP

#include "metasurf/macro.hpp"
#include "metasurf/objective.hpp"

namespace metasurf {

struct AdjointSolution {
  MacroSpaces spaces;
  std::vector<Complex> Q_plus, Q_minus;       // P2 on the half-domains
  std::vector<Complex> q0;                    // P2 on the interface line
  std::vector<Complex> Psi_plus, Psi_minus;   // P1 on the interface line
  double residual = 0.0;
};

// Scalar sensitivities of J with respect to the four homogenized
// coefficients; real by construction (2 Re[...] of state/adjoint pairings).
struct Multipliers {
  double A11 = 0.0;
  double B1 = 0.0;
  double F = 0.0;
  double Kinv = 0.0;
};

// Assembles and solves the five adjoint weak equations (independently of the
// state assembly; their agreement with finite differences of J is the
// cross-check). The source lives on the objective boundaries only.
AdjointSolution solve_macro_adjoint(const MacroSolution& state,
                                    const HomogenizedCoeffs& coeffs,
                                    const MacroConfig& cfg, const ObjectiveSpec& spec);

Multipliers lagrange_multipliers(const MacroSolution& state, const AdjointSolution& adj,
                                 const MacroConfig& cfg);

void export_adjoint_vtk(const AdjointSolution& adj, const std::string& path);

}  // namespace metasurf

#endif
