#ifndef METASURF_OBJECTIVE_HPP
#define METASURF_OBJECTIVE_HPP

#include "metasurf/macro.hpp"

namespace metasurf {

// Weighted two-outlet objective: J = w*J1 - (1-w)*J2 with J1 the normalized
// transmitted |P-|^2 on the boundary to suppress and J2 on the boundary to
// keep. The normalizers are the boundary norms of the initial design,
// captured exactly once.
struct ObjectiveSpec {
  double w = 0.5;
  BoundaryTag gamma_min = BoundaryTag::Outlet2;
  BoundaryTag gamma_max = BoundaryTag::Outlet1;
  double norm_min = 0.0;  // [Pa^2 m], captured at iteration 0
  double norm_max = 0.0;

  bool captured() const { return norm_min > 0.0 && norm_max > 0.0; }

  void validate() const {
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("objective: w outside [0,1]");
    if (gamma_min == gamma_max)
      throw std::invalid_argument("objective: boundaries must differ");
  }
};

struct ObjectiveValue {
  double J = 0.0;
  double J1 = 0.0;
  double J2 = 0.0;
};

// Captures the normalizers from this solution (errors if degenerate).
void capture_normalizers(ObjectiveSpec& spec, const MacroSolution& sol);

ObjectiveValue evaluate_objective(const MacroSolution& sol, const ObjectiveSpec& spec);

}  // namespace metasurf

#endif
