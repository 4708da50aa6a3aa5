#include "metasurf/objective.hpp"

namespace metasurf {

void capture_normalizers(ObjectiveSpec& spec, const MacroSolution& sol) {
  spec.validate();
  const double nmin =
      boundary_norm2(*sol.spaces.P_minus, sol.P_minus, spec.gamma_min);
  const double nmax =
      boundary_norm2(*sol.spaces.P_minus, sol.P_minus, spec.gamma_max);
  if (nmin <= 0.0 || nmax <= 0.0)
    throw std::runtime_error("objective: degenerate initial field, zero normalizer");
  spec.norm_min = nmin;
  spec.norm_max = nmax;
}

ObjectiveValue evaluate_objective(const MacroSolution& sol, const ObjectiveSpec& spec) {
  spec.validate();
  if (!spec.captured())
    throw std::runtime_error("objective: normalizers not captured");
  ObjectiveValue v;
  v.J1 = boundary_norm2(*sol.spaces.P_minus, sol.P_minus, spec.gamma_min) / spec.norm_min;
  v.J2 = boundary_norm2(*sol.spaces.P_minus, sol.P_minus, spec.gamma_max) / spec.norm_max;
  v.J = spec.w * v.J1 - (1.0 - spec.w) * v.J2;
  return v;
}

}  // namespace metasurf
