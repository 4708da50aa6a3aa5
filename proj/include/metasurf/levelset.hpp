#ifndef METASURF_LEVELSET_HPP
#define METASURF_LEVELSET_HPP

#include <memory>
#include <string>
#include <vector>

#include "metasurf/fem.hpp"
#include "metasurf/mesh.hpp"

namespace metasurf {

// Clamped level-set design description on the base (non-conforming) cell
// mesh: phi in [-1,1] at every node, positive in the elastic phase. Nodes of
// the non-design strips are pinned to -1.
struct LevelSet {
  std::shared_ptr<const TriMesh> mesh;
  std::vector<double> phi;

  void clamp();
  void validate() const;
};

LevelSet initialize_circle(std::shared_ptr<const TriMesh> mesh, const Vec2& center,
                           double radius);
// Arbitrary signed profile (clamped to [-1,1]) on the design nodes.
LevelSet initialize_profile(std::shared_ptr<const TriMesh> mesh,
                            const std::function<double(const Vec2&)>& profile);
LevelSet load_levelset(std::shared_ptr<const TriMesh> mesh, const std::string& path);
void save_levelset(const LevelSet& ls, const std::string& path);

// Node-wise characteristic function: 1 (elastic) where phi >= 0 inside the
// design band, 0 (air) elsewhere.
std::vector<int> material_map(const LevelSet& ls);

struct LevelSetParams {
  double K_phi = 1.0;
  double tau = 5e-4;
  double dt = 0.5;

  void validate() const;
};

// One implicit-Euler step of d(phi)/dt = -K_phi*(J' - tau*Laplace(phi)) with
// periodic sides and natural boundaries elsewhere, then clamping. The
// diffusion factorization is built once and reused across iterations.
class LevelSetUpdater {
 public:
  LevelSetUpdater(std::shared_ptr<const TriMesh> base_mesh, LevelSetParams params);

  void step(LevelSet& ls, const std::vector<double>& jprime_nodal) const;
  const LevelSetParams& params() const { return params_; }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  LevelSetParams params_;
  std::shared_ptr<fem::FunctionSpace> space_;
  Eigen::SparseMatrix<double> mass_;
  std::unique_ptr<fem::Factorization<double>> lu_;
};

}  // namespace metasurf

#endif
