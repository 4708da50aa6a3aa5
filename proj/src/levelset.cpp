#include "metasurf/levelset.hpp"

#include <algorithm>
#include <cmath>

#include "metasurf/vtk_io.hpp"

namespace metasurf {

void LevelSet::clamp() {
  for (double& v : phi) v = std::clamp(v, -1.0, 1.0);
}

void LevelSet::validate() const {
  if (phi.size() != mesh->nodes.size())
    throw MeshError("level set: phi size does not match mesh");
  for (double v : phi)
    if (!(v >= -1.0 && v <= 1.0)) throw MeshError("level set: phi out of [-1,1]");
}

namespace {

std::vector<char> design_node_mask(const TriMesh& mesh) {
  std::vector<char> mask(mesh.nodes.size(), 0);
  for (const auto& t : mesh.triangles)
    if (t.region == Region::Air || t.region == Region::Elastic)
      for (int k = 0; k < 3; ++k) mask[t.v[k]] = 1;
  return mask;
}

}  // namespace

LevelSet initialize_profile(std::shared_ptr<const TriMesh> mesh,
                            const std::function<double(const Vec2&)>& profile) {
  LevelSet ls;
  ls.mesh = std::move(mesh);
  ls.phi.resize(ls.mesh->nodes.size(), -1.0);
  const auto mask = design_node_mask(*ls.mesh);
  for (size_t n = 0; n < ls.phi.size(); ++n)
    if (mask[n]) ls.phi[n] = profile(ls.mesh->nodes[n]);
  ls.clamp();
  return ls;
}

LevelSet initialize_circle(std::shared_ptr<const TriMesh> mesh, const Vec2& center,
                           double radius) {
  if (radius <= 0.0) throw MeshError("level set: radius must be positive");
  return initialize_profile(std::move(mesh), [center, radius](const Vec2& p) {
    return (radius - (p - center).norm()) / radius;
  });
}

LevelSet load_levelset(std::shared_ptr<const TriMesh> mesh, const std::string& path) {
  const VtkContents contents = read_vtk(path);
  LevelSet ls;
  ls.mesh = std::move(mesh);
  for (const auto& [name, vals] : contents.point_fields) {
    if (name == "phi") {
      if (vals.size() != ls.mesh->nodes.size())
        throw MeshError("level set file does not match the design mesh");
      ls.phi = vals;
      ls.validate();
      return ls;
    }
  }
  throw MeshError("level set file carries no 'phi' point field");
}

void save_levelset(const LevelSet& ls, const std::string& path) {
  VtkFile vtk(*ls.mesh);
  vtk.add_point_field("phi", ls.phi);
  vtk.write(path);
}

std::vector<int> material_map(const LevelSet& ls) {
  const auto mask = design_node_mask(*ls.mesh);
  std::vector<int> chi(ls.phi.size(), 0);
  for (size_t n = 0; n < chi.size(); ++n)
    if (mask[n] && ls.phi[n] >= 0.0) chi[n] = 1;
  return chi;
}

void LevelSetParams::validate() const {
  if (K_phi <= 0.0 || tau <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("level-set parameters must be positive");
}

LevelSetUpdater::LevelSetUpdater(std::shared_ptr<const TriMesh> base_mesh,
                                 LevelSetParams params)
    : mesh_(std::move(base_mesh)), params_(params) {
  params_.validate();
  const PeriodicMap pairing = pair_periodic_nodes(*mesh_);
  space_ = std::make_shared<fem::FunctionSpace>(fem::FunctionSpace::area(
      *mesh_, fem::Order::P1, {Region::Air, Region::Elastic}, &pairing));

  fem::SystemBuilder<double> lhs;
  lhs.add_field("phi", space_.get());
  lhs.add_mass(0, 0, fem::constant_coeff(1.0), 1.0);
  lhs.add_stiffness(0, 0, fem::constant_coeff(1.0), params_.dt * params_.K_phi * params_.tau);
  lu_ = std::make_unique<fem::Factorization<double>>(lhs.build().matrix);

  fem::SystemBuilder<double> mass;
  mass.add_field("phi", space_.get());
  mass.add_mass(0, 0, fem::constant_coeff(1.0), 1.0);
  mass_ = mass.build().matrix;
}

void LevelSetUpdater::step(LevelSet& ls, const std::vector<double>& jprime_nodal) const {
  if (ls.mesh.get() != mesh_.get())
    throw MeshError("level-set update: mesh mismatch");
  if (jprime_nodal.size() != ls.phi.size())
    throw MeshError("level-set update: jprime size mismatch");

  Eigen::VectorXd u(space_->num_dofs());
  u.setZero();
  for (size_t n = 0; n < ls.phi.size(); ++n) {
    const int d = space_->vertex_dof(static_cast<int>(n));
    if (d >= 0)
      u[d] = ls.phi[n] - params_.dt * params_.K_phi * jprime_nodal[n];
  }
  const std::vector<double> next = lu_->solve(mass_ * u);
  for (size_t n = 0; n < ls.phi.size(); ++n) {
    const int d = space_->vertex_dof(static_cast<int>(n));
    if (d >= 0) ls.phi[n] = next[d];
  }
  ls.clamp();
}

}  // namespace metasurf
