#include "metasurf/sensitivity.hpp"

#include <cmath>

namespace metasurf {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct NodalGradients {
  std::vector<Vec2> eta;
  std::vector<Vec2> xi;
  std::vector<char> in_design;
};

// Area-weighted one-sided recovery of P2 gradients at mesh nodes. Elements
// across the material interface from the node's own phase are excluded; a
// node with phi = 0 counts as air (deterministic tie-break).
NodalGradients recover_gradients(const CellSolution& cell,
                                 const std::vector<double>& phi_conf) {
  const TriMesh& mesh = *cell.mesh;
  if (phi_conf.size() != mesh.nodes.size())
    throw MeshError("sensitivity: phi does not match the conforming mesh");

  NodalGradients g;
  g.eta.assign(mesh.nodes.size(), Vec2{});
  g.xi.assign(mesh.nodes.size(), Vec2{});
  g.in_design.assign(mesh.nodes.size(), 0);
  std::vector<double> weight(mesh.nodes.size(), 0.0);

  for (const auto& e : cell.space->elements()) {
    const auto& tri = mesh.triangles[e.tri];
    if (tri.region == Region::NonDesignAir) continue;
    const MaterialRole elem_role = material_role(tri.region);
    const Vec2 &p0 = mesh.nodes[tri.v[0]], &p1 = mesh.nodes[tri.v[1]],
               &p2 = mesh.nodes[tri.v[2]];
    const double area = triangle_area(p0, p1, p2);
    // Local barycentric coordinates of the three corners.
    static const double corners[3][2] = {{0, 0}, {1, 0}, {0, 1}};
    for (int k = 0; k < 3; ++k) {
      const int n = tri.v[k];
      const MaterialRole node_role =
          phi_conf[n] > 0.0 ? MaterialRole::Elastic : MaterialRole::Air;
      if (node_role != elem_role) continue;
      const fem::Shape2D sh = fem::eval_shape(fem::Order::P2, p0, p1, p2,
                                              corners[k][0], corners[k][1]);
      Vec2 ge{}, gx{};
      for (int i = 0; i < sh.ndof; ++i) {
        ge += sh.grad[i] * cell.eta[e.dofs[i]];
        gx += sh.grad[i] * cell.xi[e.dofs[i]];
      }
      g.eta[n] += area * ge;
      g.xi[n] += area * gx;
      weight[n] += area;
      g.in_design[n] = 1;
    }
  }
  for (size_t n = 0; n < weight.size(); ++n) {
    if (weight[n] > 0.0) {
      g.eta[n] = g.eta[n] * (1.0 / weight[n]);
      g.xi[n] = g.xi[n] * (1.0 / weight[n]);
    }
  }
  return g;
}

std::vector<double> td_from_gradients(const NodalGradients& g, const Multipliers& mult,
                                      double rho_i, double K_i, double rho_e,
                                      double K_e) {
  // Contrast factor of the circular-inclusion expansion; vanishes for equal
  // densities so the whole field collapses to the bulk-modulus term.
  const double contrast =
      4.0 * kPi * (rho_i - rho_e) / (rho_e * (rho_i + rho_e));
  const double I3 = 2.0 * kPi * (1.0 / K_i - 1.0 / K_e);

  std::vector<double> td(g.eta.size(), 0.0);
  for (size_t n = 0; n < td.size(); ++n) {
    if (!g.in_design[n]) continue;
    const Vec2& ge = g.eta[n];
    const Vec2& gx = g.xi[n];
    const double I1 = -contrast * (ge.dot(ge) + 2.0 * ge.x + 1.0);
    const double I2 = -contrast * (gx.dot(ge) + gx.x);
    const double I4 = contrast * gx.dot(gx);
    td[n] = -(mult.A11 * I1 + mult.B1 * I2 + mult.Kinv * I3 + mult.F * I4) /
            (2.0 * kPi);
  }
  return td;
}

}  // namespace

std::vector<double> topological_derivative_field(const CellSolution& cell,
                                                 const std::vector<double>& phi_conf,
                                                 const Multipliers& mult,
                                                 const MaterialPair& materials,
                                                 InsertionDirection direction) {
  const NodalGradients g = recover_gradients(cell, phi_conf);
  if (direction == InsertionDirection::AirToElastic)
    return td_from_gradients(g, mult, materials.rho_elastic, materials.K_elastic,
                             materials.rho_air, materials.K_air);
  return td_from_gradients(g, mult, materials.rho_air, materials.K_air,
                           materials.rho_elastic, materials.K_elastic);
}

std::vector<double> map_to_jprime(const std::vector<double>& dT_air_to_elastic,
                                  const std::vector<double>& dT_elastic_to_air,
                                  const LevelSet& phi) {
  const size_t n_base = phi.phi.size();
  if (dT_air_to_elastic.size() < n_base || dT_elastic_to_air.size() < n_base)
    throw MeshError("jprime: sensitivity fields shorter than the base mesh");

  std::vector<double> jp(n_base, 0.0);
  for (size_t n = 0; n < n_base; ++n)
    jp[n] = phi.phi[n] > 0.0 ? dT_elastic_to_air[n] : -dT_air_to_elastic[n];

  // Restrict to the design band and normalize to unit L-inf.
  std::vector<char> mask(n_base, 0);
  for (const auto& t : phi.mesh->triangles)
    if (t.region == Region::Air || t.region == Region::Elastic)
      for (int k = 0; k < 3; ++k) mask[t.v[k]] = 1;
  double linf = 0.0;
  for (size_t n = 0; n < n_base; ++n) {
    if (!mask[n]) jp[n] = 0.0;
    linf = std::max(linf, std::abs(jp[n]));
  }
  if (linf > 0.0)
    for (double& v : jp) v /= linf;
  return jp;
}

SensitivityField evaluate_sensitivity(const CellSolution& cell,
                                      const std::vector<double>& phi_conf,
                                      const Multipliers& mult,
                                      const MaterialPair& materials,
                                      const LevelSet& phi) {
  SensitivityField f;
  f.dT_air_to_elastic = topological_derivative_field(
      cell, phi_conf, mult, materials, InsertionDirection::AirToElastic);
  f.dT_elastic_to_air = topological_derivative_field(
      cell, phi_conf, mult, materials, InsertionDirection::ElasticToAir);
  f.jprime = map_to_jprime(f.dT_air_to_elastic, f.dT_elastic_to_air, phi);
  return f;
}

}  // namespace metasurf
