#include "metasurf/cell.hpp"

#include <cmath>

namespace metasurf {

namespace {

void validate_cell_mesh(const TriMesh& mesh) {
  mesh.validate();
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : mesh.nodes) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double tol = 1e-9;
  if (std::abs(x0) > tol || std::abs(y0) > tol || std::abs(x1 - 1.0) > tol ||
      std::abs(y1 - 1.0) > tol)
    throw MeshError("cell mesh must cover the unit square [0,1]^2");
  bool bottom = false, top = false, left = false, right = false;
  for (const auto& e : mesh.boundary_edges) {
    bottom |= e.tag == BoundaryTag::CellBottom;
    top |= e.tag == BoundaryTag::CellTop;
    left |= e.tag == BoundaryTag::PeriodicLeft;
    right |= e.tag == BoundaryTag::PeriodicRight;
  }
  if (!(bottom && top && left && right))
    throw MeshError("cell mesh is missing a required boundary tag");
  for (const auto& t : mesh.triangles)
    if (t.region != Region::Air && t.region != Region::Elastic &&
        t.region != Region::NonDesignAir)
      throw MeshError("cell mesh carries a non-cell region label");
}

}  // namespace

CellSolution solve_cell_problems(const TriMesh& cell_mesh, const MaterialPair& materials) {
  materials.validate();
  validate_cell_mesh(cell_mesh);

  CellSolution sol;
  sol.mesh = std::make_shared<TriMesh>(cell_mesh);
  const PeriodicMap pairing = pair_periodic_nodes(*sol.mesh);
  sol.space = std::make_shared<fem::FunctionSpace>(fem::FunctionSpace::area(
      *sol.mesh, fem::Order::P2,
      {Region::Air, Region::Elastic, Region::NonDesignAir}, &pairing));

  const fem::RegionCoeff inv_rho = [&materials](Region r) {
    return 1.0 / materials.rho(r);
  };

  // Operator (shared by both problems) with the gauge row appended.
  fem::SystemBuilder<double> op;
  const int u = op.add_field("u", sol.space.get());
  op.add_stiffness(u, u, inv_rho, 1.0);
  op.add_mean_constraint(u);
  fem::BlockSystem<double> sys = op.build();

  // Source for eta: -integral (1/rho) d(psi)/dy1.
  fem::SystemBuilder<double> src_eta;
  src_eta.add_field("u", sol.space.get());
  src_eta.add_grad_source(0, inv_rho, 0, -1.0);
  src_eta.add_mean_constraint(0);
  const auto rhs_eta = src_eta.build().rhs;

  // Source for xi: -(integral over the bottom face - integral over the top).
  fem::SystemBuilder<double> src_xi;
  src_xi.add_field("u", sol.space.get());
  src_xi.add_chain_source(0, sol.space->chain(BoundaryTag::CellBottom), -1.0);
  src_xi.add_chain_source(0, sol.space->chain(BoundaryTag::CellTop), 1.0);
  src_xi.add_mean_constraint(0);
  const auto rhs_xi = src_xi.build().rhs;

  const fem::Factorization<double> lu(sys.matrix);
  auto solve_one = [&](const Eigen::VectorXd& rhs, double& residual) {
    std::vector<double> full = lu.solve(rhs);
    Eigen::Map<const Eigen::VectorXd> x(full.data(), full.size());
    const double bnorm = rhs.lpNorm<Eigen::Infinity>();
    residual = bnorm > 0.0
                   ? (sys.matrix * x - rhs).lpNorm<Eigen::Infinity>() / bnorm
                   : 0.0;
    full.resize(sol.space->num_dofs());  // drop the multiplier entry
    return full;
  };
  sol.eta = solve_one(rhs_eta, sol.residual_eta);
  sol.xi = solve_one(rhs_xi, sol.residual_xi);
  return sol;
}

namespace {

// integral over the cell of coeff(region) * (d(field)/dy1 + shift).
double volume_gradient_integral(const CellSolution& sol, const fem::RegionCoeff& coeff,
                                const std::vector<double>& dofs, double shift) {
  const TriMesh& mesh = *sol.mesh;
  const auto& quad = fem::triangle_quadrature(4);
  double acc = 0.0;
  for (const auto& e : sol.space->elements()) {
    const auto& tv = mesh.triangles[e.tri].v;
    const Vec2 &p0 = mesh.nodes[tv[0]], &p1 = mesh.nodes[tv[1]], &p2 = mesh.nodes[tv[2]];
    const double area = triangle_area(p0, p1, p2);
    const double c = coeff(e.region);
    for (const auto& qp : quad) {
      const fem::Shape2D sh = fem::eval_shape(fem::Order::P2, p0, p1, p2, qp.l1, qp.l2);
      double du = 0.0;
      for (int i = 0; i < sh.ndof; ++i) du += dofs[e.dofs[i]] * sh.grad[i].x;
      acc += qp.w * area * c * (du + shift);
    }
  }
  return acc;
}

double trace_integral(const CellSolution& sol, BoundaryTag tag,
                      const std::vector<double>& dofs) {
  const auto chain = sol.space->chain(tag);
  const auto& quad = fem::segment_quadrature(5);
  double acc = 0.0;
  std::array<double, 3> n, dn;
  for (const auto& e : chain) {
    const double len = (e.b - e.a).norm();
    for (const auto& qp : quad) {
      fem::chain_shapes(e, qp.t, n, dn);
      double v = 0.0;
      for (int i = 0; i < e.ndof; ++i) v += dofs[e.dofs[i]] * n[i];
      acc += qp.w * len * v;
    }
  }
  return acc;
}

}  // namespace

HomogenizedCoeffs homogenized_coefficients(const CellSolution& sol,
                                           const MaterialPair& materials) {
  const fem::RegionCoeff inv_rho = [&materials](Region r) {
    return 1.0 / materials.rho(r);
  };
  HomogenizedCoeffs c;
  c.A11 = volume_gradient_integral(sol, inv_rho, sol.eta, 1.0);
  c.B1 = volume_gradient_integral(sol, inv_rho, sol.xi, 0.0);
  for (int t = 0; t < sol.mesh->num_triangles(); ++t)
    c.Kinv += sol.mesh->triangle_area(t) / materials.K(sol.mesh->triangles[t].region);
  c.F = -(trace_integral(sol, BoundaryTag::CellBottom, sol.xi) -
          trace_integral(sol, BoundaryTag::CellTop, sol.xi));
  return c;
}

double b1_boundary_trace(const CellSolution& sol) {
  return trace_integral(sol, BoundaryTag::CellBottom, sol.eta) -
         trace_integral(sol, BoundaryTag::CellTop, sol.eta);
}

}  // namespace metasurf
