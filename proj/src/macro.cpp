#include "metasurf/macro.hpp"

#include <cmath>

#include "metasurf/vtk_io.hpp"

namespace metasurf {

void MacroConfig::validate() const {
  if (k0 <= 0.0) throw std::invalid_argument("macro: k0 must be positive");
  if (eps0 <= 0.0) throw std::invalid_argument("macro: eps0 must be positive");
  if (rho0 <= 0.0 || K0 <= 0.0)
    throw std::invalid_argument("macro: background medium must be positive");
  if (interface_length <= 0.0 || depth <= 0.0)
    throw std::invalid_argument("macro: non-positive geometry");
  if (nx < 2 || ny < 1) throw std::invalid_argument("macro: mesh too coarse");
  const double h = interface_length / nx;
  auto on_grid = [h](double v) {
    const double r = v / h;
    return std::abs(r - std::round(r)) < 1e-9;
  };
  if (geometry == MacroGeometry::Design) {
    if (2.0 * outlet_width + wall_width > interface_length + 1e-12)
      throw std::invalid_argument("macro: outlets do not fit the top boundary");
    if (!on_grid(outlet_width) || !on_grid(outlet_width + wall_width))
      throw std::invalid_argument(
          "macro: outlet boundaries must fall on mesh lines (adjust nx)");
  } else if (validation_outlet_width > 0.0) {
    if (validation_outlet_offset < -1e-12 ||
        validation_outlet_offset + validation_outlet_width > interface_length + 1e-12)
      throw std::invalid_argument("macro: validation outlet outside the boundary");
    if (!on_grid(validation_outlet_offset) ||
        !on_grid(validation_outlet_offset + validation_outlet_width))
      throw std::invalid_argument(
          "macro: validation outlet must fall on mesh lines (adjust nx)");
  }
}

BoundaryTag far_boundary_tag(const MacroConfig& cfg, double x) {
  const double L = cfg.interface_length;
  if (cfg.geometry == MacroGeometry::Validation) {
    if (cfg.validation_outlet_width <= 0.0) return BoundaryTag::Outlet1;
    const double lo = cfg.validation_outlet_offset;
    const double hi = lo + cfg.validation_outlet_width;
    return (x > lo && x < hi) ? BoundaryTag::Outlet1 : BoundaryTag::Wall;
  }
  const double wall_lo =
      cfg.outlet1_left ? cfg.outlet_width : L - cfg.outlet_width - cfg.wall_width;
  const double wall_hi = wall_lo + cfg.wall_width;
  if (x > wall_lo && x < wall_hi) return BoundaryTag::Wall;
  const bool left = x < wall_lo;
  if (cfg.outlet1_left) return left ? BoundaryTag::Outlet1 : BoundaryTag::Outlet2;
  return left ? BoundaryTag::Outlet2 : BoundaryTag::Outlet1;
}

TriMesh build_macro_mesh(const MacroConfig& cfg) {
  cfg.validate();
  const double L = cfg.interface_length, H = cfg.depth;

  // Incident half below the interface: inlet at the bottom.
  TagRule plus_tags = [&](const Vec2& mid) {
    const double tol = 1e-12;
    if (mid.y < -H + tol) return BoundaryTag::Inlet;
    if (mid.y > -tol) return BoundaryTag::Interface;
    return BoundaryTag::Wall;
  };
  TriMesh mesh = generate_rect_mesh(L, H, cfg.nx, cfg.ny, plus_tags,
                                    Region::OmegaPlus, 0.0, -H, MeshScale::Macro);

  // Transmitted half above, with its own duplicated interface node layer.
  TagRule minus_tags = [&](const Vec2& mid) {
    const double tol = 1e-12;
    if (mid.y < tol) return BoundaryTag::Interface;
    if (mid.y > H - tol) return far_boundary_tag(cfg, mid.x);
    return BoundaryTag::Wall;
  };
  const TriMesh upper = generate_rect_mesh(L, H, cfg.nx, cfg.ny, minus_tags,
                                           Region::OmegaMinus, 0.0, 0.0,
                                           MeshScale::Macro);

  const int offset = mesh.num_nodes();
  mesh.nodes.insert(mesh.nodes.end(), upper.nodes.begin(), upper.nodes.end());
  for (const auto& t : upper.triangles)
    mesh.triangles.push_back(
        {{t.v[0] + offset, t.v[1] + offset, t.v[2] + offset}, t.region});
  for (const auto& e : upper.boundary_edges)
    mesh.boundary_edges.push_back({{e.v[0] + offset, e.v[1] + offset}, e.tag});
  return mesh;
}

MacroSpaces build_macro_spaces(const MacroConfig& cfg) {
  MacroSpaces s;
  s.mesh = std::make_shared<TriMesh>(build_macro_mesh(cfg));
  s.line = std::make_shared<fem::LineMesh>(
      fem::LineMesh::uniform(0.0, cfg.interface_length, cfg.nx, 0.0));
  s.P_plus = std::make_shared<fem::FunctionSpace>(
      fem::FunctionSpace::area(*s.mesh, fem::Order::P2, {Region::OmegaPlus}));
  s.P_minus = std::make_shared<fem::FunctionSpace>(
      fem::FunctionSpace::area(*s.mesh, fem::Order::P2, {Region::OmegaMinus}));
  s.p0 = std::make_shared<fem::FunctionSpace>(
      fem::FunctionSpace::line(*s.line, fem::Order::P2));
  s.G_plus = std::make_shared<fem::FunctionSpace>(
      fem::FunctionSpace::line(*s.line, fem::Order::P1));
  s.G_minus = std::make_shared<fem::FunctionSpace>(
      fem::FunctionSpace::line(*s.line, fem::Order::P1));
  return s;
}

std::vector<BoundaryTag> outlet_tags(const MacroConfig& cfg) {
  if (cfg.geometry == MacroGeometry::Validation) return {BoundaryTag::Outlet1};
  return {BoundaryTag::Outlet1, BoundaryTag::Outlet2};
}

fem::BlockSystem<Complex> assemble_macro_system(const MacroSpaces& spaces,
                                                const HomogenizedCoeffs& coeffs,
                                                const MacroConfig& cfg) {
  cfg.validate();
  if (coeffs.A11 <= 0.0 || coeffs.Kinv <= 0.0)
    throw std::invalid_argument("macro: invalid homogenized coefficients");

  const double w = cfg.omega();
  const Complex ik_rho(0.0, cfg.k0 / cfg.rho0);
  const auto one = fem::constant_coeff(1.0);

  fem::SystemBuilder<Complex> b;
  const int Pp = b.add_field("P+", spaces.P_plus.get());
  const int Pm = b.add_field("P-", spaces.P_minus.get());
  const int p0 = b.add_field("p0", spaces.p0.get());
  const int Gp = b.add_field("G0+", spaces.G_plus.get());
  const int Gm = b.add_field("G0-", spaces.G_minus.get());

  const auto iface_p = spaces.P_plus->chain(BoundaryTag::Interface);
  const auto iface_m = spaces.P_minus->chain(BoundaryTag::Interface);
  const auto line_p0 = spaces.p0->chain();
  const auto line_gp = spaces.G_plus->chain();
  const auto line_gm = spaces.G_minus->chain();

  // Helmholtz in the incident half with the incident Robin condition.
  b.add_stiffness(Pp, Pp, one, Complex(1.0 / cfg.rho0));
  b.add_mass(Pp, Pp, one, Complex(-w * w / cfg.K0));
  b.add_chain_bilinear(Pp, spaces.P_plus->chain(BoundaryTag::Inlet), Pp,
                       spaces.P_plus->chain(BoundaryTag::Inlet), ik_rho);
  b.add_chain_bilinear(Pp, iface_p, Gp, line_gp, Complex(-1.0));
  b.add_chain_source(Pp, spaces.P_plus->chain(BoundaryTag::Inlet),
                     2.0 * ik_rho * Complex(cfg.P_in));

  // Helmholtz in the transmitted half with absorbing outlets.
  b.add_stiffness(Pm, Pm, one, Complex(1.0 / cfg.rho0));
  b.add_mass(Pm, Pm, one, Complex(-w * w / cfg.K0));
  for (BoundaryTag tag : outlet_tags(cfg))
    b.add_chain_bilinear(Pm, spaces.P_minus->chain(tag), Pm,
                         spaces.P_minus->chain(tag), ik_rho);
  b.add_chain_bilinear(Pm, iface_m, Gm, line_gm, Complex(1.0));

  // Tangential interface equation for p0.
  b.add_chain_bilinear(p0, line_p0, p0, line_p0, Complex(coeffs.A11), true, true);
  b.add_chain_bilinear(p0, line_p0, p0, line_p0, Complex(-w * w * coeffs.Kinv));
  b.add_chain_bilinear(p0, line_p0, Gp, line_gp, Complex(0.5 * coeffs.B1), true, false);
  b.add_chain_bilinear(p0, line_p0, Gm, line_gm, Complex(0.5 * coeffs.B1), true, false);
  b.add_chain_bilinear(p0, line_p0, Gp, line_gp, Complex(1.0 / cfg.eps0));
  b.add_chain_bilinear(p0, line_p0, Gm, line_gm, Complex(-1.0 / cfg.eps0));

  // Jump condition: B1 dp0/dx - F (G+ + G-)/2 = (P+ - P-)/eps0.
  b.add_chain_bilinear(Gp, line_gp, p0, line_p0, Complex(coeffs.B1), false, true);
  b.add_chain_bilinear(Gp, line_gp, Gp, line_gp, Complex(-0.5 * coeffs.F));
  b.add_chain_bilinear(Gp, line_gp, Gm, line_gm, Complex(-0.5 * coeffs.F));
  b.add_chain_bilinear(Gp, line_gp, Pp, iface_p, Complex(-1.0 / cfg.eps0));
  b.add_chain_bilinear(Gp, line_gp, Pm, iface_m, Complex(1.0 / cfg.eps0));

  // Mean-value condition: p0 = (P+ + P-)/2 on the interface.
  b.add_chain_bilinear(Gm, line_gm, p0, line_p0, Complex(1.0));
  b.add_chain_bilinear(Gm, line_gm, Pp, iface_p, Complex(-0.5));
  b.add_chain_bilinear(Gm, line_gm, Pm, iface_m, Complex(-0.5));

  return b.build();
}

MacroSolution solve_macro(const MacroSpaces& spaces, const HomogenizedCoeffs& coeffs,
                          const MacroConfig& cfg) {
  const auto sys = assemble_macro_system(spaces, coeffs, cfg);
  const auto r = fem::solve(sys);
  MacroSolution sol;
  sol.spaces = spaces;
  sol.P_plus = r.block(sys, "P+");
  sol.P_minus = r.block(sys, "P-");
  sol.p0 = r.block(sys, "p0");
  sol.G0_plus = r.block(sys, "G0+");
  sol.G0_minus = r.block(sys, "G0-");
  sol.residual = r.residual;
  return sol;
}

double boundary_energy_flux_of(const fem::FunctionSpace& space,
                               const std::vector<Complex>& dofs, BoundaryTag tag,
                               double omega, double rho0) {
  if (omega <= 0.0) throw std::invalid_argument("flux: omega must be positive");
  const TriMesh& mesh = *space.mesh();
  const auto chain = space.chain(tag);
  const auto& quad = fem::segment_quadrature(5);
  const Complex iwr(0.0, omega * rho0);

  double power = 0.0;
  for (const auto& e : chain) {
    const auto& tv = mesh.triangles[e.tri].v;
    const Vec2 &p0 = mesh.nodes[tv[0]], &p1 = mesh.nodes[tv[1]], &p2 = mesh.nodes[tv[2]];
    // Outward normal: perpendicular of the edge, oriented away from the
    // triangle's centroid.
    const Vec2 tangent = e.b - e.a;
    const double len = tangent.norm();
    Vec2 n{tangent.y / len, -tangent.x / len};
    const Vec2 inward = mesh.centroid(e.tri) - (e.a + e.b) * 0.5;
    if (n.dot(inward) > 0.0) n = {-n.x, -n.y};

    // DOFs of the adjacent element for gradient evaluation.
    const auto& elems = space.elements();
    auto it = std::lower_bound(
        elems.begin(), elems.end(), e.tri,
        [](const fem::FunctionSpace::Element& el, int t) { return el.tri < t; });

    const double a2 = signed_area2(p0, p1, p2);
    for (const auto& qp : quad) {
      const Vec2 x = e.a + qp.t * (e.b - e.a);
      const double l1 = signed_area2(p0, x, p2) / a2;
      const double l2 = signed_area2(p0, p1, x) / a2;
      const fem::Shape2D sh = fem::eval_shape(space.order(), p0, p1, p2, l1, l2);
      Complex p(0.0, 0.0);
      Complex dn(0.0, 0.0);
      for (int i = 0; i < sh.ndof; ++i) {
        const Complex c = dofs[it->dofs[i]];
        p += c * sh.n[i];
        dn += c * (sh.grad[i].x * n.x + sh.grad[i].y * n.y);
      }
      // u_n = -dp/dn / (i w rho); time-averaged flux = Re(p conj(u_n))/2.
      const Complex un = -dn / iwr;
      power += 0.5 * qp.w * len * (p * std::conj(un)).real();
    }
  }
  return power;
}

double boundary_energy_flux(const MacroSolution& sol, BoundaryTag tag,
                            const MacroConfig& cfg) {
  switch (tag) {
    case BoundaryTag::Inlet:
      return boundary_energy_flux_of(*sol.spaces.P_plus, sol.P_plus, tag, cfg.omega(),
                                     cfg.rho0);
    case BoundaryTag::Outlet1:
    case BoundaryTag::Outlet2:
      return boundary_energy_flux_of(*sol.spaces.P_minus, sol.P_minus, tag,
                                     cfg.omega(), cfg.rho0);
    default:
      throw std::invalid_argument(std::string("flux: unsupported boundary '") +
                                  to_string(tag) + "'");
  }
}

double boundary_norm2(const fem::FunctionSpace& space, const std::vector<Complex>& dofs,
                      BoundaryTag tag) {
  const auto chain = space.chain(tag);
  const auto& quad = fem::segment_quadrature(5);
  double acc = 0.0;
  std::array<double, 3> n, dn;
  for (const auto& e : chain) {
    const double len = (e.b - e.a).norm();
    for (const auto& qp : quad) {
      fem::chain_shapes(e, qp.t, n, dn);
      Complex v(0.0, 0.0);
      for (int i = 0; i < e.ndof; ++i) v += dofs[e.dofs[i]] * n[i];
      acc += qp.w * len * std::norm(v);
    }
  }
  return acc;
}

void export_macro_vtk(const MacroSolution& sol, const std::string& path) {
  VtkFile vtk(*sol.spaces.mesh);
  // Stitch P+ and P- nodal values into one field (supports are disjoint).
  std::vector<Complex> p(sol.spaces.mesh->nodes.size(), Complex(0, 0));
  const auto pp = sol.spaces.P_plus->nodal_values(sol.P_plus);
  const auto pm = sol.spaces.P_minus->nodal_values(sol.P_minus);
  for (size_t i = 0; i < p.size(); ++i) {
    if (sol.spaces.P_plus->vertex_dof(static_cast<int>(i)) >= 0)
      p[i] = pp[i];
    else if (sol.spaces.P_minus->vertex_dof(static_cast<int>(i)) >= 0)
      p[i] = pm[i];
  }
  vtk.add_point_field("P", p);
  vtk.write(path);
}

}  // namespace metasurf
