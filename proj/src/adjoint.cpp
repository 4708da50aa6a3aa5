#include "metasurf/adjoint.hpp"

#include "metasurf/vtk_io.hpp"

namespace metasurf {

AdjointSolution solve_macro_adjoint(const MacroSolution& state,
                                    const HomogenizedCoeffs& coeffs,
                                    const MacroConfig& cfg, const ObjectiveSpec& spec) {
  cfg.validate();
  spec.validate();
  if (!spec.captured())
    throw std::runtime_error("adjoint: objective normalizers not captured");

  const MacroSpaces& spaces = state.spaces;
  const double w = cfg.omega();
  const Complex ik_rho(0.0, cfg.k0 / cfg.rho0);
  const auto one = fem::constant_coeff(1.0);

  fem::SystemBuilder<Complex> b;
  const int Qp = b.add_field("Q+", spaces.P_plus.get());
  const int Qm = b.add_field("Q-", spaces.P_minus.get());
  const int q0 = b.add_field("q0", spaces.p0.get());
  const int Pp = b.add_field("Psi0+", spaces.G_plus.get());
  const int Pm = b.add_field("Psi0-", spaces.G_minus.get());

  const auto iface_p = spaces.P_plus->chain(BoundaryTag::Interface);
  const auto iface_m = spaces.P_minus->chain(BoundaryTag::Interface);
  const auto line_q0 = spaces.p0->chain();
  const auto line_gp = spaces.G_plus->chain();
  const auto line_gm = spaces.G_minus->chain();

  // Incident-side adjoint Helmholtz row.
  b.add_stiffness(Qp, Qp, one, Complex(1.0 / cfg.rho0));
  b.add_mass(Qp, Qp, one, Complex(-w * w / cfg.K0));
  b.add_chain_bilinear(Qp, spaces.P_plus->chain(BoundaryTag::Inlet), Qp,
                       spaces.P_plus->chain(BoundaryTag::Inlet), ik_rho);
  b.add_chain_bilinear(Qp, iface_p, Pp, line_gp, Complex(-1.0 / cfg.eps0));
  b.add_chain_bilinear(Qp, iface_p, Pm, line_gm, Complex(-0.5));

  // Transmitted-side adjoint Helmholtz row with the objective source.
  b.add_stiffness(Qm, Qm, one, Complex(1.0 / cfg.rho0));
  b.add_mass(Qm, Qm, one, Complex(-w * w / cfg.K0));
  for (BoundaryTag tag : outlet_tags(cfg))
    b.add_chain_bilinear(Qm, spaces.P_minus->chain(tag), Qm,
                         spaces.P_minus->chain(tag), ik_rho);
  b.add_chain_bilinear(Qm, iface_m, Pp, line_gp, Complex(1.0 / cfg.eps0));
  b.add_chain_bilinear(Qm, iface_m, Pm, line_gm, Complex(-0.5));
  // dg/dP- is the Wirtinger derivative of the |P-|^2 integrands: the
  // suppressed boundary carries +w/norm_min, the kept one -(1-w)/norm_max;
  // the adjoint right-hand side is minus their pairing with the test trace.
  {
    const Complex cmin(-spec.w / spec.norm_min);
    const Complex cmax((1.0 - spec.w) / spec.norm_max);
    b.add_chain_source_trace(Qm, spaces.P_minus->chain(spec.gamma_min),
                             spaces.P_minus->chain(spec.gamma_min), state.P_minus,
                             [cmin](Complex v) { return cmin * std::conj(v); });
    b.add_chain_source_trace(Qm, spaces.P_minus->chain(spec.gamma_max),
                             spaces.P_minus->chain(spec.gamma_max), state.P_minus,
                             [cmax](Complex v) { return cmax * std::conj(v); });
  }

  // Interface line row (test q~).
  b.add_chain_bilinear(q0, line_q0, q0, line_q0, Complex(coeffs.A11), true, true);
  b.add_chain_bilinear(q0, line_q0, q0, line_q0, Complex(-w * w * coeffs.Kinv));
  b.add_chain_bilinear(q0, line_q0, Pp, line_gp, Complex(coeffs.B1), true, false);
  b.add_chain_bilinear(q0, line_q0, Pm, line_gm, Complex(1.0));

  // Multiplier row paired with the jump equation (test Psi~ -> Psi0+ block).
  b.add_chain_bilinear(Pp, line_gp, Qp, iface_p, Complex(-1.0));
  b.add_chain_bilinear(Pp, line_gp, q0, line_q0, Complex(0.5 * coeffs.B1), false, true);
  b.add_chain_bilinear(Pp, line_gp, q0, line_q0, Complex(1.0 / cfg.eps0));
  b.add_chain_bilinear(Pp, line_gp, Pp, line_gp, Complex(-0.5 * coeffs.F));

  // Multiplier row paired with the mean-value equation (Psi0- block).
  b.add_chain_bilinear(Pm, line_gm, Qm, iface_m, Complex(1.0));
  b.add_chain_bilinear(Pm, line_gm, q0, line_q0, Complex(0.5 * coeffs.B1), false, true);
  b.add_chain_bilinear(Pm, line_gm, q0, line_q0, Complex(-1.0 / cfg.eps0));
  b.add_chain_bilinear(Pm, line_gm, Pp, line_gp, Complex(-0.5 * coeffs.F));

  const auto sys = b.build();
  const auto r = fem::solve(sys);

  AdjointSolution adj;
  adj.spaces = spaces;
  adj.Q_plus = r.block(sys, "Q+");
  adj.Q_minus = r.block(sys, "Q-");
  adj.q0 = r.block(sys, "q0");
  adj.Psi_plus = r.block(sys, "Psi0+");
  adj.Psi_minus = r.block(sys, "Psi0-");
  adj.residual = r.residual;
  return adj;
}

namespace {

// integral over the interface line of (a-trace) * (b-trace), optionally with
// tangential derivatives; plain product, no conjugation.
Complex line_product(const std::vector<fem::FunctionSpace::ChainEntry>& ca,
                     const std::vector<Complex>& da, bool deriv_a,
                     const std::vector<fem::FunctionSpace::ChainEntry>& cb,
                     const std::vector<Complex>& db, bool deriv_b) {
  if (ca.size() != cb.size()) throw fem::FemError("line product: chain mismatch");
  const auto& quad = fem::segment_quadrature(5);
  Complex acc(0.0, 0.0);
  std::array<double, 3> an, adn, bn, bdn;
  for (size_t k = 0; k < ca.size(); ++k) {
    const double len = (ca[k].b - ca[k].a).norm();
    for (const auto& qp : quad) {
      fem::chain_shapes(ca[k], qp.t, an, adn);
      fem::chain_shapes(cb[k], qp.t, bn, bdn);
      Complex va(0.0, 0.0), vb(0.0, 0.0);
      for (int i = 0; i < ca[k].ndof; ++i)
        va += da[ca[k].dofs[i]] * (deriv_a ? adn[i] / len : an[i]);
      for (int i = 0; i < cb[k].ndof; ++i)
        vb += db[cb[k].dofs[i]] * (deriv_b ? bdn[i] / len : bn[i]);
      acc += qp.w * len * va * vb;
    }
  }
  return acc;
}

}  // namespace

Multipliers lagrange_multipliers(const MacroSolution& state, const AdjointSolution& adj,
                                 const MacroConfig& cfg) {
  const MacroSpaces& sp = state.spaces;
  const auto line_p0 = sp.p0->chain();
  const auto line_gp = sp.G_plus->chain();
  const auto line_gm = sp.G_minus->chain();
  const double w = cfg.omega();

  Multipliers m;
  m.A11 = 2.0 * line_product(line_p0, state.p0, true, line_p0, adj.q0, true).real();
  m.B1 = 2.0 *
         (0.5 * line_product(line_gp, state.G0_plus, false, line_p0, adj.q0, true) +
          0.5 * line_product(line_gm, state.G0_minus, false, line_p0, adj.q0, true) +
          line_product(line_p0, state.p0, true, line_gp, adj.Psi_plus, false))
             .real();
  m.F = 2.0 *
        (-0.5 * line_product(line_gp, state.G0_plus, false, line_gp, adj.Psi_plus, false) -
         0.5 * line_product(line_gm, state.G0_minus, false, line_gp, adj.Psi_plus, false))
            .real();
  m.Kinv =
      2.0 * (-w * w * line_product(line_p0, state.p0, false, line_p0, adj.q0, false))
                .real();
  return m;
}

void export_adjoint_vtk(const AdjointSolution& adj, const std::string& path) {
  VtkFile vtk(*adj.spaces.mesh);
  std::vector<Complex> q(adj.spaces.mesh->nodes.size(), Complex(0, 0));
  const auto qp = adj.spaces.P_plus->nodal_values(adj.Q_plus);
  const auto qm = adj.spaces.P_minus->nodal_values(adj.Q_minus);
  for (size_t i = 0; i < q.size(); ++i) {
    if (adj.spaces.P_plus->vertex_dof(static_cast<int>(i)) >= 0)
      q[i] = qp[i];
    else if (adj.spaces.P_minus->vertex_dof(static_cast<int>(i)) >= 0)
      q[i] = qm[i];
  }
  vtk.add_point_field("adj_Q", q);
  vtk.write(path);
}

}  // namespace metasurf
