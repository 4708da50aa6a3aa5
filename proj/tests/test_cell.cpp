#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "metasurf/cell.hpp"
#include "metasurf/conform.hpp"
#include "metasurf/levelset.hpp"

using namespace metasurf;

namespace {

const MaterialPair kAirAluminum{};  // defaults: air + aluminum

CellSolution air_cell(int n) {
  const TriMesh mesh = generate_cell_mesh(n, n, 0.1);
  return solve_cell_problems(mesh, kAirAluminum);
}

CellSolution circle_cell(int n, double radius) {
  auto base = std::make_shared<const TriMesh>(generate_cell_mesh(n, n, 0.1));
  const LevelSet ls = initialize_circle(base, {0.5, 0.5}, radius);
  const ConformResult conf = conform_to_levelset(*base, ls.phi);
  return solve_cell_problems(conf.mesh, kAirAluminum);
}

}  // namespace

TEST_CASE("homogeneous air cell has the closed-form solution") {
  const CellSolution sol = air_cell(20);
  CHECK(sol.residual_eta < 1e-10);
  CHECK(sol.residual_xi < 1e-10);

  // eta vanishes: the constant-coefficient source is a pure divergence.
  for (double v : sol.eta) CHECK(std::abs(v) < 1e-10);

  // xi equals rho*(y2 - 1/2) in the mean-zero gauge.
  const auto xi = sol.xi_nodal();
  for (int n = 0; n < sol.mesh->num_nodes(); ++n) {
    const double exact = kAirAluminum.rho_air * (sol.mesh->nodes[n].y - 0.5);
    CHECK(std::abs(xi[n] - exact) < 1e-10);
  }

  const HomogenizedCoeffs c = homogenized_coefficients(sol, kAirAluminum);
  CHECK(c.A11 == doctest::Approx(1.0 / 1.2).epsilon(1e-10));
  CHECK(std::abs(c.B1) < 1e-10);
  CHECK(c.Kinv == doctest::Approx(1.0 / 1.42e5).epsilon(1e-10));
  CHECK(c.F == doctest::Approx(1.2).epsilon(1e-10));
}

TEST_CASE("periodicity of the cell fields") {
  const CellSolution sol = circle_cell(20, 0.3);
  const PeriodicMap map = pair_periodic_nodes(*sol.mesh);
  const auto eta = sol.eta_nodal();
  const auto xi = sol.xi_nodal();
  for (const auto& [l, r] : map.pairs) {
    CHECK(eta[l] == eta[r]);  // merged DOFs share storage
    CHECK(xi[l] == xi[r]);
  }
}

TEST_CASE("mirror-symmetric cell gives antisymmetric eta") {
  const CellSolution sol = circle_cell(30, 0.3);
  // Map each node to its mirror x -> 1-x partner where one exists.
  const auto eta = sol.eta_nodal();
  std::map<std::pair<long long, long long>, int> index;
  auto key = [](const Vec2& p) {
    return std::make_pair(llround(p.x * 1e9), llround(p.y * 1e9));
  };
  for (int n = 0; n < sol.mesh->num_nodes(); ++n) index[key(sol.mesh->nodes[n])] = n;
  double max_asym = 0.0;
  int paired = 0;
  for (int n = 0; n < sol.mesh->num_nodes(); ++n) {
    const Vec2 mirrored{1.0 - sol.mesh->nodes[n].x, sol.mesh->nodes[n].y};
    auto it = index.find(key(mirrored));
    if (it == index.end()) continue;
    ++paired;
    max_asym = std::max(max_asym, std::abs(eta[n] + eta[it->second]));
  }
  CHECK(paired > sol.mesh->num_nodes() / 2);
  CHECK(max_asym < 1e-8);
}

TEST_CASE("gauge independence of the coefficients") {
  CellSolution sol = circle_cell(20, 0.25);
  const HomogenizedCoeffs base = homogenized_coefficients(sol, kAirAluminum);
  for (double& v : sol.eta) v += 0.37;
  for (double& v : sol.xi) v -= 1.41;
  const HomogenizedCoeffs shifted = homogenized_coefficients(sol, kAirAluminum);
  CHECK(shifted.A11 == doctest::Approx(base.A11).epsilon(1e-12));
  CHECK(shifted.B1 == doctest::Approx(base.B1).epsilon(1e-9));
  CHECK(shifted.Kinv == base.Kinv);
  CHECK(shifted.F == doctest::Approx(base.F).epsilon(1e-12));
}

TEST_CASE("B1 volume and trace routes agree") {
  const CellSolution sol = circle_cell(40, 0.3);
  const HomogenizedCoeffs c = homogenized_coefficients(sol, kAirAluminum);
  const double trace = b1_boundary_trace(sol);
  // Symmetric cell: both vanish to discretization noise.
  CHECK(std::abs(c.B1) < 1e-6);
  CHECK(std::abs(trace) < 1e-6);
  CHECK(std::abs(c.B1 - trace) < 1e-6);
}

TEST_CASE("B1 routes agree on an asymmetric cell") {
  auto base = std::make_shared<const TriMesh>(generate_cell_mesh(48, 48, 0.125));
  // Slanted band: clearly breaks the y1 mirror symmetry.
  const LevelSet ls = initialize_profile(base, [](const Vec2& p) {
    const double u = p.x - 0.55 * (p.y - 0.5);
    return std::clamp((0.12 - std::abs(u - 0.5)) / 0.12, -1.0, 1.0);
  });
  const ConformResult conf = conform_to_levelset(*base, ls.phi);
  const CellSolution sol = solve_cell_problems(conf.mesh, kAirAluminum);
  const HomogenizedCoeffs c = homogenized_coefficients(sol, kAirAluminum);
  const double trace = b1_boundary_trace(sol);
  CHECK(std::abs(c.B1) > 1e-3);  // genuinely asymmetric
  CHECK(trace == doctest::Approx(c.B1).epsilon(1e-3));
}

TEST_CASE("circle cell reproduces the reported coefficients") {
  const CellSolution sol = circle_cell(50, 0.3);
  const HomogenizedCoeffs c = homogenized_coefficients(sol, kAirAluminum);
  CHECK(c.A11 == doctest::Approx(0.466).epsilon(0.05));
  CHECK(std::abs(c.B1) < 1e-6);
  CHECK(c.Kinv == doctest::Approx(5.05e-6).epsilon(0.05));
  CHECK(c.F == doctest::Approx(2.18).epsilon(0.05));
}

TEST_CASE("coefficients converge under refinement") {
  const MaterialPair mat = kAirAluminum;
  auto coeffs_at = [&](int n) {
    return homogenized_coefficients(circle_cell(n, 0.3), mat);
  };
  const HomogenizedCoeffs c1 = coeffs_at(10);
  const HomogenizedCoeffs c2 = coeffs_at(20);
  const HomogenizedCoeffs c3 = coeffs_at(40);
  const double d12 = std::abs(c2.A11 - c1.A11);
  const double d23 = std::abs(c3.A11 - c2.A11);
  CHECK(d23 < d12);
  const double f12 = std::abs(c2.F - c1.F);
  const double f23 = std::abs(c3.F - c2.F);
  CHECK(f23 < f12);
}

TEST_CASE("invalid cell meshes are rejected before assembly") {
  TriMesh bad = generate_rect_mesh(2.0, 1.0, 4, 4, all_wall_tags());
  CHECK_THROWS_AS(solve_cell_problems(bad, kAirAluminum), MeshError);

  TriMesh macro_region = generate_cell_mesh(4, 4, 0.25);
  macro_region.triangles[0].region = Region::OmegaPlus;
  CHECK_THROWS_AS(solve_cell_problems(macro_region, kAirAluminum), MeshError);
}
