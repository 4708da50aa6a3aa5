#include "metasurf/reference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace metasurf {

namespace {

// One row of triangles coarsening 2m fine intervals into m coarse ones
// (3 triangles per coarse cell). Bottom row nodes are given; returns the top
// row node ids. Orientation flips for downward growth.
std::vector<int> add_transition_strip(TriMesh& mesh, const std::vector<int>& bottom,
                                      double y_top, Region region, bool upward) {
  const int fine = static_cast<int>(bottom.size()) - 1;
  if (fine % 2 != 0) throw MeshError("transition strip needs an even interval count");
  const int coarse = fine / 2;
  std::vector<int> top(coarse + 1);
  for (int i = 0; i <= coarse; ++i) {
    top[i] = mesh.num_nodes();
    mesh.nodes.push_back({mesh.nodes[bottom[2 * i]].x, y_top});
  }
  auto push = [&](int a, int b, int c) {
    if (!upward) std::swap(b, c);
    mesh.triangles.push_back({{a, b, c}, region});
  };
  for (int i = 0; i < coarse; ++i) {
    push(bottom[2 * i], bottom[2 * i + 1], top[i]);
    push(bottom[2 * i + 1], bottom[2 * i + 2], top[i + 1]);
    push(bottom[2 * i + 1], top[i + 1], top[i]);
  }
  return top;
}

std::vector<int> add_structured_rows(TriMesh& mesh, const std::vector<int>& bottom,
                                     double y0, double y1, int ny, Region region,
                                     bool upward) {
  const int nx = static_cast<int>(bottom.size()) - 1;
  std::vector<int> prev = bottom;
  for (int j = 1; j <= ny; ++j) {
    const double y = y0 + (y1 - y0) * j / ny;
    std::vector<int> row(nx + 1);
    for (int i = 0; i <= nx; ++i) {
      row[i] = mesh.num_nodes();
      mesh.nodes.push_back({mesh.nodes[bottom[i]].x, y});
    }
    for (int i = 0; i < nx; ++i) {
      const int a = prev[i], b = prev[i + 1], c = row[i + 1], d = row[i];
      if (upward) {
        if ((i + j) % 2 == 0) {
          mesh.triangles.push_back({{a, b, c}, region});
          mesh.triangles.push_back({{a, c, d}, region});
        } else {
          mesh.triangles.push_back({{a, b, d}, region});
          mesh.triangles.push_back({{b, c, d}, region});
        }
      } else {
        if ((i + j) % 2 == 0) {
          mesh.triangles.push_back({{a, c, b}, region});
          mesh.triangles.push_back({{a, d, c}, region});
        } else {
          mesh.triangles.push_back({{a, d, b}, region});
          mesh.triangles.push_back({{b, d, c}, region});
        }
      }
    }
    prev = row;
  }
  return prev;
}

// Builds one outer half-domain grown away from the seam row; returns the far
// row for boundary tagging. Coarsens by factor-2 transition strips until the
// spacing reaches roughly bulk_h, then fills the rest structurally.
std::vector<int> grow_outer_domain(TriMesh& mesh, const std::vector<int>& seam,
                                   double y_seam, double depth, Region region,
                                   bool upward, double bulk_h) {
  std::vector<int> row = seam;
  double y = y_seam;
  const double sign = upward ? 1.0 : -1.0;
  double h = std::abs(mesh.nodes[seam[1]].x - mesh.nodes[seam[0]].x);
  double remaining = depth;
  while (h < bulk_h * 0.75 && static_cast<int>(row.size()) % 2 == 1 &&
         static_cast<int>(row.size()) > 3 && remaining > 4.0 * h) {
    const double strip = 2.0 * h;  // coarse spacing of the next level
    y += sign * strip;
    remaining -= strip;
    row = add_transition_strip(mesh, row, y, region, upward);
    h = 2.0 * h;
  }
  const int ny = std::max(1, static_cast<int>(std::round(remaining / h)));
  return add_structured_rows(mesh, row, y, y + sign * remaining, ny, region, upward);
}

}  // namespace

TriMesh build_array_geometry(const TriMesh& cell_mesh, int n_cells,
                             const MacroConfig& cfg) {
  cfg.validate();
  if (n_cells < 1) throw MeshError("array: need at least one cell");
  const double L = cfg.interface_length;
  if (std::abs(n_cells * cfg.eps0 - L) > 1e-9 * L) {
    std::ostringstream os;
    os << "array: n_cells * eps0 = " << n_cells * cfg.eps0
       << " does not match the interface length " << L;
    throw MeshError(os.str());
  }
  const PeriodicMap pairing = pair_periodic_nodes(cell_mesh);
  const double delta = cfg.eps0;  // layer thickness (kappa = 1)

  TriMesh mesh;
  mesh.scale = MeshScale::Macro;

  // Scaled cell copies; the right boundary of copy i is reused as the left
  // boundary of copy i+1 through the periodic pairing.
  std::vector<int> left_ids, right_ids;
  for (const auto& [l, r] : pairing.pairs) {
    left_ids.push_back(l);
    right_ids.push_back(r);
  }
  std::vector<int> prev_right;  // global ids of the previous copy's right nodes
  std::map<std::pair<int, int>, BoundaryTag> outer_edges;  // seam bookkeeping

  std::vector<int> bottom_seam, top_seam;
  for (int c = 0; c < n_cells; ++c) {
    std::vector<int> global(cell_mesh.num_nodes(), -1);
    if (c > 0)
      for (size_t k = 0; k < left_ids.size(); ++k) global[left_ids[k]] = prev_right[k];
    for (int n = 0; n < cell_mesh.num_nodes(); ++n) {
      if (global[n] >= 0) continue;
      global[n] = mesh.num_nodes();
      mesh.nodes.push_back({c * cfg.eps0 + cfg.eps0 * cell_mesh.nodes[n].x,
                            -0.5 * delta + delta * cell_mesh.nodes[n].y});
    }
    for (const auto& t : cell_mesh.triangles)
      mesh.triangles.push_back(
          {{global[t.v[0]], global[t.v[1]], global[t.v[2]]}, t.region});
    for (const auto& e : cell_mesh.boundary_edges) {
      const int a = global[e.v[0]], b = global[e.v[1]];
      switch (e.tag) {
        case BoundaryTag::CellBottom:
          bottom_seam.push_back(a);
          bottom_seam.push_back(b);
          break;
        case BoundaryTag::CellTop:
          top_seam.push_back(a);
          top_seam.push_back(b);
          break;
        case BoundaryTag::PeriodicLeft:
          if (c == 0) mesh.boundary_edges.push_back({{a, b}, BoundaryTag::Wall});
          break;
        case BoundaryTag::PeriodicRight:
          if (c == n_cells - 1)
            mesh.boundary_edges.push_back({{a, b}, BoundaryTag::Wall});
          break;
        default:
          mesh.boundary_edges.push_back({{a, b}, e.tag});
      }
    }
    prev_right.clear();
    for (int r : right_ids) prev_right.push_back(global[r]);
  }

  auto unique_sorted_by_x = [&mesh](std::vector<int>& ids) {
    std::sort(ids.begin(), ids.end(), [&mesh](int a, int b) {
      return mesh.nodes[a].x < mesh.nodes[b].x ||
             (mesh.nodes[a].x == mesh.nodes[b].x && a < b);
    });
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (size_t k = 1; k < ids.size(); ++k)
      if (mesh.nodes[ids[k]].x <= mesh.nodes[ids[k - 1]].x)
        throw MeshError("array: seam nodes are not strictly ordered");
  };
  unique_sorted_by_x(bottom_seam);
  unique_sorted_by_x(top_seam);
  if (bottom_seam.size() != top_seam.size())
    throw MeshError("array: top/bottom seam node counts differ");

  // Outer domains grown away from the seams; bulk spacing matches the
  // homogenized macro mesh (interface_length / nx).
  const double bulk_h = cfg.interface_length / cfg.nx;
  const std::vector<int> inlet_row = grow_outer_domain(
      mesh, bottom_seam, -0.5 * delta, cfg.depth, Region::OmegaPlus, false, bulk_h);
  const std::vector<int> outlet_row = grow_outer_domain(
      mesh, top_seam, 0.5 * delta, cfg.depth, Region::OmegaMinus, true, bulk_h);

  // Tag the far rows and the outer side walls. Side walls are recovered as
  // hull edges not yet tagged.
  for (size_t i = 0; i + 1 < inlet_row.size(); ++i)
    mesh.boundary_edges.push_back(
        {{inlet_row[i], inlet_row[i + 1]}, BoundaryTag::Inlet});
  for (size_t i = 0; i + 1 < outlet_row.size(); ++i) {
    const double xm =
        0.5 * (mesh.nodes[outlet_row[i]].x + mesh.nodes[outlet_row[i + 1]].x);
    mesh.boundary_edges.push_back(
        {{outlet_row[i], outlet_row[i + 1]}, far_boundary_tag(cfg, xm)});
  }

  // Remaining hull edges (outer side walls) become walls.
  std::map<std::pair<int, int>, int> edge_use;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) edge_use[key(t.v[k], t.v[(k + 1) % 3])]++;
  std::set<std::pair<int, int>> tagged;
  for (const auto& e : mesh.boundary_edges) tagged.insert(key(e.v[0], e.v[1]));
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const auto ek = key(t.v[k], t.v[(k + 1) % 3]);
      if (edge_use[ek] == 1 && !tagged.count(ek)) {
        mesh.boundary_edges.push_back({{ek.first, ek.second}, BoundaryTag::Wall});
        tagged.insert(ek);
      }
    }

  mesh.validate();
  return mesh;
}

ReferenceSolution solve_reference(const TriMesh& full_mesh, const MaterialPair& materials,
                                  const MacroConfig& cfg) {
  materials.validate();
  const double w = cfg.omega();
  const Complex ik_rho(0.0, cfg.k0 / cfg.rho0);

  ReferenceSolution ref;
  ref.mesh = std::make_shared<TriMesh>(full_mesh);
  ref.space = std::make_shared<fem::FunctionSpace>(fem::FunctionSpace::area(
      *ref.mesh, fem::Order::P2,
      {Region::Air, Region::Elastic, Region::NonDesignAir, Region::OmegaPlus,
       Region::OmegaMinus}));

  const fem::RegionCoeff inv_rho = [&](Region r) {
    if (r == Region::OmegaPlus || r == Region::OmegaMinus) return 1.0 / cfg.rho0;
    return 1.0 / materials.rho(r);
  };
  const fem::RegionCoeff inv_K = [&](Region r) {
    if (r == Region::OmegaPlus || r == Region::OmegaMinus) return 1.0 / cfg.K0;
    return 1.0 / materials.K(r);
  };

  fem::SystemBuilder<Complex> b;
  const int p = b.add_field("p", ref.space.get());
  b.add_stiffness(p, p, inv_rho, Complex(1.0));
  b.add_mass(p, p, inv_K, Complex(-w * w));
  b.add_chain_bilinear(p, ref.space->chain(BoundaryTag::Inlet), p,
                       ref.space->chain(BoundaryTag::Inlet), ik_rho);
  for (BoundaryTag tag : outlet_tags(cfg))
    b.add_chain_bilinear(p, ref.space->chain(tag), p, ref.space->chain(tag), ik_rho);
  b.add_chain_source(p, ref.space->chain(BoundaryTag::Inlet),
                     2.0 * ik_rho * Complex(cfg.P_in));

  const auto sys = b.build();
  const auto r = fem::solve(sys);
  ref.p = r.x;
  ref.residual = r.residual;
  return ref;
}

ErrorField error_field(const MacroSolution& macro_sol, const ReferenceSolution& ref,
                       const MacroConfig& cfg) {
  const TriMesh& mm = *macro_sol.spaces.mesh;
  const fem::PointLocator locator(*ref.mesh);
  const double shift = 0.5 * cfg.eps0;

  ErrorField ef;
  ef.e_plus.assign(mm.nodes.size(), 0.0);
  ef.e_minus.assign(mm.nodes.size(), 0.0);

  // Domain means of |Re(P+-)| over the half-domains.
  auto domain_mean = [&](const fem::FunctionSpace& space,
                         const std::vector<Complex>& dofs) {
    const auto& quad = fem::triangle_quadrature(4);
    double acc = 0.0, area = 0.0;
    for (const auto& e : space.elements()) {
      const auto& tv = mm.triangles[e.tri].v;
      const Vec2 &p0 = mm.nodes[tv[0]], &p1 = mm.nodes[tv[1]], &p2 = mm.nodes[tv[2]];
      const double a = triangle_area(p0, p1, p2);
      area += a;
      for (const auto& qp : quad) {
        const fem::Shape2D sh =
            fem::eval_shape(fem::Order::P2, p0, p1, p2, qp.l1, qp.l2);
        Complex v(0, 0);
        for (int i = 0; i < sh.ndof; ++i) v += dofs[e.dofs[i]] * sh.n[i];
        acc += qp.w * a * std::abs(v.real());
      }
    }
    return acc / area;
  };
  const double mean_plus = domain_mean(*macro_sol.spaces.P_plus, macro_sol.P_plus);
  const double mean_minus = domain_mean(*macro_sol.spaces.P_minus, macro_sol.P_minus);
  if (mean_plus <= 0.0 || mean_minus <= 0.0)
    throw std::runtime_error("error field: degenerate macro solution");

  const auto pp = macro_sol.spaces.P_plus->nodal_values(macro_sol.P_plus);
  const auto pm = macro_sol.spaces.P_minus->nodal_values(macro_sol.P_minus);

  for (size_t n = 0; n < mm.nodes.size(); ++n) {
    const bool in_plus = macro_sol.spaces.P_plus->vertex_dof(static_cast<int>(n)) >= 0;
    const bool in_minus = macro_sol.spaces.P_minus->vertex_dof(static_cast<int>(n)) >= 0;
    if (!in_plus && !in_minus) continue;
    const Vec2 x = mm.nodes[n];
    const Vec2 xr{x.x, x.y + (in_plus ? -shift : shift)};
    double l1, l2;
    const int tri = locator.locate(xr, l1, l2);
    if (tri < 0) throw std::runtime_error("error field: geometry extents do not match");
    const Complex pr = fem::eval_in_triangle(*ref.space, ref.p, tri, l1, l2);
    if (in_plus)
      ef.e_plus[n] = std::abs(pp[n].real() - pr.real()) / mean_plus;
    else
      ef.e_minus[n] = std::abs(pm[n].real() - pr.real()) / mean_minus;
  }
  ef.max_e_plus = *std::max_element(ef.e_plus.begin(), ef.e_plus.end());
  ef.max_e_minus = *std::max_element(ef.e_minus.begin(), ef.e_minus.end());
  return ef;
}

std::vector<Vec2> intensity(const ReferenceSolution& ref, double rho0, double omega) {
  if (omega <= 0.0) throw std::invalid_argument("intensity: omega must be positive");
  const TriMesh& mesh = *ref.mesh;
  const Complex iwr(0.0, omega * rho0);
  std::vector<Vec2> out(mesh.num_triangles(), Vec2{});
  for (const auto& e : ref.space->elements()) {
    const auto& tv = mesh.triangles[e.tri].v;
    const Vec2 &p0 = mesh.nodes[tv[0]], &p1 = mesh.nodes[tv[1]], &p2 = mesh.nodes[tv[2]];
    const fem::Shape2D sh =
        fem::eval_shape(fem::Order::P2, p0, p1, p2, 1.0 / 3.0, 1.0 / 3.0);
    Complex p(0, 0), gx(0, 0), gy(0, 0);
    for (int i = 0; i < sh.ndof; ++i) {
      const Complex c = ref.p[e.dofs[i]];
      p += c * sh.n[i];
      gx += c * sh.grad[i].x;
      gy += c * sh.grad[i].y;
    }
    const Complex ux = -gx / iwr;
    const Complex uy = -gy / iwr;
    out[e.tri] = {0.5 * (p * std::conj(ux)).real(), 0.5 * (p * std::conj(uy)).real()};
  }
  return out;
}

double reference_boundary_norm2(const ReferenceSolution& ref, BoundaryTag tag) {
  return boundary_norm2(*ref.space, ref.p, tag);
}

double reference_boundary_flux(const ReferenceSolution& ref, BoundaryTag tag,
                               const MacroConfig& cfg) {
  return boundary_energy_flux_of(*ref.space, ref.p, tag, cfg.omega(), cfg.rho0);
}

namespace {

// Trapezoid sampling of |field|^2 along the measurement segment.
template <typename Eval>
double segment_norm2(const MacroConfig& cfg, Eval&& eval) {
  const int n = 8 * cfg.nx;
  const double x0 = cfg.meas_x0, x1 = cfg.meas_x1;
  if (x1 <= x0) throw std::invalid_argument("measurement segment is empty");
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = x0 + (x1 - x0) * i / n;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    acc += w * std::norm(eval(x));
  }
  return acc * (x1 - x0) / n;
}

}  // namespace

double measurement_norm2(const MacroSolution& sol, const MacroConfig& cfg) {
  if (cfg.meas_offset <= 0.0) {
    double h = boundary_norm2(*sol.spaces.P_minus, sol.P_minus, BoundaryTag::Outlet1);
    if (cfg.geometry == MacroGeometry::Design)
      h += boundary_norm2(*sol.spaces.P_minus, sol.P_minus, BoundaryTag::Outlet2);
    return h;
  }
  const fem::PointLocator loc(*sol.spaces.mesh);
  return segment_norm2(cfg, [&](double x) {
    double l1, l2;
    const int tri = loc.locate({x, cfg.meas_offset}, l1, l2);
    if (tri < 0) throw std::runtime_error("measurement point outside the macro mesh");
    return fem::eval_in_triangle(*sol.spaces.P_minus, sol.P_minus, tri, l1, l2);
  });
}

double measurement_norm2(const ReferenceSolution& ref, const MacroConfig& cfg) {
  if (cfg.meas_offset <= 0.0) {
    double h = reference_boundary_norm2(ref, BoundaryTag::Outlet1);
    if (cfg.geometry == MacroGeometry::Design)
      h += reference_boundary_norm2(ref, BoundaryTag::Outlet2);
    return h;
  }
  const fem::PointLocator loc(*ref.mesh);
  const double y = cfg.meas_offset + 0.5 * cfg.eps0;
  return segment_norm2(cfg, [&](double x) {
    double l1, l2;
    const int tri = loc.locate({x, y}, l1, l2);
    if (tri < 0) throw std::runtime_error("measurement point outside the array mesh");
    return fem::eval_in_triangle(*ref.space, ref.p, tri, l1, l2);
  });
}

std::vector<SweepRow> frequency_sweep(const TriMesh& cell_mesh,
                                      const MaterialPair& materials,
                                      const MacroConfig& cfg, double k0_begin,
                                      double k0_end, double step, int jobs) {
  if (step <= 0.0 || k0_end < k0_begin) throw std::invalid_argument("sweep: bad range");
  const int n_cells = static_cast<int>(std::round(cfg.interface_length / cfg.eps0));

  // Frequency-independent setup.
  const CellSolution cell = solve_cell_problems(cell_mesh, materials);
  const HomogenizedCoeffs coeffs = homogenized_coefficients(cell, materials);
  const MacroSpaces spaces = build_macro_spaces(cfg);
  const TriMesh array = build_array_geometry(cell_mesh, n_cells, cfg);

  std::vector<double> ks;
  for (double k = k0_begin; k <= k0_end + 1e-9; k += step) ks.push_back(k);
  std::vector<SweepRow> rows(ks.size());

  const double c0 = cfg.c0();
  auto run_one = [&](size_t i) {
    MacroConfig fc = cfg;
    fc.k0 = ks[i];
    SweepRow row;
    row.k0 = ks[i];
    row.freq_hz = ks[i] * c0 / (2.0 * 3.14159265358979323846);
    try {
      const MacroSolution hom = solve_macro(spaces, coeffs, fc);
      row.h_hom = measurement_norm2(hom, fc);
      const ReferenceSolution ref = solve_reference(array, materials, fc);
      row.h_ref = measurement_norm2(ref, fc);
      row.rel_err = std::abs(row.h_hom - row.h_ref) / row.h_ref;
    } catch (const std::exception&) {
      row.h_hom = row.h_ref = row.rel_err = std::nan("");
    }
    rows[i] = row;
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < ks.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < ks.size(); i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "'");
  os << "k0,freq_hz,h_hom,h_ref,rel_err\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k0, r.freq_hz,
                  r.h_hom, r.h_ref, r.rel_err);
    os << buf;
  }
}

}  // namespace metasurf
