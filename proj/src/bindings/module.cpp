#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metasurf/adjoint.hpp"
#include "metasurf/config.hpp"
#include "metasurf/optimizer.hpp"
#include "metasurf/reference.hpp"
#include "metasurf/vtk_io.hpp"

namespace py = pybind11;
using namespace metasurf;

namespace {

py::array_t<double> nodes_array(const TriMesh& m) {
  py::array_t<double> out({m.num_nodes(), 2});
  auto r = out.mutable_unchecked<2>();
  for (int i = 0; i < m.num_nodes(); ++i) {
    r(i, 0) = m.nodes[i].x;
    r(i, 1) = m.nodes[i].y;
  }
  return out;
}

py::array_t<int> triangles_array(const TriMesh& m) {
  py::array_t<int> out({m.num_triangles(), 3});
  auto r = out.mutable_unchecked<2>();
  for (int i = 0; i < m.num_triangles(); ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = m.triangles[i].v[k];
  return out;
}

std::vector<double> to_vector(const py::array_t<double>& a) {
  std::vector<double> v(a.size());
  auto r = a.unchecked<1>();
  for (py::ssize_t i = 0; i < a.size(); ++i) v[i] = r(i);
  return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Acoustic metasurface homogenization, analysis, and unit-cell "
            "optimization kernels";

  py::class_<MaterialPair>(m, "MaterialPair")
      .def(py::init<>())
      .def_readwrite("rho_air", &MaterialPair::rho_air)
      .def_readwrite("K_air", &MaterialPair::K_air)
      .def_readwrite("rho_elastic", &MaterialPair::rho_elastic)
      .def_readwrite("K_elastic", &MaterialPair::K_elastic);

  py::class_<HomogenizedCoeffs>(m, "HomogenizedCoeffs")
      .def(py::init<>())
      .def_readwrite("A11", &HomogenizedCoeffs::A11)
      .def_readwrite("B1", &HomogenizedCoeffs::B1)
      .def_readwrite("Kinv", &HomogenizedCoeffs::Kinv)
      .def_readwrite("F", &HomogenizedCoeffs::F)
      .def("__repr__", [](const HomogenizedCoeffs& c) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "HomogenizedCoeffs(A11=%.6g, B1=%.6g, Kinv=%.6g, F=%.6g)",
                      c.A11, c.B1, c.Kinv, c.F);
        return std::string(buf);
      });

  py::class_<TriMesh, std::shared_ptr<TriMesh>>(m, "TriMesh")
      .def_property_readonly("num_nodes", &TriMesh::num_nodes)
      .def_property_readonly("num_triangles", &TriMesh::num_triangles)
      .def("total_area", &TriMesh::total_area)
      .def("elastic_area", [](const TriMesh& m) { return m.region_area(Region::Elastic); })
      .def("nodes", &nodes_array)
      .def("triangles", &triangles_array)
      .def("write_vtk", [](const TriMesh& m, const std::string& path) {
        write_mesh_vtk(m, path);
      });

  m.def("generate_cell_mesh",
        [](int nx, int ny, double ndd) {
          return std::make_shared<TriMesh>(generate_cell_mesh(nx, ny, ndd));
        },
        py::arg("nx"), py::arg("ny"), py::arg("ndd_height") = 0.1);

  m.def("circle_levelset",
        [](std::shared_ptr<TriMesh> mesh, double cx, double cy, double r) {
          const LevelSet ls = initialize_circle(mesh, {cx, cy}, r);
          return py::array_t<double>(py::ssize_t(ls.phi.size()), ls.phi.data());
        },
        py::arg("mesh"), py::arg("cx"), py::arg("cy"), py::arg("radius"));

  m.def("conform_to_levelset",
        [](std::shared_ptr<TriMesh> mesh, const py::array_t<double>& phi) {
          const ConformResult r = conform_to_levelset(*mesh, to_vector(phi));
          return std::make_shared<TriMesh>(r.mesh);
        },
        py::arg("mesh"), py::arg("phi"));

  m.def("solve_cell",
        [](std::shared_ptr<TriMesh> mesh, const MaterialPair& mat) {
          const CellSolution sol = solve_cell_problems(*mesh, mat);
          const HomogenizedCoeffs c = homogenized_coefficients(sol, mat);
          const auto eta = sol.eta_nodal();
          const auto xi = sol.xi_nodal();
          return py::make_tuple(
              c, py::array_t<double>(py::ssize_t(eta.size()), eta.data()),
              py::array_t<double>(py::ssize_t(xi.size()), xi.data()));
        },
        py::arg("mesh"), py::arg("materials"),
        "Solve the two cell problems; returns (coefficients, eta, xi) with the "
        "microscale fields sampled at mesh nodes");

  m.def("solve_macro_transmission",
        [](const HomogenizedCoeffs& coeffs, double k0, const std::string& geometry,
           double P_in, double eps0, int nx, int ny) {
          MacroConfig cfg;
          cfg.k0 = k0;
          cfg.P_in = P_in;
          cfg.eps0 = eps0;
          cfg.nx = nx;
          cfg.ny = ny;
          cfg.geometry =
              geometry == "validation" ? MacroGeometry::Validation : MacroGeometry::Design;
          const MacroSpaces spaces = build_macro_spaces(cfg);
          const MacroSolution sol = solve_macro(spaces, coeffs, cfg);
          py::dict out;
          out["norm2_outlet1"] =
              boundary_norm2(*spaces.P_minus, sol.P_minus, BoundaryTag::Outlet1);
          if (cfg.geometry == MacroGeometry::Design)
            out["norm2_outlet2"] =
                boundary_norm2(*spaces.P_minus, sol.P_minus, BoundaryTag::Outlet2);
          out["flux_inlet"] = boundary_energy_flux(sol, BoundaryTag::Inlet, cfg);
          out["flux_outlet1"] = boundary_energy_flux(sol, BoundaryTag::Outlet1, cfg);
          if (cfg.geometry == MacroGeometry::Design)
            out["flux_outlet2"] = boundary_energy_flux(sol, BoundaryTag::Outlet2, cfg);
          out["residual"] = sol.residual;
          return out;
        },
        py::arg("coeffs"), py::arg("k0") = 25.0, py::arg("geometry") = "design",
        py::arg("P_in") = 1.0, py::arg("eps0") = 0.01, py::arg("nx") = 40,
        py::arg("ny") = 40);

  m.def("parse_config", [](const std::string& text) {
    const RunConfig cfg = parse_config_text(text);
    py::dict out;
    out["k0_per_m"] = cfg.k0_per_m;
    out["output_dir"] = cfg.output_dir;
    out["weight"] = cfg.weight;
    out["wiring"] = cfg.wiring;
    return out;
  });
}
