#include "metasurf/vtk_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace metasurf {

namespace {

// Shortest decimal that round-trips a double.
std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void VtkFile::add_point_field(const std::string& name, const std::vector<double>& values) {
  if (values.size() != mesh_->nodes.size())
    throw MeshError("vtk: point field '" + name + "' size mismatch");
  point_fields_.emplace_back(name, values);
}

void VtkFile::add_point_field(const std::string& name,
                              const std::vector<std::complex<double>>& values) {
  if (values.size() != mesh_->nodes.size())
    throw MeshError("vtk: point field '" + name + "' size mismatch");
  std::vector<double> re(values.size()), im(values.size()), ab(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    re[i] = values[i].real();
    im[i] = values[i].imag();
    ab[i] = std::abs(values[i]);
  }
  point_fields_.emplace_back(name + "_re", std::move(re));
  point_fields_.emplace_back(name + "_im", std::move(im));
  point_fields_.emplace_back(name + "_abs", std::move(ab));
}

void VtkFile::add_cell_field(const std::string& name, const std::vector<double>& values) {
  if (values.size() != mesh_->triangles.size())
    throw MeshError("vtk: cell field '" + name + "' size mismatch");
  cell_fields_.emplace_back(name, values);
}

// Layout: triangle cells (type 5) first, then boundary edges as line cells
// (type 3). CELL_DATA "region" holds the region label for triangles and -1
// for lines; "tag" holds the boundary tag for lines and -1 for triangles.
void VtkFile::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw MeshError("vtk: cannot open '" + path + "' for writing");
  const TriMesh& m = *mesh_;
  const int ntri = m.num_triangles();
  const int nedge = static_cast<int>(m.boundary_edges.size());
  os << "# vtk DataFile Version 3.0\n";
  os << "metasurf field data\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.num_nodes() << " double\n";
  for (const auto& p : m.nodes)
    os << fmt_full(p.x) << " " << fmt_full(p.y) << " 0\n";
  os << "CELLS " << ntri + nedge << " " << 4 * ntri + 3 * nedge << "\n";
  for (const auto& t : m.triangles)
    os << "3 " << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
  for (const auto& e : m.boundary_edges)
    os << "2 " << e.v[0] << " " << e.v[1] << "\n";
  os << "CELL_TYPES " << ntri + nedge << "\n";
  for (int t = 0; t < ntri; ++t) os << "5\n";
  for (int e = 0; e < nedge; ++e) os << "3\n";

  os << "CELL_DATA " << ntri + nedge << "\n";
  os << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (const auto& t : m.triangles) os << static_cast<int>(t.region) << "\n";
  for (int e = 0; e < nedge; ++e) os << "-1\n";
  os << "SCALARS tag int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < ntri; ++t) os << "-1\n";
  for (const auto& e : m.boundary_edges) os << static_cast<int>(e.tag) << "\n";
  for (const auto& [name, vals] : cell_fields_) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : vals) os << fmt_full(v) << "\n";
    for (int e = 0; e < nedge; ++e) os << "0\n";
  }

  if (!point_fields_.empty()) {
    os << "POINT_DATA " << m.num_nodes() << "\n";
    for (const auto& [name, vals] : point_fields_) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : vals) os << fmt_full(v) << "\n";
    }
  }
  if (!os) throw MeshError("vtk: write to '" + path + "' failed");
}

void write_mesh_vtk(const TriMesh& mesh, const std::string& path) {
  VtkFile(mesh).write(path);
}

VtkContents read_vtk(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MeshError("vtk: cannot open '" + path + "'");
  VtkContents out;
  std::string line;
  auto expect_line = [&](const char* what) {
    if (!std::getline(is, line)) throw MeshError(std::string("vtk: truncated before ") + what);
    return line;
  };
  expect_line("header");
  expect_line("title");
  if (expect_line("format") != "ASCII") throw MeshError("vtk: only ASCII supported");
  if (expect_line("dataset").find("UNSTRUCTURED_GRID") == std::string::npos)
    throw MeshError("vtk: only UNSTRUCTURED_GRID supported");

  std::string word;
  int npoints = 0;
  is >> word >> npoints >> word;  // POINTS n double
  out.mesh.nodes.resize(npoints);
  for (int i = 0; i < npoints; ++i) {
    double x, y, z;
    is >> x >> y >> z;
    out.mesh.nodes[i] = {x, y};
  }
  int ncells = 0, total = 0;
  is >> word >> ncells >> total;  // CELLS
  std::vector<std::vector<int>> conn(ncells);
  for (int c = 0; c < ncells; ++c) {
    int k;
    is >> k;
    conn[c].resize(k);
    for (int j = 0; j < k; ++j) is >> conn[c][j];
  }
  int ntypes = 0;
  is >> word >> ntypes;  // CELL_TYPES
  std::vector<int> kinds(ntypes);
  for (auto& k : kinds) is >> k;
  std::vector<int> cell_index(ncells, -1);
  for (int c = 0; c < ncells; ++c) {
    if (kinds[c] == 5) {
      cell_index[c] = static_cast<int>(out.mesh.triangles.size());
      out.mesh.triangles.push_back({{conn[c][0], conn[c][1], conn[c][2]}, Region::Air});
    } else if (kinds[c] == 3) {
      cell_index[c] = static_cast<int>(out.mesh.boundary_edges.size());
      out.mesh.boundary_edges.push_back({{conn[c][0], conn[c][1]}, BoundaryTag::Wall});
    } else {
      throw MeshError("vtk: unsupported cell type");
    }
  }

  bool in_cell_data = false;
  while (is >> word) {
    if (word == "CELL_DATA") {
      int n;
      is >> n;
      in_cell_data = true;
    } else if (word == "POINT_DATA") {
      int n;
      is >> n;
      in_cell_data = false;
    } else if (word == "SCALARS") {
      std::string name, type;
      int comps;
      is >> name >> type >> comps;
      is >> word >> word;  // LOOKUP_TABLE default
      if (in_cell_data) {
        for (int c = 0; c < ncells; ++c) {
          double v;
          is >> v;
          if (name == "region" && kinds[c] == 5)
            out.mesh.triangles[cell_index[c]].region =
                static_cast<Region>(static_cast<int>(v));
          if (name == "tag" && kinds[c] == 3)
            out.mesh.boundary_edges[cell_index[c]].tag =
                static_cast<BoundaryTag>(static_cast<int>(v));
        }
      } else {
        std::vector<double> vals(out.mesh.nodes.size());
        for (auto& v : vals) is >> v;
        out.point_fields.emplace_back(name, std::move(vals));
      }
    } else {
      throw MeshError("vtk: unexpected section '" + word + "'");
    }
  }
  return out;
}

}  // namespace metasurf
