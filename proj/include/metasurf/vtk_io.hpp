#ifndef METASURF_VTK_IO_HPP
#define METASURF_VTK_IO_HPP

#include <complex>
#include <string>
#include <vector>

#include "metasurf/mesh.hpp"

namespace metasurf {

// Legacy ASCII VTK UNSTRUCTURED_GRID writer/reader. Points are written as
// float64 with full round-trip precision; the triangle region label goes to
// CELL_DATA "region"; named nodal fields go to POINT_DATA. Complex fields are
// split into "<name>_re", "<name>_im", "<name>_abs".
class VtkFile {
 public:
  explicit VtkFile(const TriMesh& mesh) : mesh_(&mesh) {}

  void add_point_field(const std::string& name, const std::vector<double>& values);
  void add_point_field(const std::string& name,
                       const std::vector<std::complex<double>>& values);
  void add_cell_field(const std::string& name, const std::vector<double>& values);

  void write(const std::string& path) const;

 private:
  const TriMesh* mesh_;
  std::vector<std::pair<std::string, std::vector<double>>> point_fields_;
  std::vector<std::pair<std::string, std::vector<double>>> cell_fields_;
};

struct VtkContents {
  TriMesh mesh;
  std::vector<std::pair<std::string, std::vector<double>>> point_fields;
};

VtkContents read_vtk(const std::string& path);

void write_mesh_vtk(const TriMesh& mesh, const std::string& path);

}  // namespace metasurf

#endif
