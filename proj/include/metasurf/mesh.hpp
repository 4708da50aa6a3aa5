#ifndef METASURF_MESH_HPP
#define METASURF_MESH_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metasurf/geometry.hpp"

namespace metasurf {

// Boundary tags cover both scales: the unit cell uses CellBottom/CellTop
// (the surfaces facing the incident and transmitted sides), PeriodicLeft/
// PeriodicRight; the macroscale uses Inlet, Outlet1, Outlet2, Interface, Wall.
enum class BoundaryTag : std::uint8_t {
  Inlet,
  Outlet1,
  Outlet2,
  Interface,   // homogenized metasurface line between the two half-domains
  CellBottom,  // I_y+ : faces the incident half-domain
  CellTop,     // I_y- : faces the transmitted half-domain
  PeriodicLeft,
  PeriodicRight,
  Wall,
};

const char* to_string(BoundaryTag tag);

// Region labels; material role is derived from them (see material_role).
enum class Region : std::uint8_t {
  Air = 0,
  Elastic = 1,
  NonDesignAir = 2,  // cell buffer strips, always air, excluded from design
  OmegaPlus = 3,     // incident half-domain (background air)
  OmegaMinus = 4,    // transmitted half-domain (background air)
};

enum class MaterialRole : std::uint8_t { Air, Elastic };

inline MaterialRole material_role(Region r) {
  return r == Region::Elastic ? MaterialRole::Elastic : MaterialRole::Air;
}

enum class MeshScale : std::uint8_t { Micro, Macro };

struct Triangle {
  std::array<int, 3> v;
  Region region = Region::Air;
};

struct BoundaryEdge {
  std::array<int, 2> v;
  BoundaryTag tag = BoundaryTag::Wall;
};

struct TriMesh {
  std::vector<Vec2> nodes;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  MeshScale scale = MeshScale::Micro;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    return metasurf::triangle_area(nodes[tri.v[0]], nodes[tri.v[1]], nodes[tri.v[2]]);
  }
  double total_area() const;
  double region_area(Region r) const;
  Vec2 centroid(int t) const {
    const auto& tri = triangles[t];
    return (nodes[tri.v[0]] + nodes[tri.v[1]] + nodes[tri.v[2]]) * (1.0 / 3.0);
  }

  std::vector<int> boundary_nodes(BoundaryTag tag) const;

  // Checks orientation, boundary closure, and tag sanity; throws on violation.
  void validate() const;
};

struct PeriodicMap {
  // pairs of (master node id, slave node id) identified across the two
  // periodic sides; master on PeriodicLeft, slave on PeriodicRight.
  std::vector<std::pair<int, int>> pairs;
  int axis = 0;  // identified coordinate (0 = y1)
};

class MeshError : public std::runtime_error {
 public:
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

// Rule assigning tags to boundary edges of generated rectangles; the argument
// is the edge midpoint.
using TagRule = std::function<BoundaryTag(const Vec2&)>;

TagRule all_wall_tags();

// Structured triangulation of [x0, x0+width] x [y0, y0+height] with nx-by-ny
// cells split into 2 triangles each.
TriMesh generate_rect_mesh(double width, double height, int nx, int ny,
                           const TagRule& tags, Region region = Region::Air,
                           double x0 = 0.0, double y0 = 0.0,
                           MeshScale scale = MeshScale::Micro);

// Unit-cell base mesh on [0,1]^2: non-design air strips of height ndd below
// y=ndd and above y=1-ndd, design domain in between. ny*ndd must be integral
// so the region boundary falls on node rows.
TriMesh generate_cell_mesh(int nx, int ny, double ndd_height = 0.1);

PeriodicMap pair_periodic_nodes(const TriMesh& mesh,
                                BoundaryTag left = BoundaryTag::PeriodicLeft,
                                BoundaryTag right = BoundaryTag::PeriodicRight,
                                double tol = 1e-12);

// Longest-edge bisection refinement of all triangles whose circumdisk
// intersects the disk (center, radius), until their longest edge is below
// h_target. Boundary tags and region labels are propagated to children.
TriMesh refine_around_disk(const TriMesh& mesh, const Vec2& center,
                           double radius, double h_target);

// Design-domain extent of the cell mesh (y-range of the Air/Elastic regions).
struct DesignBand {
  double y_lo = 0.1;
  double y_hi = 0.9;
  bool contains(const Vec2& p, double tol = 1e-12) const {
    return p.y >= y_lo - tol && p.y <= y_hi + tol;
  }
};

DesignBand design_band(const TriMesh& cell_mesh);

}  // namespace metasurf

#endif
