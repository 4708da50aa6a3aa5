#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metasurf/mesh.hpp"
#include "metasurf/vtk_io.hpp"

using namespace metasurf;

TEST_CASE("smallest structured mesh") {
  const TriMesh m = generate_rect_mesh(1.0, 1.0, 1, 1, all_wall_tags());
  CHECK(m.num_triangles() == 2);
  CHECK(m.num_nodes() == 4);
  CHECK(m.boundary_edges.size() == 4);
  m.validate();
}

TEST_CASE("counting formula") {
  const TriMesh m = generate_rect_mesh(1.0, 1.0, 10, 10, all_wall_tags());
  CHECK(m.num_triangles() == 200);
  CHECK(m.num_nodes() == 121);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
  m.validate();
}

TEST_CASE("tagging is a partition") {
  TagRule tags = [](const Vec2& mid) {
    return mid.y > 0.5 - 1e-12 ? BoundaryTag::Inlet : BoundaryTag::Wall;
  };
  const TriMesh m = generate_rect_mesh(0.5, 0.5, 50, 50, tags);
  int inlet = 0, wall = 0;
  for (const auto& e : m.boundary_edges) {
    if (e.tag == BoundaryTag::Inlet) {
      ++inlet;
      CHECK(m.nodes[e.v[0]].y == doctest::Approx(0.5));
      CHECK(m.nodes[e.v[1]].y == doctest::Approx(0.5));
    } else {
      ++wall;
    }
  }
  CHECK(inlet == 50);
  CHECK(inlet + wall == 200);
  m.validate();
}

TEST_CASE("rejects bad dimensions") {
  CHECK_THROWS_AS(generate_rect_mesh(0.0, 1.0, 1, 1, all_wall_tags()), MeshError);
  CHECK_THROWS_AS(generate_rect_mesh(1.0, 1.0, 0, 1, all_wall_tags()), MeshError);
  CHECK_THROWS_AS(generate_rect_mesh(1.0, -2.0, 1, 1, all_wall_tags()), MeshError);
}

TEST_CASE("periodic pairing on the unit square") {
  const TriMesh m = generate_cell_mesh(4, 4, 0.25);
  const PeriodicMap map = pair_periodic_nodes(m);
  CHECK(map.pairs.size() == 5);
  for (const auto& [l, r] : map.pairs) {
    CHECK(m.nodes[l].x == doctest::Approx(0.0));
    CHECK(m.nodes[r].x == doctest::Approx(1.0));
    CHECK(m.nodes[l].y == doctest::Approx(m.nodes[r].y).epsilon(1e-14));
  }
}

TEST_CASE("pairing rejects refined-on-one-side meshes") {
  // Two rectangles of different vertical density glued horizontally.
  TagRule tags = [](const Vec2& mid) {
    const double tol = 1e-12;
    if (mid.x < tol) return BoundaryTag::PeriodicLeft;
    if (mid.x > 1.0 - tol) return BoundaryTag::PeriodicRight;
    return BoundaryTag::Wall;
  };
  TriMesh left = generate_rect_mesh(0.5, 1.0, 2, 4, tags);
  TriMesh right = generate_rect_mesh(0.5, 1.0, 2, 3, tags, Region::Air, 0.5);
  const int off = left.num_nodes();
  left.nodes.insert(left.nodes.end(), right.nodes.begin(), right.nodes.end());
  for (const auto& t : right.triangles)
    left.triangles.push_back({{t.v[0] + off, t.v[1] + off, t.v[2] + off}, t.region});
  for (const auto& e : right.boundary_edges)
    left.boundary_edges.push_back({{e.v[0] + off, e.v[1] + off}, e.tag});
  CHECK_THROWS_WITH_AS(pair_periodic_nodes(left),
                       doctest::Contains("node count mismatch"), MeshError);
}

TEST_CASE("cell mesh regions") {
  const TriMesh m = generate_cell_mesh(10, 10, 0.1);
  CHECK(m.region_area(Region::NonDesignAir) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.region_area(Region::Air) == doctest::Approx(0.8).epsilon(1e-12));
  const DesignBand band = design_band(m);
  CHECK(band.y_lo == doctest::Approx(0.1));
  CHECK(band.y_hi == doctest::Approx(0.9));
  CHECK_THROWS_AS(generate_cell_mesh(10, 10, 0.15), MeshError);  // off-grid strip
}

TEST_CASE("refinement around a disk") {
  const TriMesh m = generate_cell_mesh(10, 10, 0.1);
  const Vec2 c{0.5, 0.5};
  const TriMesh r = refine_around_disk(m, c, 0.05, 0.02);
  r.validate();
  CHECK(r.num_triangles() > m.num_triangles());
  CHECK(r.total_area() == doctest::Approx(1.0).epsilon(1e-12));
  // All triangles near the disk are small enough.
  for (int t = 0; t < r.num_triangles(); ++t) {
    const auto& tri = r.triangles[t];
    double dmin = 1e300, diam = 0.0;
    for (int k = 0; k < 3; ++k) {
      dmin = std::min(dmin, (r.nodes[tri.v[k]] - c).norm());
      diam = std::max(diam,
                      (r.nodes[tri.v[(k + 1) % 3]] - r.nodes[tri.v[k]]).norm());
    }
    if (dmin < 0.05) CHECK(diam <= 0.02 + 1e-12);
  }
}

TEST_CASE("vtk mesh round trip is exact") {
  const TriMesh m = generate_cell_mesh(7, 7, 1.0 / 7.0);
  const std::string path = "mesh_roundtrip_test.vtk";
  write_mesh_vtk(m, path);
  const VtkContents back = read_vtk(path);
  REQUIRE(back.mesh.num_nodes() == m.num_nodes());
  REQUIRE(back.mesh.num_triangles() == m.num_triangles());
  REQUIRE(back.mesh.boundary_edges.size() == m.boundary_edges.size());
  for (int i = 0; i < m.num_nodes(); ++i) {
    CHECK(back.mesh.nodes[i].x == m.nodes[i].x);  // bitwise
    CHECK(back.mesh.nodes[i].y == m.nodes[i].y);
  }
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(back.mesh.triangles[t].v == m.triangles[t].v);
    CHECK(back.mesh.triangles[t].region == m.triangles[t].region);
  }
  for (size_t e = 0; e < m.boundary_edges.size(); ++e)
    CHECK(back.mesh.boundary_edges[e].tag == m.boundary_edges[e].tag);
  std::filesystem::remove(path);
}
