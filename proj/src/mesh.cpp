#include "metasurf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace metasurf {

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Inlet: return "inlet";
    case BoundaryTag::Outlet1: return "outlet1";
    case BoundaryTag::Outlet2: return "outlet2";
    case BoundaryTag::Interface: return "interface";
    case BoundaryTag::CellBottom: return "cell_bottom";
    case BoundaryTag::CellTop: return "cell_top";
    case BoundaryTag::PeriodicLeft: return "periodic_left";
    case BoundaryTag::PeriodicRight: return "periodic_right";
    case BoundaryTag::Wall: return "wall";
  }
  return "unknown";
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

double TriMesh::region_area(Region r) const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t)
    if (triangles[t].region == r) a += triangle_area(t);
  return a;
}

std::vector<int> TriMesh::boundary_nodes(BoundaryTag tag) const {
  std::set<int> ids;
  for (const auto& e : boundary_edges)
    if (e.tag == tag) {
      ids.insert(e.v[0]);
      ids.insert(e.v[1]);
    }
  return {ids.begin(), ids.end()};
}

void TriMesh::validate() const {
  for (int t = 0; t < num_triangles(); ++t) {
    if (triangle_area(t) <= 0.0) {
      std::ostringstream os;
      os << "triangle " << t << " has non-positive area " << triangle_area(t);
      throw MeshError(os.str());
    }
  }
  // Every boundary edge must belong to exactly one triangle, and the set of
  // element edges used exactly once must coincide with the tagged edges.
  std::map<std::pair<int, int>, int> edge_use;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) edge_use[key(tri.v[k], tri.v[(k + 1) % 3])]++;
  std::set<std::pair<int, int>> hull;
  for (const auto& [e, uses] : edge_use) {
    if (uses > 2) throw MeshError("non-manifold edge");
    if (uses == 1) hull.insert(e);
  }
  std::set<std::pair<int, int>> tagged;
  for (const auto& e : boundary_edges) {
    if (!tagged.insert(key(e.v[0], e.v[1])).second)
      throw MeshError("duplicate boundary edge");
  }
  if (tagged != hull) throw MeshError("boundary edges do not cover the hull exactly once");
}

TagRule all_wall_tags() {
  return [](const Vec2&) { return BoundaryTag::Wall; };
}

TriMesh generate_rect_mesh(double width, double height, int nx, int ny,
                           const TagRule& tags, Region region, double x0,
                           double y0, MeshScale scale) {
  if (width <= 0.0 || height <= 0.0) throw MeshError("rect mesh: non-positive dimensions");
  if (nx < 1 || ny < 1) throw MeshError("rect mesh: non-positive cell counts");

  TriMesh m;
  m.scale = scale;
  m.nodes.reserve((nx + 1) * (ny + 1));
  const double hx = width / nx, hy = height / ny;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.push_back({x0 + i * hx, y0 + j * hy});

  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      // Alternating diagonals keep the pattern mirror-symmetric.
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({{a, b, c}, region});
        m.triangles.push_back({{a, c, d}, region});
      } else {
        m.triangles.push_back({{a, b, d}, region});
        m.triangles.push_back({{b, c, d}, region});
      }
    }

  auto add_edge = [&](int a, int b) {
    const Vec2 mid = (m.nodes[a] + m.nodes[b]) * 0.5;
    m.boundary_edges.push_back({{a, b}, tags(mid)});
  };
  for (int i = 0; i < nx; ++i) add_edge(id(i, 0), id(i + 1, 0));          // bottom
  for (int j = 0; j < ny; ++j) add_edge(id(nx, j), id(nx, j + 1));        // right
  for (int i = nx; i > 0; --i) add_edge(id(i, ny), id(i - 1, ny));        // top
  for (int j = ny; j > 0; --j) add_edge(id(0, j), id(0, j - 1));          // left
  return m;
}

TriMesh generate_cell_mesh(int nx, int ny, double ndd_height) {
  if (ndd_height < 0.0 || 2.0 * ndd_height >= 1.0)
    throw MeshError("cell mesh: invalid non-design strip height");
  const double rows = ndd_height * ny;
  if (std::abs(rows - std::round(rows)) > 1e-9)
    throw MeshError("cell mesh: ny*ndd_height must be integral");

  TagRule tags = [](const Vec2& mid) {
    const double tol = 1e-12;
    if (mid.y < tol) return BoundaryTag::CellBottom;
    if (mid.y > 1.0 - tol) return BoundaryTag::CellTop;
    if (mid.x < tol) return BoundaryTag::PeriodicLeft;
    return BoundaryTag::PeriodicRight;
  };
  TriMesh m = generate_rect_mesh(1.0, 1.0, nx, ny, tags, Region::Air);
  for (auto& tri : m.triangles) {
    const Vec2 c = (m.nodes[tri.v[0]] + m.nodes[tri.v[1]] + m.nodes[tri.v[2]]) * (1.0 / 3.0);
    if (c.y < ndd_height || c.y > 1.0 - ndd_height) tri.region = Region::NonDesignAir;
  }
  return m;
}

DesignBand design_band(const TriMesh& cell_mesh) {
  DesignBand band{1.0, 0.0};
  bool found = false;
  for (const auto& tri : cell_mesh.triangles) {
    if (tri.region == Region::NonDesignAir) continue;
    found = true;
    for (int k = 0; k < 3; ++k) {
      band.y_lo = std::min(band.y_lo, cell_mesh.nodes[tri.v[k]].y);
      band.y_hi = std::max(band.y_hi, cell_mesh.nodes[tri.v[k]].y);
    }
  }
  if (!found) throw MeshError("cell mesh has no design region");
  return band;
}

PeriodicMap pair_periodic_nodes(const TriMesh& mesh, BoundaryTag left,
                                BoundaryTag right, double tol) {
  const std::vector<int> ln = mesh.boundary_nodes(left);
  const std::vector<int> rn = mesh.boundary_nodes(right);
  if (ln.size() != rn.size()) {
    std::ostringstream os;
    os << "periodic pairing: node count mismatch (" << ln.size() << " on "
       << to_string(left) << ", " << rn.size() << " on " << to_string(right) << ")";
    throw MeshError(os.str());
  }
  auto by_y = [&mesh](int a, int b) {
    return mesh.nodes[a].y < mesh.nodes[b].y ||
           (mesh.nodes[a].y == mesh.nodes[b].y && a < b);
  };
  std::vector<int> ls = ln, rs = rn;
  std::sort(ls.begin(), ls.end(), by_y);
  std::sort(rs.begin(), rs.end(), by_y);

  PeriodicMap map;
  map.axis = 0;
  map.pairs.reserve(ls.size());
  for (size_t k = 0; k < ls.size(); ++k) {
    const double dy = std::abs(mesh.nodes[ls[k]].y - mesh.nodes[rs[k]].y);
    if (dy > tol) {
      std::ostringstream os;
      os << "periodic pairing: coordinate mismatch at node " << ls[k] << " (y="
         << mesh.nodes[ls[k]].y << ") vs node " << rs[k] << " (y="
         << mesh.nodes[rs[k]].y << "), |dy|=" << dy;
      throw MeshError(os.str());
    }
    map.pairs.emplace_back(ls[k], rs[k]);
  }
  return map;
}

namespace {

struct Refiner {
  TriMesh mesh;
  std::map<std::pair<int, int>, BoundaryTag> boundary_tag;

  explicit Refiner(const TriMesh& m) : mesh(m) {
    for (const auto& e : m.boundary_edges)
      boundary_tag[key(e.v[0], e.v[1])] = e.tag;
  }

  static std::pair<int, int> key(int a, int b) {
    return {std::min(a, b), std::max(a, b)};
  }

  int longest_edge(const Triangle& t) const {
    double best = -1.0;
    int k_best = 0;
    for (int k = 0; k < 3; ++k) {
      const double l = (mesh.nodes[t.v[(k + 1) % 3]] - mesh.nodes[t.v[k]]).norm();
      if (l > best) { best = l; k_best = k; }
    }
    return k_best;
  }

  double longest_edge_len(const Triangle& t) const {
    const int k = longest_edge(t);
    return (mesh.nodes[t.v[(k + 1) % 3]] - mesh.nodes[t.v[k]]).norm();
  }

  int find_neighbor(int t, int a, int b) const {
    for (int s = 0; s < mesh.num_triangles(); ++s) {
      if (s == t) continue;
      const auto& o = mesh.triangles[s].v;
      int shared = 0;
      for (int q = 0; q < 3; ++q) shared += (o[q] == a || o[q] == b) ? 1 : 0;
      if (shared == 2) return s;
    }
    return -1;
  }

  void split_one(int t, int a, int b, int c, int mid) {
    const Region reg = mesh.triangles[t].region;
    mesh.triangles[t] = {{a, mid, c}, reg};
    mesh.triangles.push_back({{mid, b, c}, reg});
  }

  int create_midpoint(int a, int b, std::map<std::pair<int, int>, int>& midpoints) {
    const int mid = mesh.num_nodes();
    mesh.nodes.push_back((mesh.nodes[a] + mesh.nodes[b]) * 0.5);
    midpoints[key(a, b)] = mid;
    auto bt = boundary_tag.find(key(a, b));
    if (bt != boundary_tag.end()) {
      const BoundaryTag tag = bt->second;
      boundary_tag.erase(bt);
      boundary_tag[key(a, mid)] = tag;
      boundary_tag[key(mid, b)] = tag;
    }
    return mid;
  }

  // Bisect triangle t across its longest edge. The neighbor across that edge
  // is split in the same step (recursively pre-refined until its longest
  // edge is the shared one), so the triangulation stays conforming.
  void bisect(int t, std::map<std::pair<int, int>, int>& midpoints, int depth = 0) {
    if (depth > 64) throw MeshError("refinement recursion exceeded");
    const Triangle tri = mesh.triangles[t];
    const int k = longest_edge(tri);
    const int a = tri.v[k], b = tri.v[(k + 1) % 3], c = tri.v[(k + 2) % 3];

    auto it = midpoints.find(key(a, b));
    if (it != midpoints.end()) {
      // The neighbor already split this edge; splitting t restores conformity.
      split_one(t, a, b, c, it->second);
      return;
    }
    const int nb = find_neighbor(t, a, b);
    if (nb < 0) {
      split_one(t, a, b, c, create_midpoint(a, b, midpoints));
      return;
    }
    const Triangle ot = mesh.triangles[nb];
    const int ok = longest_edge(ot);
    if (key(ot.v[ok], ot.v[(ok + 1) % 3]) != key(a, b)) {
      bisect(nb, midpoints, depth + 1);
      bisect(t, midpoints, depth + 1);  // retry against the refined neighborhood
      return;
    }
    const int mid = create_midpoint(a, b, midpoints);
    split_one(t, a, b, c, mid);
    split_one(nb, ot.v[ok], ot.v[(ok + 1) % 3], ot.v[(ok + 2) % 3], mid);
  }
};

}  // namespace

TriMesh refine_around_disk(const TriMesh& mesh, const Vec2& center,
                           double radius, double h_target) {
  if (h_target <= 0.0) throw MeshError("refine: h_target must be positive");
  Refiner r(mesh);
  std::map<std::pair<int, int>, int> midpoints;
  bool changed = true;
  while (changed) {
    changed = false;
    const int n = r.mesh.num_triangles();
    for (int t = 0; t < n; ++t) {
      const Triangle& tri = r.mesh.triangles[t];
      double dmin = 1e300;
      double diam = 0.0;
      for (int k = 0; k < 3; ++k) {
        dmin = std::min(dmin, (r.mesh.nodes[tri.v[k]] - center).norm());
        diam = std::max(diam, (r.mesh.nodes[tri.v[(k + 1) % 3]] - r.mesh.nodes[tri.v[k]]).norm());
      }
      if (dmin > radius + diam) continue;
      if (diam <= h_target) continue;
      r.bisect(t, midpoints);
      changed = true;
    }
  }
  // Rebuild boundary edge list from the surviving tag map.
  r.mesh.boundary_edges.clear();
  for (const auto& [e, tag] : r.boundary_tag)
    r.mesh.boundary_edges.push_back({{e.first, e.second}, tag});
  return r.mesh;
}

}  // namespace metasurf
