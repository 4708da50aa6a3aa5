#include "metasurf/conform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace metasurf {

namespace {

bool is_design(Region r) { return r == Region::Air || r == Region::Elastic; }

struct EdgeKey {
  int a, b;  // a < b
  bool operator<(const EdgeKey& o) const {
    return a < o.a || (a == o.a && b < o.b);
  }
};

EdgeKey make_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

ConformResult conform_to_levelset(const TriMesh& base, const std::vector<double>& phi_in,
                                  const ConformOptions& opts) {
  if (phi_in.size() != base.nodes.size())
    throw MeshError("conform: phi size does not match node count");

  std::vector<double> phi = phi_in;

  // Periodic level sets are synchronized bitwise across the seam so that
  // side cuts mirror exactly and pairing survives the split. Genuinely
  // non-periodic inputs are left alone (pairing is then the caller's risk).
  std::vector<int> partner(base.nodes.size(), -1);
  {
    bool has_periodic = false;
    for (const auto& e : base.boundary_edges)
      if (e.tag == BoundaryTag::PeriodicLeft) { has_periodic = true; break; }
    if (has_periodic) {
      const PeriodicMap pairs = pair_periodic_nodes(base);
      for (const auto& [master, slave] : pairs.pairs) {
        if (std::abs(phi[master] - phi[slave]) <= 1e-9) phi[slave] = phi[master];
        partner[master] = slave;
        partner[slave] = master;
      }
    }
  }

  // Snap nodes sitting within snap_fraction of an edge cut onto the contour.
  // Two passes settle cascades deterministically (marks collected per pass).
  // Marks propagate across periodic pairs: a seam node's interior
  // neighborhood differs from its partner's, but the sides must cut alike.
  for (int pass = 0; pass < 2; ++pass) {
    std::set<int> marks;
    for (const auto& tri : base.triangles) {
      if (!is_design(tri.region)) continue;
      for (int k = 0; k < 3; ++k) {
        const int a = tri.v[k], b = tri.v[(k + 1) % 3];
        if (phi[a] == 0.0 || phi[b] == 0.0) continue;
        if ((phi[a] > 0.0) == (phi[b] > 0.0)) continue;
        const double t = phi[a] / (phi[a] - phi[b]);
        if (t < opts.snap_fraction) marks.insert(a);
        if (t > 1.0 - opts.snap_fraction) marks.insert(b);
      }
    }
    if (marks.empty()) break;
    for (int n : std::set<int>(marks))
      if (partner[n] >= 0) marks.insert(partner[n]);
    for (int n : marks) phi[n] = 0.0;
  }

  TriMesh out;
  out.nodes = base.nodes;
  out.scale = base.scale;
  std::vector<double> phi_out = phi;
  std::vector<char> on_interface(base.nodes.size(), 0);
  for (size_t n = 0; n < phi.size(); ++n)
    if (phi[n] == 0.0) on_interface[n] = 1;

  // Cut nodes shared across triangles; endpoints ordered by (y, x) so that
  // periodic mirror edges produce bitwise-identical cut coordinates.
  std::map<EdgeKey, int> cut_node;
  bool any_cut = false;
  auto get_cut = [&](int a, int b) {
    const EdgeKey key = make_key(a, b);
    auto it = cut_node.find(key);
    if (it != cut_node.end()) return it->second;
    int lo = a, hi = b;
    const Vec2& pa = out.nodes[lo];
    const Vec2& pb = out.nodes[hi];
    if (pb.y < pa.y || (pb.y == pa.y && pb.x < pa.x)) std::swap(lo, hi);
    const double t = phi[lo] / (phi[lo] - phi[hi]);
    const Vec2 p = out.nodes[lo] + t * (out.nodes[hi] - out.nodes[lo]);
    const int id = out.num_nodes();
    out.nodes.push_back(p);
    phi_out.push_back(0.0);
    on_interface.push_back(1);
    cut_node[key] = id;
    any_cut = true;
    return id;
  };
  auto find_cut = [&](int a, int b) {
    auto it = cut_node.find(make_key(a, b));
    return it == cut_node.end() ? -1 : it->second;
  };

  const double area_floor = opts.area_floor_rel * base.total_area();

  // Pieces of each original triangle, emitted in original order at the end.
  std::vector<std::vector<Triangle>> pieces(base.triangles.size());

  auto push_tri = [&](std::vector<Triangle>& dst, int a, int b, int c, Region reg) {
    const double area = triangle_area(out.nodes[a], out.nodes[b], out.nodes[c]);
    // The snapping pass keeps every cut at least snap_fraction away from the
    // vertices, so sub-triangles stay well above the area floor.
    if (std::abs(area) < area_floor)
      throw MeshError("conform: degenerate split survived snapping");
    if (area < 0.0) std::swap(b, c);
    dst.push_back({{a, b, c}, reg});
  };

  auto label_of = [&](int a, int b, int c) {
    const double s = phi_out[a] + phi_out[b] + phi_out[c];
    return s > 0.0 ? Region::Elastic : Region::Air;
  };

  // Splits the quad (m1, v1, v2, m2) along the better diagonal.
  auto push_quad = [&](std::vector<Triangle>& dst, int m1, int v1, int v2, int m2,
                       Region reg) {
    const double q1 =
        std::min(triangle_quality(out.nodes[m1], out.nodes[v1], out.nodes[v2]),
                 triangle_quality(out.nodes[m1], out.nodes[v2], out.nodes[m2]));
    const double q2 =
        std::min(triangle_quality(out.nodes[m1], out.nodes[v1], out.nodes[m2]),
                 triangle_quality(out.nodes[v1], out.nodes[v2], out.nodes[m2]));
    if (q1 >= q2) {
      push_tri(dst, m1, v1, v2, reg);
      push_tri(dst, m1, v2, m2, reg);
    } else {
      push_tri(dst, m1, v1, m2, reg);
      push_tri(dst, v1, v2, m2, reg);
    }
  };

  // Pass A: cut the design triangles against the zero set.
  for (size_t ti = 0; ti < base.triangles.size(); ++ti) {
    const auto& tri = base.triangles[ti];
    if (!is_design(tri.region)) continue;
    const int a = tri.v[0], b = tri.v[1], c = tri.v[2];
    const double fa = phi[a], fb = phi[b], fc = phi[c];
    const bool has_pos = fa > 0.0 || fb > 0.0 || fc > 0.0;
    const bool has_neg = fa < 0.0 || fb < 0.0 || fc < 0.0;
    if (!(has_pos && has_neg)) {
      pieces[ti].push_back({{a, b, c}, has_pos ? Region::Elastic : Region::Air});
      continue;
    }
    std::array<int, 3> v = {a, b, c};
    std::array<double, 3> f = {fa, fb, fc};
    const int nzero = (fa == 0.0) + (fb == 0.0) + (fc == 0.0);
    if (nzero == 1) {
      while (f[0] != 0.0) {
        std::rotate(v.begin(), v.begin() + 1, v.end());
        std::rotate(f.begin(), f.begin() + 1, f.end());
      }
      // v0 on the contour, v1/v2 of opposite strict signs: one cut.
      const int m = get_cut(v[1], v[2]);
      push_tri(pieces[ti], v[0], v[1], m, label_of(v[0], v[1], m));
      push_tri(pieces[ti], v[0], m, v[2], label_of(v[0], m, v[2]));
      continue;
    }
    // No zeros: the lone vertex carries the minority sign.
    const int npos = (fa > 0.0) + (fb > 0.0) + (fc > 0.0);
    const bool lone_positive = npos == 1;
    while ((f[0] > 0.0) != lone_positive) {
      std::rotate(v.begin(), v.begin() + 1, v.end());
      std::rotate(f.begin(), f.begin() + 1, f.end());
    }
    const int m01 = get_cut(v[0], v[1]);
    const int m02 = get_cut(v[0], v[2]);
    push_tri(pieces[ti], v[0], m01, m02,
             lone_positive ? Region::Elastic : Region::Air);
    push_quad(pieces[ti], m01, v[1], v[2], m02,
              lone_positive ? Region::Air : Region::Elastic);
  }

  // Pass B: non-design triangles only split where a neighboring design cut
  // landed on a shared edge (the region label is preserved).
  for (size_t ti = 0; ti < base.triangles.size(); ++ti) {
    const auto& tri = base.triangles[ti];
    if (is_design(tri.region)) continue;
    const std::array<int, 3> v = tri.v;
    const std::array<int, 3> cuts = {find_cut(v[0], v[1]), find_cut(v[1], v[2]),
                                     find_cut(v[2], v[0])};
    const int ncuts = (cuts[0] >= 0) + (cuts[1] >= 0) + (cuts[2] >= 0);
    if (ncuts == 0) {
      pieces[ti].push_back(tri);
    } else if (ncuts == 1) {
      int k = cuts[0] >= 0 ? 0 : (cuts[1] >= 0 ? 1 : 2);
      const int m = cuts[k];
      push_tri(pieces[ti], v[(k + 2) % 3], v[k], m, tri.region);
      push_tri(pieces[ti], v[(k + 2) % 3], m, v[(k + 1) % 3], tri.region);
    } else if (ncuts == 2) {
      const int k = cuts[0] < 0 ? 0 : (cuts[1] < 0 ? 1 : 2);  // uncut edge
      // Lone vertex opposite the uncut edge is v[(k+2)%3].
      const int lone = v[(k + 2) % 3];
      const int m1 = cuts[(k + 1) % 3];  // cut on edge (v[k+1], lone)
      const int m2 = cuts[(k + 2) % 3];  // cut on edge (lone, v[k])
      push_tri(pieces[ti], lone, m2, m1, tri.region);
      push_quad(pieces[ti], m2, v[k], v[(k + 1) % 3], m1, tri.region);
    } else {
      throw MeshError("conform: non-design triangle with three cut edges");
    }
  }

  for (auto& p : pieces)
    for (const auto& t : p) out.triangles.push_back(t);

  // Split boundary edges that received a cut node.
  for (const auto& e : base.boundary_edges) {
    const int m = find_cut(e.v[0], e.v[1]);
    if (m < 0) {
      out.boundary_edges.push_back(e);
    } else {
      out.boundary_edges.push_back({{e.v[0], m}, e.tag});
      out.boundary_edges.push_back({{m, e.v[1]}, e.tag});
    }
  }

  if (any_cut) {
    // Quality-bounded Laplacian smoothing of interior, non-interface nodes
    // whose incident triangles all share one region. Jacobi updates keep the
    // operation independent of node numbering (mirror-symmetric inputs stay
    // mirror symmetric); a move is applied only when the worst incident
    // quality does not degrade, then any inversion is rolled back.
    std::vector<char> on_boundary(out.nodes.size(), 0);
    for (const auto& e : out.boundary_edges) {
      on_boundary[e.v[0]] = 1;
      on_boundary[e.v[1]] = 1;
    }
    std::vector<std::vector<int>> node_tris(out.nodes.size());
    for (int t = 0; t < out.num_triangles(); ++t)
      for (int k = 0; k < 3; ++k) node_tris[out.triangles[t].v[k]].push_back(t);

    auto min_quality_at = [&](int n, const Vec2& pos) {
      double q = 1.0;
      for (int t : node_tris[n]) {
        std::array<Vec2, 3> p;
        for (int k = 0; k < 3; ++k) {
          const int vn = out.triangles[t].v[k];
          p[k] = (vn == n) ? pos : out.nodes[vn];
        }
        if (signed_area2(p[0], p[1], p[2]) <= 0.0) return -1.0;
        q = std::min(q, triangle_quality(p[0], p[1], p[2]));
      }
      return q;
    };

    std::vector<char> movable(out.nodes.size(), 0);
    for (int n = 0; n < out.num_nodes(); ++n) {
      if (on_boundary[n] || on_interface[n] || node_tris[n].empty()) continue;
      const Region reg0 = out.triangles[node_tris[n][0]].region;
      movable[n] = 1;
      for (int t : node_tris[n])
        if (out.triangles[t].region != reg0) movable[n] = 0;
    }

    for (int pass = 0; pass < opts.smoothing_passes; ++pass) {
      std::vector<std::pair<int, Vec2>> moves;
      for (int n = 0; n < out.num_nodes(); ++n) {
        if (!movable[n]) continue;
        std::set<int> ring;
        for (int t : node_tris[n])
          for (int k = 0; k < 3; ++k)
            if (out.triangles[t].v[k] != n) ring.insert(out.triangles[t].v[k]);
        Vec2 target{0.0, 0.0};
        for (int r : ring) target += out.nodes[r];
        target = target * (1.0 / static_cast<double>(ring.size()));
        if (min_quality_at(n, target) >= min_quality_at(n, out.nodes[n]))
          moves.emplace_back(n, target);
      }
      std::vector<std::pair<int, Vec2>> applied;
      for (const auto& [n, pos] : moves) {
        applied.emplace_back(n, out.nodes[n]);
        out.nodes[n] = pos;
      }
      // Roll back nodes whose patches inverted under the simultaneous move.
      for (int repair = 0; repair < 8; ++repair) {
        bool dirty = false;
        for (const auto& [n, old_pos] : applied) {
          if (min_quality_at(n, out.nodes[n]) < 0.0) {
            out.nodes[n] = old_pos;
            dirty = true;
          }
        }
        if (!dirty) break;
      }
    }
  }

  ConformResult result;
  result.mesh = std::move(out);
  result.phi = std::move(phi_out);
  result.on_interface = std::move(on_interface);

  // Interface polyline: edges of design triangles with both ends on the
  // contour (the linear interpolant vanishes along the whole edge there).
  std::set<EdgeKey> iface_edges;
  for (const auto& tri : result.mesh.triangles) {
    if (!is_design(tri.region)) continue;
    for (int k = 0; k < 3; ++k) {
      const int a = tri.v[k], b = tri.v[(k + 1) % 3];
      if (result.on_interface[a] && result.on_interface[b])
        iface_edges.insert(make_key(a, b));
    }
  }
  for (const auto& e : iface_edges)
    result.interface_length += (result.mesh.nodes[e.a] - result.mesh.nodes[e.b]).norm();

  result.min_quality = 1.0;
  for (int t = 0; t < result.mesh.num_triangles(); ++t) {
    const auto& tri = result.mesh.triangles[t];
    result.min_quality = std::min(
        result.min_quality,
        triangle_quality(result.mesh.nodes[tri.v[0]], result.mesh.nodes[tri.v[1]],
                         result.mesh.nodes[tri.v[2]]));
  }
  return result;
}

}  // namespace metasurf
