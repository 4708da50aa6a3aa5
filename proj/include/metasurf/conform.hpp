#ifndef METASURF_CONFORM_HPP
#define METASURF_CONFORM_HPP

#include <vector>

#include "metasurf/mesh.hpp"

namespace metasurf {

struct ConformOptions {
  // Nodes closer than snap_fraction of the edge length to the zero contour
  // are pulled onto it instead of splitting the edge.
  double snap_fraction = 0.05;
  double area_floor_rel = 1e-12;
  double quality_floor = 0.02;
  int smoothing_passes = 3;
};

struct ConformResult {
  TriMesh mesh;
  // Level-set values carried to the new mesh (exact zeros at cut nodes).
  std::vector<double> phi;
  // Nodes lying on the piecewise-linear zero contour.
  std::vector<char> on_interface;
  // Length of the zero-contour polyline.
  double interface_length = 0.0;
  double min_quality = 1.0;
};

// Splits design-region triangles of the base mesh along the linear
// interpolant's zero set so that the air/elastic interface is a mesh edge
// chain. phi must be given on every node (non-design nodes are ignored for
// cutting but used for labeling consistency). Non-design regions are left
// untouched. If no triangle is cut the input mesh is returned unchanged
// (no smoothing), which makes the operation idempotent.
ConformResult conform_to_levelset(const TriMesh& base, const std::vector<double>& phi,
                                  const ConformOptions& opts = {});

}  // namespace metasurf

#endif
