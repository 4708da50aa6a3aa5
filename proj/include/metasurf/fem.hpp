#ifndef METASURF_FEM_HPP
#define METASURF_FEM_HPP

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "metasurf/mesh.hpp"

namespace metasurf::fem {

enum class Order { P1, P2 };

class FemError : public std::runtime_error {
 public:
  explicit FemError(const std::string& what) : std::runtime_error(what) {}
};

// 1-D mesh along a straight horizontal line (the homogenized interface).
struct LineMesh {
  std::vector<double> x;                    // node abscissae, ascending
  std::vector<std::array<int, 2>> segments; // consecutive node pairs
  double y = 0.0;

  static LineMesh uniform(double x0, double x1, int n, double y = 0.0);
  int num_nodes() const { return static_cast<int>(x.size()); }
};

// Lagrange space: P1/P2 either on a region subset of a TriMesh (optionally
// with periodic DOF merging) or on a LineMesh.
class FunctionSpace {
 public:
  enum class Kind { Area, Line };

  static FunctionSpace area(const TriMesh& mesh, Order order,
                            std::set<Region> regions,
                            const PeriodicMap* merge = nullptr);
  static FunctionSpace line(const LineMesh& line_mesh, Order order);

  Kind kind() const { return kind_; }
  Order order() const { return order_; }
  int num_dofs() const { return ndofs_; }
  const TriMesh* mesh() const { return mesh_; }
  const LineMesh* line_mesh() const { return line_; }

  struct Element {
    int tri = -1;
    std::array<int, 6> dofs{};  // P2: v0 v1 v2 m12 m20 m01; P1: v0 v1 v2
    int ndof = 3;
    Region region = Region::Air;
  };
  const std::vector<Element>& elements() const { return elements_; }

  // Straight integration chain: boundary edges of an area space carrying a
  // tag, or all segments of a line space; entries sorted by midpoint (x, y).
  struct ChainEntry {
    Vec2 a, b;                 // endpoint coordinates, (a.x,a.y) <= (b.x,b.y)
    std::array<int, 3> dofs{}; // trace dofs [at a, at b, midpoint]; -1 absent
    int ndof = 2;
    int tri = -1;              // adjacent triangle (area spaces only)
  };
  std::vector<ChainEntry> chain(BoundaryTag tag) const;  // area spaces
  std::vector<ChainEntry> chain() const;                 // line spaces

  // Vertex DOF of a mesh node (area) or line node; -1 if outside the space.
  int vertex_dof(int node) const;

  // Nodal values (mesh vertices) from a DOF vector, zero outside support.
  template <typename T>
  std::vector<T> nodal_values(const std::vector<T>& dof_values) const {
    const size_t nn = kind_ == Kind::Area ? mesh_->nodes.size() : line_->x.size();
    std::vector<T> out(nn, T(0));
    for (size_t n = 0; n < nn; ++n) {
      const int d = vertex_dof(static_cast<int>(n));
      if (d >= 0) out[n] = dof_values[d];
    }
    return out;
  }

  bool has_region(Region r) const { return regions_.count(r) > 0; }

 private:
  Kind kind_ = Kind::Area;
  Order order_ = Order::P1;
  const TriMesh* mesh_ = nullptr;
  const LineMesh* line_ = nullptr;
  std::set<Region> regions_;
  int ndofs_ = 0;
  std::vector<int> vertex_dof_;               // node -> dof (or -1)
  std::map<std::pair<int, int>, int> edge_dof_;
  std::vector<int> rep_;                      // periodic representative node
  std::vector<Element> elements_;
  std::vector<int> segment_mid_dof_;          // line spaces, P2

  friend struct ShapeEval;
};

// P2/P1 shape evaluation on the reference triangle (barycentric coords).
struct Shape2D {
  std::array<double, 6> n{};
  std::array<Vec2, 6> grad{};  // physical gradients
  int ndof = 3;
};

Shape2D eval_shape(Order order, const Vec2& p0, const Vec2& p1, const Vec2& p2,
                   double l1, double l2);

struct QuadPoint2D {
  double l1, l2, w;  // barycentric (l0 = 1-l1-l2), weight summing to 1
};
const std::vector<QuadPoint2D>& triangle_quadrature(int degree);

struct QuadPoint1D {
  double t, w;  // on [0,1], weights summing to 1
};
const std::vector<QuadPoint1D>& segment_quadrature(int degree);

// Evaluate the trace shapes of a chain entry at parameter t in [0,1]
// (measured from endpoint a); dn is d/dt.
void chain_shapes(const FunctionSpace::ChainEntry& e, double t,
                  std::array<double, 3>& n, std::array<double, 3>& dn);

// ---------------------------------------------------------------------------
// Block system assembly.

template <typename Scalar>
struct BlockSystem {
  Eigen::SparseMatrix<Scalar> matrix;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs;
  std::vector<std::pair<std::string, std::pair<int, int>>> layout;  // name -> [begin, end)

  std::pair<int, int> range(const std::string& name) const {
    for (const auto& [n, r] : layout)
      if (n == name) return r;
    throw FemError("unknown block '" + name + "'");
  }
};

using RegionCoeff = std::function<double(Region)>;

inline RegionCoeff constant_coeff(double v) {
  return [v](Region) { return v; };
}

template <typename Scalar>
class SystemBuilder {
 public:
  int add_field(const std::string& name, const FunctionSpace* space);
  int field(const std::string& name) const;

  // Volume terms (area spaces; row and col must share the mesh).
  void add_mass(int row, int col, RegionCoeff coeff, Scalar scale);
  void add_stiffness(int row, int col, RegionCoeff coeff, Scalar scale);
  // RHS: integral of coeff * d(test)/dx_component.
  void add_grad_source(int row, RegionCoeff coeff, int component, Scalar scale);

  // Boundary terms over matching chains (either side may be an area trace or
  // a line space). d_row / d_col request the tangential derivative.
  void add_chain_bilinear(int row, std::vector<FunctionSpace::ChainEntry> row_chain,
                          int col, std::vector<FunctionSpace::ChainEntry> col_chain,
                          Scalar scale, bool d_row = false, bool d_col = false);
  void add_chain_source(int row, std::vector<FunctionSpace::ChainEntry> row_chain,
                        Scalar scale, bool d_row = false);
  // Source with a spatially varying coefficient evaluated at quadrature points.
  void add_chain_source_fn(int row, std::vector<FunctionSpace::ChainEntry> row_chain,
                           const std::function<Scalar(const Vec2&)>& coeff);
  // Source whose coefficient is a transform of another field's trace,
  // evaluated with the same quadrature (exactness matters for adjoints).
  void add_chain_source_trace(int row, std::vector<FunctionSpace::ChainEntry> row_chain,
                              std::vector<FunctionSpace::ChainEntry> value_chain,
                              const std::vector<Scalar>& value_dofs,
                              const std::function<Scalar(Scalar)>& transform);

  // Appends a Lagrange-multiplier row/column enforcing integral(field) = 0
  // (gauge fixing for pure-Neumann/periodic operators).
  void add_mean_constraint(int field_id);

  BlockSystem<Scalar> build();

 private:
  struct FieldInfo {
    std::string name;
    const FunctionSpace* space;
    int offset;
  };
  std::vector<FieldInfo> fields_;
  std::vector<Eigen::Triplet<Scalar>> triplets_;
  std::vector<std::pair<int, Scalar>> rhs_entries_;
  std::vector<int> mean_constraints_;
  int ndofs_ = 0;
  bool built_ = false;

  void check_same_mesh(int row, int col) const;
};

template <typename Scalar>
struct SolveResult {
  std::vector<Scalar> x;
  double residual = 0.0;  // ||Ax-b||_inf / ||b||_inf (0 if b = 0)

  // Per-block extraction.
  std::vector<Scalar> block(const BlockSystem<Scalar>& sys, const std::string& name) const {
    const auto [b, e] = sys.range(name);
    return std::vector<Scalar>(x.begin() + b, x.begin() + e);
  }
};

template <typename Scalar>
SolveResult<Scalar> solve(const BlockSystem<Scalar>& sys);

// Reusable factorization for repeated solves with the same matrix.
template <typename Scalar>
class Factorization {
 public:
  explicit Factorization(const Eigen::SparseMatrix<Scalar>& m);
  std::vector<Scalar> solve(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs) const;

 private:
  Eigen::SparseMatrix<Scalar> matrix_;
  Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu_;
};

template <typename Scalar>
void write_matrix_market(const Eigen::SparseMatrix<Scalar>& m, const std::string& path);

// Point location with a uniform background grid, for cross-mesh evaluation.
class PointLocator {
 public:
  explicit PointLocator(const TriMesh& mesh, int bins_per_axis = 64);
  // Returns triangle id and barycentric coordinates, or -1 if outside.
  int locate(const Vec2& p, double& l1, double& l2, double tol = 1e-9) const;

 private:
  const TriMesh* mesh_;
  int nb_;
  double x0_, y0_, dx_, dy_;
  std::vector<std::vector<int>> bins_;
};

// Evaluate a FEM field (DOF vector) of an area space at a point inside
// triangle tri with barycentric coordinates (l1, l2).
template <typename T>
T eval_in_triangle(const FunctionSpace& space, const std::vector<T>& dofs, int tri,
                   double l1, double l2);

extern template class SystemBuilder<double>;
extern template class SystemBuilder<std::complex<double>>;
extern template struct BlockSystem<double>;
extern template struct BlockSystem<std::complex<double>>;
extern template SolveResult<double> solve(const BlockSystem<double>&);
extern template SolveResult<std::complex<double>> solve(const BlockSystem<std::complex<double>>&);
extern template class Factorization<double>;
extern template class Factorization<std::complex<double>>;

}  // namespace metasurf::fem

#endif
