#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace podeit {

using Point2 = Eigen::Vector2d;

/// Equispaced electrodes on the boundary circle. Lengths in cm, angles in radians.
/// Electrode l is centred at angular_offset + l * 2*pi/count, numbered counter-clockwise.
struct ElectrodeLayout {
  int count = 16;
  double width = 2.5;
  double radius = 14.0;
  double angular_offset = 0.0;

  double pitch() const;
  double arc_angle() const { return width / radius; }
  double start_angle(int electrode) const;
  double centre_angle(int electrode) const;

  /// Throws geometry_infeasible when the electrodes cannot be placed disjointly.
  void validate() const;
};

/// Boundary edge belonging to an electrode. `measure` is the length used in the
/// contact integrals: the circular arc length for generated disk meshes.
struct ElectrodeEdge {
  int edge = -1;
  double measure = 0.0;
};

/// Conforming triangulation with a P1 node set (vertices) and a P2 node set
/// (vertices followed by one midpoint node per edge, in canonical edge order).
class Mesh2D {
 public:
  struct ElectrodeSegment {
    int a = -1;
    int b = -1;
    double measure = 0.0;  // <= 0 means "use the chord length"
  };

  Mesh2D() = default;

  /// Builds the edge table and electrode groups from raw connectivity. Edges are
  /// stored with the lower vertex first and sorted lexicographically.
  static Mesh2D build(std::vector<Point2> vertices, std::vector<std::array<int, 3>> triangles,
                      const std::vector<std::vector<ElectrodeSegment>>& electrodes,
                      std::optional<ElectrodeLayout> layout = std::nullopt);

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  /// Local edges (v0,v1), (v1,v2), (v2,v0) of each triangle as edge indices.
  const std::vector<std::array<int, 3>>& triangle_edges() const { return triangle_edges_; }
  const std::vector<std::vector<ElectrodeEdge>>& electrodes() const { return electrodes_; }
  const std::optional<ElectrodeLayout>& layout() const { return layout_; }

  int n_triangles() const { return static_cast<int>(triangles_.size()); }
  int n_electrodes() const { return static_cast<int>(electrodes_.size()); }
  int n_linear_nodes() const { return static_cast<int>(vertices_.size()); }
  int n_quadratic_nodes() const { return n_linear_nodes() + static_cast<int>(edges_.size()); }
  int midpoint_node(int edge) const { return n_linear_nodes() + edge; }

  Point2 node_position(int quadratic_node) const;
  /// P2 element nodes: v0, v1, v2, m(v0v1), m(v1v2), m(v2v0).
  std::array<int, 6> quadratic_element(int triangle) const;
  double signed_area(int triangle) const;
  double total_area() const;
  /// Sum of electrode edge measures, i.e. |e_l|.
  std::vector<double> electrode_measures() const;

  /// Stable 64-bit content hash over geometry and connectivity.
  std::uint64_t content_hash() const;

  /// Swaps two vertices of a triangle. Only meant for building invalid meshes in tests.
  void debug_flip_triangle(int triangle);

 private:
  std::vector<Point2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> triangle_edges_;
  std::vector<std::vector<ElectrodeEdge>> electrodes_;
  std::optional<ElectrodeLayout> layout_;
};

struct MeshIssue {
  enum class Kind {
    index_out_of_range,
    nonpositive_area,
    nonconforming_edge,
    electrode_edge_not_on_boundary,
    electrode_groups_overlap,
    electrode_arc_mismatch,
    edge_table_inconsistent,
  };
  Kind kind;
  int index;  // triangle, edge or electrode index depending on kind
  std::string message;
};

/// Lists every violated invariant; empty iff the mesh is valid.
std::vector<MeshIssue> validate_mesh(const Mesh2D& mesh);

std::string to_string(MeshIssue::Kind kind);

/// Deterministic disk mesh: concentric rings seeded per electrode sector and
/// stitched ring-to-ring with a Delaunay diagonal choice. The triangulation of one
/// sector is replicated `layout.count` times, so the mesh is exactly invariant under
/// rotation by one electrode pitch. Electrode endpoints are mesh vertices and all
/// boundary vertices lie on the circle.
Mesh2D generate_disk_mesh(const ElectrodeLayout& layout, int target_elements);

/// Locates points in a mesh; falls back to the nearest triangle for points just
/// outside the polygonal boundary (circle vs. chord).
class PointLocator {
 public:
  explicit PointLocator(const Mesh2D& mesh);

  struct Hit {
    int triangle = -1;
    Eigen::Vector3d barycentric;
  };
  Hit locate(const Point2& p) const;

 private:
  const Mesh2D* mesh_;
  Point2 lo_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::vector<int>> buckets_;

  Eigen::Vector3d barycentric(int triangle, const Point2& p) const;
};

/// Values of the six P2 shape functions at barycentric coordinates `l`.
Eigen::Matrix<double, 6, 1> quadratic_shape_values(const Eigen::Vector3d& l);

/// Evaluates a P2 field (length n_quadratic_nodes) at arbitrary points.
Eigen::VectorXd evaluate_quadratic_field(const Mesh2D& mesh, const PointLocator& locator,
                                         const Eigen::VectorXd& field,
                                         const std::vector<Point2>& points);

/// Evaluates a P1 field (length n_linear_nodes) at arbitrary points.
Eigen::VectorXd evaluate_linear_field(const Mesh2D& mesh, const PointLocator& locator,
                                      const Eigen::VectorXd& field,
                                      const std::vector<Point2>& points);

/// L2(Omega) norm of a P1 field, using the consistent mass matrix.
double l2_norm_linear(const Mesh2D& mesh, const Eigen::VectorXd& field);

}  // namespace podeit
