#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "podeit/error.hpp"
#include "podeit/mesh.hpp"

using namespace podeit;

namespace {

ElectrodeLayout reference_layout() { return {16, 2.5, 14.0, 0.0}; }

double area_defect(const Mesh2D& mesh, double radius) {
  return std::numbers::pi * radius * radius - mesh.total_area();
}

}  // namespace

TEST_CASE("reference configuration mesh has about 2414 elements and 16 electrodes") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 2414);
  CHECK(mesh.n_triangles() == doctest::Approx(2414).epsilon(0.2));
  CHECK(mesh.n_electrodes() == 16);
  CHECK(validate_mesh(mesh).empty());
  MESSAGE("N = " << mesh.n_linear_nodes() << ", M = " << mesh.n_quadratic_nodes()
                 << ", elements = " << mesh.n_triangles());
}

TEST_CASE("minimal two-electrode layout") {
  const Mesh2D mesh = generate_disk_mesh({2, 0.1, 14.0, 0.0}, 32);
  CHECK(mesh.n_electrodes() == 2);
  CHECK(mesh.n_triangles() == doctest::Approx(32).epsilon(0.2));
  CHECK(validate_mesh(mesh).empty());
}

TEST_CASE("fine data mesh node counts") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 8394);
  CHECK(mesh.n_triangles() == doctest::Approx(8394).epsilon(0.2));
  // Reference values 4374 / 17141 come from a different mesher; Euler's formula
  // ties node counts to the element count, so the match is within a few percent.
  CHECK(mesh.n_linear_nodes() == doctest::Approx(4374).epsilon(0.1));
  CHECK(mesh.n_quadratic_nodes() == doctest::Approx(17141).epsilon(0.1));
  CHECK(validate_mesh(mesh).empty());
}

TEST_CASE("geometry errors") {
  CHECK_THROWS_AS(generate_disk_mesh({16, 6.0, 14.0, 0.0}, 2414), Error);
  try {
    generate_disk_mesh(reference_layout(), 8);
    FAIL("expected geometry-infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::geometry_infeasible);
  }
  try {
    generate_disk_mesh({1, 1.0, 14.0, 0.0}, 100);
    FAIL("expected geometry-infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::geometry_infeasible);
  }
}

TEST_CASE("validator names a flipped triangle") {
  Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  REQUIRE(validate_mesh(mesh).empty());
  mesh.debug_flip_triangle(37);
  const auto issues = validate_mesh(mesh);
  REQUIRE_FALSE(issues.empty());
  bool named = false;
  for (const auto& issue : issues) {
    if (issue.kind == MeshIssue::Kind::nonpositive_area && issue.index == 37) named = true;
  }
  CHECK(named);
}

TEST_CASE("validator reports overlapping electrode groups") {
  const Mesh2D good = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 200);
  std::vector<std::vector<Mesh2D::ElectrodeSegment>> groups;
  for (const auto& g : good.electrodes()) {
    std::vector<Mesh2D::ElectrodeSegment> segs;
    for (const auto& e : g) segs.push_back({good.edges()[e.edge][0], good.edges()[e.edge][1], e.measure});
    groups.push_back(segs);
  }
  groups[1].push_back(groups[0].front());
  const Mesh2D bad = Mesh2D::build(good.vertices(), good.triangles(), groups, good.layout());
  bool overlap = false;
  for (const auto& issue : validate_mesh(bad)) {
    if (issue.kind == MeshIssue::Kind::electrode_groups_overlap) overlap = true;
  }
  CHECK(overlap);
}

TEST_CASE("area converges to the disk area") {
  const double r = 14.0;
  const Mesh2D coarse = generate_disk_mesh(reference_layout(), 600);
  const Mesh2D medium = generate_disk_mesh(reference_layout(), 2414);
  const Mesh2D fine = generate_disk_mesh(reference_layout(), 4 * 2414);
  const double exact = std::numbers::pi * r * r;
  CHECK(std::abs(area_defect(medium, r)) / exact < 0.005);
  CHECK(area_defect(coarse, r) > 0.0);
  CHECK(area_defect(medium, r) * 2.0 <= area_defect(coarse, r) * 1.0001);
  CHECK(area_defect(fine, r) * 2.0 <= area_defect(medium, r));
}

TEST_CASE("mesh invariants: midpoints, boundary vertices, disjoint electrodes, arc measures") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 1200);
  for (int e = 0; e < static_cast<int>(mesh.edges().size()); ++e) {
    const auto& ed = mesh.edges()[e];
    CHECK(ed[0] < ed[1]);
    const Point2 mid = 0.5 * (mesh.vertices()[ed[0]] + mesh.vertices()[ed[1]]);
    CHECK((mesh.node_position(mesh.midpoint_node(e)) - mid).norm() == doctest::Approx(0.0));
  }
  std::set<int> seen;
  for (const auto& group : mesh.electrodes()) {
    for (const auto& ee : group) {
      CHECK(seen.insert(ee.edge).second);
      for (int v : mesh.edges()[ee.edge]) {
        CHECK(mesh.vertices()[v].norm() == doctest::Approx(14.0).epsilon(1e-14));
      }
    }
  }
  for (double m : mesh.electrode_measures()) CHECK(m == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("generation is deterministic") {
  const Mesh2D a = generate_disk_mesh(reference_layout(), 2414);
  const Mesh2D b = generate_disk_mesh(reference_layout(), 2414);
  CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("mesh is invariant under rotation by one electrode pitch") {
  const ElectrodeLayout layout = reference_layout();
  const Mesh2D mesh = generate_disk_mesh(layout, 1200);
  const double c = std::cos(layout.pitch()), s = std::sin(layout.pitch());
  const PointLocator locator(mesh);
  for (int v = 0; v < mesh.n_linear_nodes(); ++v) {
    const Point2 p = mesh.vertices()[v];
    const Point2 q(c * p.x() - s * p.y(), s * p.x() + c * p.y());
    const auto hit = locator.locate(q);
    CHECK(hit.barycentric.maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("point location and field evaluation reproduce linear functions") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const PointLocator locator(mesh);
  Eigen::VectorXd lin(mesh.n_linear_nodes());
  Eigen::VectorXd quad(mesh.n_quadratic_nodes());
  for (int v = 0; v < mesh.n_linear_nodes(); ++v) {
    const Point2 p = mesh.vertices()[v];
    lin[v] = 1.0 + 2.0 * p.x() - 0.5 * p.y();
  }
  for (int q = 0; q < mesh.n_quadratic_nodes(); ++q) {
    const Point2 p = mesh.node_position(q);
    quad[q] = p.x() * p.y() + p.x() * p.x();
  }
  std::vector<Point2> pts{{0.1, 0.2}, {-3.0, 4.5}, {7.0, -2.0}, {0.0, 0.0}, {-9.5, -9.0}};
  const auto lv = evaluate_linear_field(mesh, locator, lin, pts);
  const auto qv = evaluate_quadratic_field(mesh, locator, quad, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 p = pts[i];
    CHECK(lv[i] == doctest::Approx(1.0 + 2.0 * p.x() - 0.5 * p.y()).epsilon(1e-12));
    CHECK(qv[i] == doctest::Approx(p.x() * p.y() + p.x() * p.x()).epsilon(1e-10));
  }
}

TEST_CASE("L2 norm of a constant is sqrt(area)") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.n_linear_nodes());
  CHECK(l2_norm_linear(mesh, one) == doctest::Approx(std::sqrt(mesh.total_area())));
}
