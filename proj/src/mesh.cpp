#include "podeit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "podeit/error.hpp"
#include "podeit/hash.hpp"

namespace podeit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when d lies strictly inside the circumcircle of the positively oriented (a,b,c).
double in_circle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

// Node of the sector template: ring k (0 = centre), local index j in [0, m_k].
// j == m_k denotes the first node of the next sector.
struct TemplateNode {
  int ring;
  int local;
};

struct RingPlan {
  int rings = 0;                  // K
  std::vector<int> per_sector;    // m_k for k = 1..K (index k-1)
  int electrode_segments = 0;     // m_e
  int gap_segments = 0;           // m_g
  long long triangles = 0;
};

RingPlan plan_rings(const ElectrodeLayout& layout, int rings, double density) {
  RingPlan plan;
  plan.rings = rings;
  const double pitch = layout.pitch();
  const double h = layout.radius / rings;
  const int min_per_sector = (3 + layout.count - 1) / layout.count;
  const double gap_length = (pitch - layout.arc_angle()) * layout.radius;
  plan.electrode_segments = std::max(1, static_cast<int>(std::lround(density * layout.width / h)));
  plan.gap_segments = std::max(1, static_cast<int>(std::lround(density * gap_length / h)));
  for (int k = 1; k < rings; ++k) {
    plan.per_sector.push_back(
        std::max(min_per_sector, static_cast<int>(std::lround(density * pitch * k))));
  }
  plan.per_sector.push_back(
      std::max(min_per_sector, plan.electrode_segments + plan.gap_segments));
  long long per_sector_triangles = plan.per_sector[0];
  for (int k = 2; k <= rings; ++k) {
    per_sector_triangles += plan.per_sector[k - 2] + plan.per_sector[k - 1];
  }
  plan.triangles = per_sector_triangles * layout.count;
  return plan;
}

class SectorTemplate {
 public:
  SectorTemplate(const ElectrodeLayout& layout, const RingPlan& plan)
      : layout_(layout), plan_(plan), start_(layout.start_angle(0)) {}

  int per_sector(int ring) const { return ring == 0 ? 1 : plan_.per_sector[ring - 1]; }

  double radius(int ring) const { return layout_.radius * ring / plan_.rings; }

  double angle(int ring, int local) const {
    const int m = per_sector(ring);
    const double pitch = layout_.pitch();
    if (local >= m) return angle(ring, local - m) + pitch;
    if (ring == plan_.rings) {
      const int me = plan_.electrode_segments;
      const double arc = layout_.arc_angle();
      if (local <= me) return start_ + arc * local / me;
      const int mg = m - me;
      return start_ + arc + (pitch - arc) * (local - me) / mg;
    }
    // Interior rings alternate a half-spacing shift for better-shaped triangles.
    const double shift = (ring % 2 == 1) ? 0.5 : 0.0;
    return start_ + pitch * (local + shift) / m;
  }

  Point2 position(int ring, int local, int sector) const {
    if (ring == 0) return Point2::Zero();
    const double theta = angle(ring, local) + sector * layout_.pitch();
    const double r = radius(ring);
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  // Triangles of sector 0 as template node triples.
  std::vector<std::array<TemplateNode, 3>> triangulate() const {
    std::vector<std::array<TemplateNode, 3>> out;
    for (int j = 0; j < per_sector(1); ++j) {
      add(out, {0, 0}, {1, j}, {1, j + 1});
    }
    for (int k = 2; k <= plan_.rings; ++k) stitch(out, k - 1, k);
    return out;
  }

 private:
  const ElectrodeLayout& layout_;
  const RingPlan& plan_;
  double start_;

  Point2 pos(TemplateNode n) const { return position(n.ring, n.local, 0); }

  void add(std::vector<std::array<TemplateNode, 3>>& out, TemplateNode a, TemplateNode b,
           TemplateNode c) const {
    if (orient(pos(a), pos(b), pos(c)) < 0.0) std::swap(b, c);
    out.push_back({a, b, c});
  }

  void stitch(std::vector<std::array<TemplateNode, 3>>& out, int inner, int outer) const {
    const int ma = per_sector(inner);
    const int mb = per_sector(outer);
    int i = 0;
    int j = 0;
    while (i < ma || j < mb) {
      const TemplateNode ai{inner, i}, ai1{inner, i + 1}, bj{outer, j}, bj1{outer, j + 1};
      bool advance_inner;
      if (i == ma) {
        advance_inner = false;
      } else if (j == mb) {
        advance_inner = true;
      } else {
        // Candidate (ai, ai1, bj) versus (ai, bj1, bj): keep the one whose
        // circumcircle does not contain the opposite quad vertex.
        Point2 p = pos(ai), q = pos(ai1), r = pos(bj);
        if (orient(p, q, r) < 0.0) std::swap(q, r);
        // A diagonal is admissible when both triangles it creates share orientation.
        auto same_sign = [](double x, double y) { return (x > 0.0 && y > 0.0) || (x < 0.0 && y < 0.0); };
        const bool inner_valid = same_sign(orient(pos(ai), pos(ai1), pos(bj)),
                                           orient(pos(ai1), pos(bj1), pos(bj)));
        const bool outer_valid = same_sign(orient(pos(ai), pos(bj1), pos(bj)),
                                           orient(pos(ai), pos(ai1), pos(bj1)));
        if (!inner_valid) {
          advance_inner = false;
        } else if (!outer_valid) {
          advance_inner = true;
        } else {
          const double test = in_circle(p, q, r, pos(bj1));
          const double scale = std::pow(layout_.radius, 4);
          if (std::abs(test) <= 1e-12 * scale) {
            advance_inner = angle(inner, i + 1) <= angle(outer, j + 1);
          } else {
            advance_inner = test < 0.0;
          }
        }
      }
      if (advance_inner) {
        add(out, ai, ai1, bj);
        ++i;
      } else {
        add(out, ai, bj1, bj);
        ++j;
      }
    }
  }
};

}  // namespace

double ElectrodeLayout::pitch() const { return kTwoPi / count; }

double ElectrodeLayout::centre_angle(int electrode) const {
  return angular_offset + electrode * pitch();
}

double ElectrodeLayout::start_angle(int electrode) const {
  return centre_angle(electrode) - 0.5 * arc_angle();
}

void ElectrodeLayout::validate() const {
  if (count < 2) throw Error(ErrorKind::geometry_infeasible, "need at least 2 electrodes");
  if (!(radius > 0.0)) throw Error(ErrorKind::geometry_infeasible, "radius must be positive");
  if (!(width > 0.0)) throw Error(ErrorKind::geometry_infeasible, "electrode width must be positive");
  if (!(width * count < kTwoPi * radius)) {
    throw Error(ErrorKind::geometry_infeasible,
                "electrodes overlap: width * count >= circumference");
  }
}

Mesh2D Mesh2D::build(std::vector<Point2> vertices, std::vector<std::array<int, 3>> triangles,
                     const std::vector<std::vector<ElectrodeSegment>>& electrodes,
                     std::optional<ElectrodeLayout> layout) {
  Mesh2D mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  mesh.layout_ = layout;

  const int nv = mesh.n_linear_nodes();
  for (const auto& t : mesh.triangles_) {
    for (int v : t) {
      if (v < 0 || v >= nv) {
        throw Error(ErrorKind::invalid_argument, "triangle references vertex out of range");
      }
    }
  }

  std::vector<std::array<int, 2>> all;
  all.reserve(3 * mesh.triangles_.size());
  for (const auto& t : mesh.triangles_) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      all.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  mesh.edges_ = std::move(all);

  auto find_edge = [&mesh](int a, int b) {
    const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(mesh.edges_.begin(), mesh.edges_.end(), key);
    if (it == mesh.edges_.end() || *it != key) return -1;
    return static_cast<int>(it - mesh.edges_.begin());
  };

  mesh.triangle_edges_.reserve(mesh.triangles_.size());
  for (const auto& t : mesh.triangles_) {
    mesh.triangle_edges_.push_back(
        {find_edge(t[0], t[1]), find_edge(t[1], t[2]), find_edge(t[2], t[0])});
  }

  for (const auto& group : electrodes) {
    std::vector<ElectrodeEdge> edges;
    for (const auto& seg : group) {
      const int e = find_edge(seg.a, seg.b);
      if (e < 0) throw Error(ErrorKind::invalid_argument, "electrode segment is not a mesh edge");
      double measure = seg.measure;
      if (measure <= 0.0) measure = (mesh.vertices_[seg.a] - mesh.vertices_[seg.b]).norm();
      edges.push_back({e, measure});
    }
    mesh.electrodes_.push_back(std::move(edges));
  }
  return mesh;
}

Point2 Mesh2D::node_position(int quadratic_node) const {
  if (quadratic_node < n_linear_nodes()) return vertices_[quadratic_node];
  const auto& e = edges_[quadratic_node - n_linear_nodes()];
  return 0.5 * (vertices_[e[0]] + vertices_[e[1]]);
}

std::array<int, 6> Mesh2D::quadratic_element(int triangle) const {
  const auto& t = triangles_[triangle];
  const auto& te = triangle_edges_[triangle];
  return {t[0], t[1], t[2], midpoint_node(te[0]), midpoint_node(te[1]), midpoint_node(te[2])};
}

double Mesh2D::signed_area(int triangle) const {
  const auto& t = triangles_[triangle];
  return 0.5 * orient(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
}

double Mesh2D::total_area() const {
  double a = 0.0;
  for (int t = 0; t < n_triangles(); ++t) a += signed_area(t);
  return a;
}

std::vector<double> Mesh2D::electrode_measures() const {
  std::vector<double> out;
  for (const auto& group : electrodes_) {
    double s = 0.0;
    for (const auto& e : group) s += e.measure;
    out.push_back(s);
  }
  return out;
}

std::uint64_t Mesh2D::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.mesh.v1"));
  h.add<std::uint64_t>(vertices_.size());
  for (const auto& v : vertices_) h.add(v.x()).add(v.y());
  h.add<std::uint64_t>(triangles_.size());
  for (const auto& t : triangles_) h.add(t[0]).add(t[1]).add(t[2]);
  h.add<std::uint64_t>(electrodes_.size());
  for (const auto& g : electrodes_) {
    h.add<std::uint64_t>(g.size());
    for (const auto& e : g) h.add(e.edge).add(e.measure);
  }
  return h.value();
}

void Mesh2D::debug_flip_triangle(int triangle) {
  std::swap(triangles_[triangle][1], triangles_[triangle][2]);
  auto& te = triangle_edges_[triangle];
  te = {te[2], te[1], te[0]};
}

std::string to_string(MeshIssue::Kind kind) {
  switch (kind) {
    case MeshIssue::Kind::index_out_of_range: return "index-out-of-range";
    case MeshIssue::Kind::nonpositive_area: return "nonpositive-area";
    case MeshIssue::Kind::nonconforming_edge: return "nonconforming-edge";
    case MeshIssue::Kind::electrode_edge_not_on_boundary: return "electrode-edge-not-on-boundary";
    case MeshIssue::Kind::electrode_groups_overlap: return "electrode-groups-overlap";
    case MeshIssue::Kind::electrode_arc_mismatch: return "electrode-arc-mismatch";
    case MeshIssue::Kind::edge_table_inconsistent: return "edge-table-inconsistent";
  }
  return "unknown";
}

std::vector<MeshIssue> validate_mesh(const Mesh2D& mesh) {
  std::vector<MeshIssue> issues;
  auto report = [&issues](MeshIssue::Kind kind, int index, const std::string& what) {
    issues.push_back({kind, index, what});
  };

  const int nv = mesh.n_linear_nodes();
  const int nt = mesh.n_triangles();
  const int ne = static_cast<int>(mesh.edges().size());
  bool indices_ok = true;
  for (int t = 0; t < nt; ++t) {
    for (int v : mesh.triangles()[t]) {
      if (v < 0 || v >= nv) {
        report(MeshIssue::Kind::index_out_of_range, t,
               "triangle " + std::to_string(t) + " references vertex " + std::to_string(v));
        indices_ok = false;
      }
    }
  }
  if (!indices_ok) return issues;

  double mean_area = nt > 0 ? std::abs(mesh.total_area()) / nt : 0.0;
  for (int t = 0; t < nt; ++t) {
    const double a = mesh.signed_area(t);
    if (!(a > 1e-12 * mean_area)) {
      std::ostringstream os;
      os << "triangle " << t << " has signed area " << a;
      report(MeshIssue::Kind::nonpositive_area, t, os.str());
    }
  }

  // Edge table must match the triangle connectivity.
  std::map<std::array<int, 2>, int> incidence;
  for (const auto& t : mesh.triangles()) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      ++incidence[{std::min(a, b), std::max(a, b)}];
    }
  }
  if (static_cast<int>(incidence.size()) != ne ||
      static_cast<int>(mesh.triangle_edges().size()) != nt) {
    report(MeshIssue::Kind::edge_table_inconsistent, -1,
           "edge table size does not match triangle connectivity");
    return issues;
  }
  {
    int e = 0;
    for (const auto& [key, count] : incidence) {
      if (mesh.edges()[e] != key) {
        report(MeshIssue::Kind::edge_table_inconsistent, e,
               "edge " + std::to_string(e) + " is not in canonical order");
      }
      if (count > 2) {
        report(MeshIssue::Kind::nonconforming_edge, e,
               "edge " + std::to_string(e) + " is shared by " + std::to_string(count) +
                   " triangles");
      }
      ++e;
    }
  }
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.triangle_edges()[t][k];
      const int a = tri[k], b = tri[(k + 1) % 3];
      if (e < 0 || e >= ne || mesh.edges()[e] != std::array<int, 2>{std::min(a, b), std::max(a, b)}) {
        report(MeshIssue::Kind::edge_table_inconsistent, t,
               "triangle " + std::to_string(t) + " has a stale edge reference");
      }
    }
  }

  // Electrodes: boundary edges, pairwise disjoint, covering the configured arc.
  std::vector<int> owner(ne, -1);
  for (int l = 0; l < mesh.n_electrodes(); ++l) {
    for (const auto& ee : mesh.electrodes()[l]) {
      if (ee.edge < 0 || ee.edge >= ne) {
        report(MeshIssue::Kind::index_out_of_range, l,
               "electrode " + std::to_string(l) + " references edge out of range");
        continue;
      }
      if (incidence[mesh.edges()[ee.edge]] != 1) {
        report(MeshIssue::Kind::electrode_edge_not_on_boundary, ee.edge,
               "electrode " + std::to_string(l) + " edge " + std::to_string(ee.edge) +
                   " is not a boundary edge");
      }
      if (owner[ee.edge] >= 0 && owner[ee.edge] != l) {
        report(MeshIssue::Kind::electrode_groups_overlap, ee.edge,
               "edge " + std::to_string(ee.edge) + " belongs to electrodes " +
                   std::to_string(owner[ee.edge]) + " and " + std::to_string(l));
      }
      owner[ee.edge] = l;
    }
  }

  if (const auto& layout = mesh.layout()) {
    if (layout->count != mesh.n_electrodes()) {
      report(MeshIssue::Kind::electrode_arc_mismatch, -1, "electrode count differs from layout");
    } else {
      const double tol = 1e-9 * layout->radius;
      for (int l = 0; l < layout->count; ++l) {
        std::map<int, int> degree;
        double measure = 0.0;
        for (const auto& ee : mesh.electrodes()[l]) {
          ++degree[mesh.edges()[ee.edge][0]];
          ++degree[mesh.edges()[ee.edge][1]];
          measure += ee.measure;
        }
        std::vector<Point2> ends;
        for (const auto& [v, d] : degree) {
          if (d == 1) ends.push_back(mesh.vertices()[v]);
        }
        const double t0 = layout->start_angle(l);
        const double t1 = t0 + layout->arc_angle();
        const Point2 p0(layout->radius * std::cos(t0), layout->radius * std::sin(t0));
        const Point2 p1(layout->radius * std::cos(t1), layout->radius * std::sin(t1));
        bool ok = ends.size() == 2 &&
                  (((ends[0] - p0).norm() < tol && (ends[1] - p1).norm() < tol) ||
                   ((ends[0] - p1).norm() < tol && (ends[1] - p0).norm() < tol));
        ok = ok && std::abs(measure - layout->width) <= 1e-9 * layout->width;
        if (!ok) {
          report(MeshIssue::Kind::electrode_arc_mismatch, l,
                 "electrode " + std::to_string(l) + " edges do not cover its arc");
        }
      }
    }
  }
  return issues;
}

Mesh2D generate_disk_mesh(const ElectrodeLayout& layout, int target_elements) {
  layout.validate();
  if (target_elements < 16 * layout.count) {
    throw Error(ErrorKind::geometry_infeasible,
                "target_elements must be at least 16 per electrode (" +
                    std::to_string(16 * layout.count) + ")");
  }

  // Choose ring count and angular density so the element count lands on target.
  RingPlan best;
  double best_score = std::numeric_limits<double>::infinity();
  const int max_rings = static_cast<int>(std::sqrt(target_elements)) + 4;
  for (int rings = 1; rings <= max_rings; ++rings) {
    for (int step = 0; step <= 20; ++step) {
      const double density = 0.6 + 0.05 * step;
      RingPlan plan = plan_rings(layout, rings, density);
      const double rel = std::abs(static_cast<double>(plan.triangles - target_elements)) /
                         target_elements;
      // Prefer isotropic density when counts tie.
      const double score = rel + 1e-4 * std::abs(density - 1.0);
      if (score < best_score) {
        best_score = score;
        best = std::move(plan);
      }
    }
  }
  if (std::abs(static_cast<double>(best.triangles - target_elements)) > 0.2 * target_elements) {
    throw Error(ErrorKind::generation_failed,
                "cannot reach " + std::to_string(target_elements) +
                    " elements while aligning electrode endpoints");
  }

  SectorTemplate tpl(layout, best);
  const int sectors = layout.count;
  const int rings = best.rings;

  std::vector<int> ring_offset(rings + 1, 0);
  int nv = 1;
  for (int k = 1; k <= rings; ++k) {
    ring_offset[k] = nv;
    nv += sectors * tpl.per_sector(k);
  }

  auto global_index = [&](TemplateNode n, int sector) {
    if (n.ring == 0) return 0;
    const int m = tpl.per_sector(n.ring);
    const int s = (sector + n.local / m) % sectors;
    return ring_offset[n.ring] + s * m + n.local % m;
  };

  std::vector<Point2> vertices(nv, Point2::Zero());
  for (int k = 1; k <= rings; ++k) {
    for (int s = 0; s < sectors; ++s) {
      for (int j = 0; j < tpl.per_sector(k); ++j) {
        vertices[global_index({k, j}, s)] = tpl.position(k, j, s);
      }
    }
  }

  const auto cell = tpl.triangulate();
  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(cell.size() * sectors);
  for (int s = 0; s < sectors; ++s) {
    for (const auto& t : cell) {
      triangles.push_back({global_index(t[0], s), global_index(t[1], s), global_index(t[2], s)});
    }
  }

  std::vector<std::vector<Mesh2D::ElectrodeSegment>> electrodes(sectors);
  const int me = best.electrode_segments;
  const double segment_arc = layout.width / me;
  for (int s = 0; s < sectors; ++s) {
    for (int j = 0; j < me; ++j) {
      electrodes[s].push_back(
          {global_index({rings, j}, s), global_index({rings, j + 1}, s), segment_arc});
    }
  }

  Mesh2D mesh = Mesh2D::build(std::move(vertices), std::move(triangles), electrodes, layout);
  const auto issues = validate_mesh(mesh);
  if (!issues.empty()) {
    throw Error(ErrorKind::generation_failed, "generated mesh is invalid: " + issues.front().message);
  }
  return mesh;
}

PointLocator::PointLocator(const Mesh2D& mesh) : mesh_(&mesh) {
  Point2 lo = Point2::Constant(std::numeric_limits<double>::infinity());
  Point2 hi = -lo;
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double area = std::max(std::abs(mesh.total_area()), 1e-300);
  cell_ = std::max(2.0 * std::sqrt(area / std::max(1, mesh.n_triangles())), 1e-12);
  lo_ = lo;
  nx_ = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_)) + 1);
  ny_ = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_)) + 1);
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    Point2 tlo = Point2::Constant(std::numeric_limits<double>::infinity());
    Point2 thi = -tlo;
    for (int v : mesh.triangles()[t]) {
      tlo = tlo.cwiseMin(mesh.vertices()[v]);
      thi = thi.cwiseMax(mesh.vertices()[v]);
    }
    const int i0 = static_cast<int>((tlo.x() - lo_.x()) / cell_);
    const int i1 = static_cast<int>((thi.x() - lo_.x()) / cell_);
    const int j0 = static_cast<int>((tlo.y() - lo_.y()) / cell_);
    const int j1 = static_cast<int>((thi.y() - lo_.y()) / cell_);
    for (int i = i0; i <= std::min(i1, nx_ - 1); ++i)
      for (int j = j0; j <= std::min(j1, ny_ - 1); ++j) buckets_[j * nx_ + i].push_back(t);
  }
}

Eigen::Vector3d PointLocator::barycentric(int triangle, const Point2& p) const {
  const auto& t = mesh_->triangles()[triangle];
  const Point2& a = mesh_->vertices()[t[0]];
  const Point2& b = mesh_->vertices()[t[1]];
  const Point2& c = mesh_->vertices()[t[2]];
  const double det = orient(a, b, c);
  const double l1 = orient(p, b, c) / det;
  const double l2 = orient(a, p, c) / det;
  return {l1, l2, 1.0 - l1 - l2};
}

PointLocator::Hit PointLocator::locate(const Point2& p) const {
  const int i = static_cast<int>(std::floor((p.x() - lo_.x()) / cell_));
  const int j = static_cast<int>(std::floor((p.y() - lo_.y()) / cell_));
  Hit best;
  double best_min = -std::numeric_limits<double>::infinity();
  auto consider = [&](int t) {
    const Eigen::Vector3d l = barycentric(t, p);
    const double m = l.minCoeff();
    if (m > best_min) {
      best_min = m;
      best = {t, l};
    }
  };
  if (i >= 0 && i < nx_ && j >= 0 && j < ny_) {
    for (int t : buckets_[j * nx_ + i]) consider(t);
  }
  if (best_min >= -1e-12) return best;
  // Outside the polygon (or an empty bucket): nearest triangle by barycentric violation.
  for (int t = 0; t < mesh_->n_triangles(); ++t) consider(t);
  return best;
}

Eigen::Matrix<double, 6, 1> quadratic_shape_values(const Eigen::Vector3d& l) {
  Eigen::Matrix<double, 6, 1> n;
  n << l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0),
      4.0 * l[0] * l[1], 4.0 * l[1] * l[2], 4.0 * l[2] * l[0];
  return n;
}

Eigen::VectorXd evaluate_quadratic_field(const Mesh2D& mesh, const PointLocator& locator,
                                         const Eigen::VectorXd& field,
                                         const std::vector<Point2>& points) {
  if (field.size() != mesh.n_quadratic_nodes()) {
    throw Error(ErrorKind::dimension_mismatch, "P2 field length differs from quadratic node count");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto hit = locator.locate(points[p]);
    const auto nodes = mesh.quadratic_element(hit.triangle);
    const auto n = quadratic_shape_values(hit.barycentric);
    double v = 0.0;
    for (int a = 0; a < 6; ++a) v += n[a] * field[nodes[a]];
    out[static_cast<Eigen::Index>(p)] = v;
  }
  return out;
}

Eigen::VectorXd evaluate_linear_field(const Mesh2D& mesh, const PointLocator& locator,
                                      const Eigen::VectorXd& field,
                                      const std::vector<Point2>& points) {
  if (field.size() != mesh.n_linear_nodes()) {
    throw Error(ErrorKind::dimension_mismatch, "P1 field length differs from vertex count");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto hit = locator.locate(points[p]);
    const auto& t = mesh.triangles()[hit.triangle];
    out[static_cast<Eigen::Index>(p)] = hit.barycentric[0] * field[t[0]] +
                                        hit.barycentric[1] * field[t[1]] +
                                        hit.barycentric[2] * field[t[2]];
  }
  return out;
}

double l2_norm_linear(const Mesh2D& mesh, const Eigen::VectorXd& field) {
  if (field.size() != mesh.n_linear_nodes()) {
    throw Error(ErrorKind::dimension_mismatch, "P1 field length differs from vertex count");
  }
  double s = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double f0 = field[tri[0]], f1 = field[tri[1]], f2 = field[tri[2]];
    const double sum = f0 + f1 + f2;
    s += std::abs(mesh.signed_area(t)) / 12.0 * (f0 * f0 + f1 * f1 + f2 * f2 + sum * sum);
  }
  return std::sqrt(s);
}

}  // namespace podeit
