#include "podeit/phantom.hpp"

#include <cmath>

#include "podeit/error.hpp"

namespace podeit {

double Phantom::operator()(const Point2& x) const {
  double s = background;
  for (const Blob& b : blobs) s += b.amplitude * std::exp(-(x - b.centre).squaredNorm() / (2.0 * b.width * b.width));
  for (const Rectangle& r : rectangles) {
    const Point2 d = (x - r.centre).cwiseAbs();
    if (d.x() <= r.half_size.x() && d.y() <= r.half_size.y()) s += r.contrast;
  }
  for (const Disk& c : disks) {
    if ((x - c.centre).norm() <= c.radius) s += c.contrast;
  }
  return s;
}

Eigen::VectorXd Phantom::nodal(const Mesh2D& mesh) const {
  Eigen::VectorXd s(mesh.n_linear_nodes());
  for (int i = 0; i < s.size(); ++i) s[i] = (*this)(mesh.vertices()[i]);
  return s;
}

void Phantom::validate(double radius) const {
  if (!(background > 0.0)) throw Error(ErrorKind::invalid_argument, "phantom background must be positive");
  for (const Blob& b : blobs) {
    if (!(b.width > 0.0) || b.centre.norm() >= radius) {
      throw Error(ErrorKind::invalid_argument, "blob centre outside the domain or nonpositive width");
    }
  }
  for (const Rectangle& r : rectangles) {
    // The farthest corner from the origin decides.
    if (!(r.half_size.minCoeff() > 0.0) || (r.centre.cwiseAbs() + r.half_size).norm() >= radius) {
      throw Error(ErrorKind::invalid_argument, "rectangle reaches outside the domain");
    }
  }
  for (const Disk& c : disks) {
    if (!(c.radius > 0.0) || c.centre.norm() + c.radius >= radius) {
      throw Error(ErrorKind::invalid_argument, "disk reaches outside the domain");
    }
  }
  // Sampled on a grid plus every shape centre; shapes are far coarser than the grid.
  std::vector<Point2> probes;
  for (const Blob& b : blobs) probes.push_back(b.centre);
  for (const Rectangle& r : rectangles) probes.push_back(r.centre);
  for (const Disk& c : disks) probes.push_back(c.centre);
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const Point2 p(radius * (2.0 * i / n - 1.0), radius * (2.0 * j / n - 1.0));
      if (p.norm() <= radius) probes.push_back(p);
    }
  }
  for (const Point2& p : probes) {
    if (!((*this)(p) > 0.0)) throw Error(ErrorKind::invalid_argument, "phantom conductivity is not positive");
  }
}

Phantom Phantom::smooth_blob() {
  Phantom p;
  p.name = "smooth-blob";
  p.blobs.push_back({Point2(-5.0, 5.0), 2.5, -1.5});
  return p;
}

Phantom Phantom::rectangles_case() {
  Phantom p;
  p.name = "rectangles";
  p.rectangles.push_back({Point2(-6.0, 0.0), Point2(1.5, 4.0), -1.5});
  p.rectangles.push_back({Point2(2.0, 6.5), Point2(4.0, 1.5), -1.5});
  p.rectangles.push_back({Point2(4.0, -5.0), Point2(2.0, 2.0), -1.5});
  return p;
}

Phantom Phantom::disk_pair() {
  Phantom p;
  p.name = "disk-pair";
  p.disks.push_back({Point2(-5.0, -3.0), 3.0, -1.5});
  p.disks.push_back({Point2(5.0, 3.0), 3.0, 1.5});
  return p;
}

std::vector<std::string> Phantom::names() { return {"smooth-blob", "rectangles", "disk-pair"}; }

Phantom Phantom::by_name(const std::string& name) {
  if (name == "smooth-blob") return smooth_blob();
  if (name == "rectangles") return rectangles_case();
  if (name == "disk-pair") return disk_pair();
  throw Error(ErrorKind::invalid_argument, "unknown phantom '" + name + "'");
}

}  // namespace podeit
