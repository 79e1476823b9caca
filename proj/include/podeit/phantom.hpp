#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "podeit/mesh.hpp"

namespace podeit {

/// Piecewise conductivity targets on the disk. Shapes are combined additively on
/// top of the background; rectangles and disks are sharp, blobs are Gaussian bumps
/// amplitude * exp(-|x - c|^2 / (2 width^2)).
struct Phantom {
  struct Blob {
    Point2 centre;
    double width;
    double amplitude;
  };
  struct Rectangle {
    Point2 centre;
    Point2 half_size;
    double contrast;
  };
  struct Disk {
    Point2 centre;
    double radius;
    double contrast;
  };

  std::string name;
  double background = 3.0;
  std::vector<Blob> blobs;
  std::vector<Rectangle> rectangles;
  std::vector<Disk> disks;

  double operator()(const Point2& x) const;
  Eigen::VectorXd nodal(const Mesh2D& mesh) const;

  /// Throws invalid_argument when a shape leaves the disk of radius `radius` or
  /// the resulting conductivity is not positive.
  void validate(double radius) const;

  /// Case 1: smooth resistive inclusion. Case 2: three resistive rectangles.
  /// Case 3: a resistive and a conductive disk. Geometries are approximations
  /// chosen by eye, centred on a disk of radius 14.
  static Phantom smooth_blob();
  static Phantom rectangles_case();
  static Phantom disk_pair();
  /// Names: smooth-blob, rectangles, disk-pair.
  static Phantom by_name(const std::string& name);
  static std::vector<std::string> names();
};

}  // namespace podeit
