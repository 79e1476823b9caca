#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>

namespace podeit {

struct TrianglePoint {
  Eigen::Vector3d barycentric;
  double weight;  // weights sum to one; multiply by the element area
};

/// Seven-point symmetric rule, exact for polynomials of degree five.
inline const std::array<TrianglePoint, 7>& triangle_rule_degree5() {
  static const std::array<TrianglePoint, 7> rule = [] {
    const double s = std::sqrt(15.0);
    const double a1 = (6.0 - s) / 21.0, b1 = (9.0 + 2.0 * s) / 21.0;
    const double a2 = (6.0 + s) / 21.0, b2 = (9.0 - 2.0 * s) / 21.0;
    const double w1 = (155.0 - s) / 1200.0, w2 = (155.0 + s) / 1200.0;
    return std::array<TrianglePoint, 7>{{
        {Eigen::Vector3d(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 9.0 / 40.0},
        {Eigen::Vector3d(a1, a1, b1), w1},
        {Eigen::Vector3d(a1, b1, a1), w1},
        {Eigen::Vector3d(b1, a1, a1), w1},
        {Eigen::Vector3d(a2, a2, b2), w2},
        {Eigen::Vector3d(a2, b2, a2), w2},
        {Eigen::Vector3d(b2, a2, a2), w2},
    }};
  }();
  return rule;
}

struct LinePoint {
  double point;   // in [0, 1]
  double weight;  // weights sum to one
};

/// Four-point Gauss-Legendre rule mapped to [0, 1], exact to degree seven.
inline const std::array<LinePoint, 4>& gauss_legendre_4() {
  static const std::array<LinePoint, 4> rule = [] {
    const double r = std::sqrt(6.0 / 5.0);
    const double x1 = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * r);
    const double x2 = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * r);
    const double w1 = (18.0 + std::sqrt(30.0)) / 36.0;
    const double w2 = (18.0 - std::sqrt(30.0)) / 36.0;
    return std::array<LinePoint, 4>{{
        {0.5 * (1.0 - x2), 0.5 * w2},
        {0.5 * (1.0 - x1), 0.5 * w1},
        {0.5 * (1.0 + x1), 0.5 * w1},
        {0.5 * (1.0 + x2), 0.5 * w2},
    }};
  }();
  return rule;
}

}  // namespace podeit
