#pragma once

#include <cstdint>
#include <map>

#include <Eigen/Core>

#include "podeit/mesh.hpp"
#include "podeit/prior.hpp"

namespace podeit {

/// chi(k) = 1 - (lambda_{k+1} + ... + lambda_n) / total, where total is the trace
/// of the covariance (equal to the eigenvalue sum up to rounding). Using the tail
/// and the trace makes equal spectral tails give bit-identical curves.
class RetainedVarianceCurve {
 public:
  RetainedVarianceCurve() = default;
  explicit RetainedVarianceCurve(const Eigen::VectorXd& spectrum, double total = 0.0);

  const Eigen::VectorXd& values() const { return values_; }
  /// chi(k) for k >= 1; 1 beyond the stored length, 0 for k = 0.
  double at(int k) const;
  /// Smallest k with chi(k) >= threshold.
  int dimension_for(double threshold) const;
  std::map<double, int> threshold_dims(std::initializer_list<double> thresholds) const;

 private:
  Eigen::VectorXd values_;
};

/// Either a retained-variance fraction in (0, 1] or an explicit mode count (> 0 wins).
struct Truncation {
  double retain = 0.99;
  int count = 0;

  static Truncation fraction(double r) { return {r, 0}; }
  static Truncation modes(int n) { return {1.0, n}; }
};

enum class PodAmbient { conductivity, potential };

/// Orthonormal POD basis with mean. `spectrum` keeps every eigenvalue of the
/// covariance (untruncated) so the retained-variance curve stays available after
/// truncation; `eigenvalues` are the retained ones.
struct PodBasis {
  Eigen::MatrixXd modes;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd spectrum;
  double total_variance = 0.0;  // covariance trace; 0 means the spectrum sum
  Eigen::VectorXd mean;
  PodAmbient ambient = PodAmbient::conductivity;
  int injection = 0;

  int n_modes() const { return static_cast<int>(modes.cols()); }
  int dimension() const { return static_cast<int>(modes.rows()); }
  RetainedVarianceCurve curve() const { return RetainedVarianceCurve(spectrum, total_variance); }
  PodBasis truncated(int n) const;
  std::uint64_t content_hash() const;
};

/// Eigenbasis of the prior covariance, truncated per `t`, mean = prior mean.
PodBasis conductivity_pod(const GaussianPrior& prior, Truncation t);

/// POD of an ensemble of potential vectors (columns). Uses the method of
/// snapshots when there are fewer samples than unknowns.
PodBasis potential_pod(const Eigen::MatrixXd& ensemble, Truncation t, int injection = 0);

/// Identity modes over the full ambient space (exact-subspace limit).
PodBasis identity_basis(const Eigen::VectorXd& mean, PodAmbient ambient, int injection = 0);

/// Basis for injection `injection` (0-based) obtained by rotating an injection-0
/// basis by injection * 2 pi / L: mode_k(x) = mode_0(R(-angle) x), evaluated by P2
/// interpolation and re-orthonormalized.
PodBasis rotate_potential_basis(const PodBasis& basis, const Mesh2D& mesh, int injection);

Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& field);
Eigen::MatrixXd project_columns(const PodBasis& basis, const Eigen::MatrixXd& fields);
Eigen::VectorXd reconstruct(const PodBasis& basis, const Eigen::VectorXd& coefficients);

/// Makes the largest-magnitude entry of every column positive.
void normalize_signs(Eigen::MatrixXd& modes);

}  // namespace podeit
