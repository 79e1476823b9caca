#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "podeit/mesh.hpp"

namespace podeit {

/// Squared-exponential covariance var * exp(-d^2 / (2 l^2)) plus a nugget
/// nugget * var on the diagonal.
struct SmoothnessKernel {
  double nodal_variance = 0.25;
  double correlation_length = 4.0;
  double nugget = 1e-4;

  void validate() const;
  double operator()(double distance) const;
};

/// Gaussian prior over nodal conductivity.
///
/// chol_cov is the lower Cholesky factor of the covariance (sampling);
/// chol_prec = chol_cov^{-1} satisfies chol_prec^T chol_prec = covariance^{-1}.
struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd chol_cov;
  Eigen::MatrixXd chol_prec;
  SmoothnessKernel kernel;

  int dimension() const { return static_cast<int>(mean.size()); }
  Eigen::MatrixXd precision() const { return chol_prec.transpose() * chol_prec; }
  std::uint64_t content_hash() const;
};

/// Throws factorization_failed when the kernel matrix is numerically indefinite.
GaussianPrior build_prior(const Mesh2D& mesh, const SmoothnessKernel& kernel, double mean_value);

/// `count` samples as columns, mean + chol_cov * w with w standard normal drawn
/// from a generator seeded with `seed`. Bit-identical for equal seeds.
Eigen::MatrixXd sample_prior(const GaussianPrior& prior, int count, std::uint64_t seed);

}  // namespace podeit
