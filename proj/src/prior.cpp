#include "podeit/prior.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "podeit/error.hpp"
#include "podeit/hash.hpp"

namespace podeit {

void SmoothnessKernel::validate() const {
  if (!(nodal_variance > 0.0)) throw Error(ErrorKind::invalid_argument, "prior variance must be positive");
  if (!(correlation_length > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "correlation length must be positive");
  }
  if (!(nugget >= 0.0 && nugget <= 1e-4)) {
    throw Error(ErrorKind::invalid_argument, "nugget must lie in [0, 1e-4]");
  }
}

double SmoothnessKernel::operator()(double distance) const {
  return nodal_variance * std::exp(-distance * distance / (2.0 * correlation_length * correlation_length));
}

std::uint64_t GaussianPrior::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.prior.v1"));
  h.add_matrix(mean);
  h.add(kernel.nodal_variance).add(kernel.correlation_length).add(kernel.nugget);
  h.add<std::int64_t>(covariance.rows());
  return h.value();
}

GaussianPrior build_prior(const Mesh2D& mesh, const SmoothnessKernel& kernel, double mean_value) {
  kernel.validate();
  const int n = mesh.n_linear_nodes();
  if (n < 1) throw Error(ErrorKind::invalid_argument, "mesh has no vertices");
  GaussianPrior prior;
  prior.kernel = kernel;
  prior.mean = Eigen::VectorXd::Constant(n, mean_value);
  prior.covariance.resize(n, n);
  const auto& v = mesh.vertices();
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const double c = kernel((v[i] - v[j]).norm());
      prior.covariance(i, j) = c;
      prior.covariance(j, i) = c;
    }
  }
  // Diagonal set explicitly so every entry equals the configured variance (+ nugget).
  prior.covariance.diagonal().setConstant(kernel.nodal_variance * (1.0 + kernel.nugget));

  Eigen::LLT<Eigen::MatrixXd> llt(prior.covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::factorization_failed, "prior covariance is numerically indefinite; raise the nugget");
  }
  prior.chol_cov = llt.matrixL();
  prior.chol_prec = Eigen::MatrixXd::Identity(n, n);
  llt.matrixL().solveInPlace(prior.chol_prec);
  return prior;
}

Eigen::MatrixXd sample_prior(const GaussianPrior& prior, int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorKind::invalid_argument, "sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(prior.dimension(), count);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = normal(rng);
  Eigen::MatrixXd out = prior.chol_cov.triangularView<Eigen::Lower>() * w;
  out.colwise() += prior.mean;
  return out;
}

}  // namespace podeit
