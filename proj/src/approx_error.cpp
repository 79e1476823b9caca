#include "podeit/approx_error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "podeit/error.hpp"

namespace podeit {

NoiseModel NoiseModel::from_moments(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw Error(ErrorKind::dimension_mismatch, "covariance shape differs from mean length");
  }
  NoiseModel m;
  m.mean = std::move(mean);
  m.covariance = 0.5 * (covariance + covariance.transpose());
  const Eigen::Index n = m.mean.size();
  const double trace = m.covariance.trace();
  if (n == 0 || !(trace > 0.0)) return m;
  Eigen::MatrixXd reg = m.covariance;
  reg.diagonal().array() += 1e-10 * trace / n;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) return m;
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  llt.matrixL().solveInPlace(l);
  m.chol_prec = std::move(l);
  return m;
}

NoiseModel NoiseModel::from_std(const Eigen::VectorXd& std) {
  return from_moments(Eigen::VectorXd::Zero(std.size()), std.array().square().matrix().asDiagonal());
}

const Eigen::MatrixXd& NoiseModel::precision_factor() const {
  if (!chol_prec) throw Error(ErrorKind::factorization_failed, "noise covariance has no precision factor");
  return *chol_prec;
}

NoiseSummary summarize(const NoiseModel& model) {
  NoiseSummary s;
  s.trace = model.covariance.trace();
  s.mean_norm = model.mean.norm();
  if (model.dimension() > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.covariance, Eigen::EigenvaluesOnly);
    s.min_eigenvalue = eig.eigenvalues().minCoeff();
    s.max_eigenvalue = eig.eigenvalues().maxCoeff();
  }
  return s;
}

NoiseModel measurement_noise_model(const Eigen::VectorXd& noiseless, const NoiseSpec& spec) {
  return NoiseModel::from_std(spec.standard_deviation(noiseless));
}

NoiseModel estimate_reduction_error(const Eigen::MatrixXd& sigma_samples, const Eigen::MatrixXd& full_voltages,
                                    const ReducedModel& reduced) {
  const Eigen::Index T = sigma_samples.cols();
  if (T < 2) throw Error(ErrorKind::ensemble_too_small, "reduction error needs at least two samples");
  if (full_voltages.cols() != T || full_voltages.rows() != reduced.n_measurements()) {
    throw Error(ErrorKind::dimension_mismatch, "full voltages do not match samples and protocol");
  }
  const Eigen::MatrixXd alpha = project_columns(reduced.sigma_basis(), sigma_samples);
  Eigen::MatrixXd eps(full_voltages.rows(), T);
  for (Eigen::Index j = 0; j < T; ++j) eps.col(j) = full_voltages.col(j) - reduced_forward(reduced, alpha.col(j));
  const Eigen::VectorXd mean = eps.rowwise().mean();
  const Eigen::MatrixXd c = eps.colwise() - mean;
  return NoiseModel::from_moments(mean, c * c.transpose() / static_cast<double>(T - 1));
}

NoiseModel estimate_reduction_error(const Eigen::MatrixXd& sigma_samples, const CemModel& full,
                                    const ReducedModel& reduced) {
  if (full.mesh().content_hash() != reduced.mesh_hash()) {
    throw Error(ErrorKind::model_mismatch, "full and reduced models live on different meshes");
  }
  if (sigma_samples.cols() < 2) throw Error(ErrorKind::ensemble_too_small, "reduction error needs at least two samples");
  const Ensemble ens = solve_ensemble(full, sigma_samples, reduced.protocol(), {});
  return estimate_reduction_error(sigma_samples, ens.voltages, reduced);
}

NoiseModel compose_total_error(const NoiseModel& measurement, const NoiseModel& reduction) {
  if (measurement.dimension() != reduction.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "noise models have different dimensions");
  }
  return NoiseModel::from_moments(measurement.mean + reduction.mean, measurement.covariance + reduction.covariance);
}

}  // namespace podeit
