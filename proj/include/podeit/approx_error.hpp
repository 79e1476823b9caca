#pragma once

#include <optional>

#include <Eigen/Core>

#include "podeit/cem.hpp"
#include "podeit/rom.hpp"

namespace podeit {

/// Gaussian additive error N(mean, covariance). chol_prec is L with
/// L^T L = (covariance + jitter I)^{-1}, jitter = 1e-10 * trace / n; it is empty
/// when the covariance vanishes (for example the exact-subspace reduction error).
struct NoiseModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::optional<Eigen::MatrixXd> chol_prec;

  int dimension() const { return static_cast<int>(mean.size()); }

  static NoiseModel from_moments(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
  /// Zero-mean, diagonal covariance std^2.
  static NoiseModel from_std(const Eigen::VectorXd& std);

  /// Throws factorization_failed when no precision factor exists.
  const Eigen::MatrixXd& precision_factor() const;
};

struct NoiseSummary {
  double trace = 0.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double mean_norm = 0.0;
};

NoiseSummary summarize(const NoiseModel& model);

/// Measurement noise model for the given noise specification evaluated at
/// noiseless voltages (typically those of the prior mean).
NoiseModel measurement_noise_model(const Eigen::VectorXd& noiseless, const NoiseSpec& spec);

/// Statistics of eps' = V(sigma_i) - V_pod(alpha_i) where alpha_i projects sigma_i
/// onto the conductivity basis. `full_voltages` holds V(sigma_i) as columns, so
/// the forward solves of the POD ensemble can be reused.
NoiseModel estimate_reduction_error(const Eigen::MatrixXd& sigma_samples, const Eigen::MatrixXd& full_voltages,
                                    const ReducedModel& reduced);

/// Same, solving the full model for every sample. Checks that the full and
/// reduced models share mesh and protocol.
NoiseModel estimate_reduction_error(const Eigen::MatrixXd& sigma_samples, const CemModel& full,
                                    const ReducedModel& reduced);

/// eps'' = eps + eps': means and covariances add.
NoiseModel compose_total_error(const NoiseModel& measurement, const NoiseModel& reduction);

}  // namespace podeit
