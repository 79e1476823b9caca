#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "podeit/approx_error.hpp"
#include "podeit/prior.hpp"
#include "podeit/rom.hpp"

namespace podeit {

struct OfflineConfig {
  int samples = 2000;
  std::uint64_t seed = 1;
  Truncation sigma = Truncation::fraction(0.99);
  Truncation potential = Truncation::fraction(0.99);
  /// Solve only injection 0 and rotate its basis when the protocol and mesh allow it.
  bool rotate = true;
};

/// Everything the offline stage produces. The conductivity samples and their
/// full-order voltages are kept so that the reduction error can be re-estimated
/// for truncated bases without new full solves.
struct OfflineProducts {
  ReducedModel model;
  NoiseModel reduction_error;
  Eigen::MatrixXd sigma_samples;
  Eigen::MatrixXd ensemble_voltages;
  bool rotated = false;
  double ensemble_seconds = 0.0;
  double pod_seconds = 0.0;
  double assembly_seconds = 0.0;
  double error_seconds = 0.0;
};

OfflineProducts build_offline(const CemModel& model, const GaussianPrior& prior, const StimulationProtocol& protocol,
                              const OfflineConfig& config);

/// Leading n_sigma / n_potential modes of `model` and the matching reduction
/// error from the stored ensemble.
struct TruncatedModel {
  ReducedModel model;
  NoiseModel reduction_error;
};

TruncatedModel retruncate(const ReducedModel& model, const Eigen::MatrixXd& sigma_samples,
                          const Eigen::MatrixXd& ensemble_voltages, int n_sigma, int n_potential);

}  // namespace podeit
