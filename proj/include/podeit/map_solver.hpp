#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "podeit/approx_error.hpp"
#include "podeit/cem.hpp"
#include "podeit/prior.hpp"
#include "podeit/rom.hpp"

namespace podeit {

struct GnConfig {
  int max_iterations = 50;
  double relative_cost_tolerance = 1e-6;
  double backtracking = 0.5;
  int max_trials = 20;
  /// Steps with |d| <= step_floor * (1 + |x|) count as a stationary point.
  double step_floor = 1e-12;

  void validate() const;
};

enum class Termination { cost_tolerance, stationary, line_search_stalled, max_iterations };

std::string to_string(Termination t);

struct MapResult {
  Eigen::VectorXd estimate;  // nodal sigma (full) or POD coefficients (reduced)
  Eigen::VectorXd nodal;     // nodal conductivity in both cases
  std::vector<double> cost_trace;  // cost at the start and after every accepted step
  int iterations = 0;
  double wall_time = 0.0;  // seconds
  bool converged = false;
  Termination termination = Termination::max_iterations;
};

struct Linearization {
  Eigen::VectorXd voltages;
  Eigen::MatrixXd jacobian;
};

/// Regularized least squares
///   |L_p (x - x_p)|^2 + |L_e (data - F(x))|^2
/// with `data` already shifted by the noise mean. `forward` may throw an Error
/// of kind indefinite_reduced_system or nonpositive_conductivity, which rejects
/// a line-search trial instead of aborting.
struct GnProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward;
  std::function<Linearization(const Eigen::VectorXd&)> linearize;
  Eigen::VectorXd data;
  Eigen::MatrixXd noise_factor;
  Eigen::MatrixXd prior_factor;
  Eigen::VectorXd prior_mean;

  double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& voltages) const;
};

/// Gauss-Newton with backtracking on the cost. Throws diverged when no trial of
/// the first line search decreases the cost. `nodal` is left empty.
MapResult gauss_newton(const GnProblem& problem, Eigen::VectorXd x0, const GnConfig& config);

/// Full-order MAP estimate started at the prior mean. `noise` is the
/// measurement error model.
MapResult map_full(const CemModel& model, const GaussianPrior& prior, const NoiseModel& noise,
                   const StimulationProtocol& protocol, const Eigen::VectorXd& measured,
                   const GnConfig& config = {});

/// Reduced-order MAP estimate in POD coordinates started at zero, with prior
/// covariance diag(eigenvalues) of the conductivity basis and the total error
/// model `noise`.
MapResult map_reduced(const ReducedModel& model, const NoiseModel& noise, const Eigen::VectorXd& measured,
                      const GnConfig& config = {});

/// Linearized (Laplace) posterior at a MAP estimate.
struct PosteriorSummary {
  Eigen::MatrixXd covariance;      // in the estimate's coordinates
  Eigen::VectorXd pointwise_std;   // nodal
};

/// (J^T L^T L J + P)^{-1} with P = prior_factor^T prior_factor.
Eigen::MatrixXd laplace_covariance(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& noise_factor,
                                   const Eigen::MatrixXd& prior_factor);

/// Both throw not_converged for a result that did not converge.
PosteriorSummary posterior_full(const CemModel& model, const GaussianPrior& prior, const NoiseModel& noise,
                                const StimulationProtocol& protocol, const MapResult& result);
/// Nodal std propagated through the conductivity modes.
PosteriorSummary posterior_reduced(const ReducedModel& model, const NoiseModel& noise, const MapResult& result);

/// Nodal field and band sampled along the chord a-b by linear interpolation.
struct CrossSection {
  std::vector<Point2> points;
  Eigen::VectorXd arc;  // distance from a
  Eigen::VectorXd estimate;
  Eigen::VectorXd std;
  Eigen::VectorXd truth;  // empty unless given

  Eigen::VectorXd lower() const { return estimate - 2.0 * std; }
  Eigen::VectorXd upper() const { return estimate + 2.0 * std; }
  /// Fraction of points with truth inside estimate +- 2 std.
  double coverage() const;
};

CrossSection cross_section(const Mesh2D& mesh, const Eigen::VectorXd& estimate, const Eigen::VectorXd& std,
                           const Point2& a, const Point2& b, int samples, const Eigen::VectorXd& truth = {});

/// |estimate - truth|_L2 / |truth|_L2 with P1 interpolation on `mesh`.
double relative_l2_error(const Mesh2D& mesh, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

/// True when every entry is <= its predecessor.
bool nonincreasing(const std::vector<double>& trace);

}  // namespace podeit
