#include "podeit/map_solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "podeit/error.hpp"

namespace podeit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool rejectable(const Error& e) {
  return e.kind() == ErrorKind::indefinite_reduced_system || e.kind() == ErrorKind::nonpositive_conductivity;
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& h, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::factorization_failed, "normal equations are singular");
  return ldlt.solve(rhs);
}

Eigen::MatrixXd diagonal_factor(const Eigen::VectorXd& variances) {
  if ((variances.array() <= 0.0).any()) {
    throw Error(ErrorKind::invalid_argument, "prior variances must be positive");
  }
  return variances.cwiseSqrt().cwiseInverse().asDiagonal();
}

}  // namespace

void GnConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorKind::invalid_argument, "max_iterations must be positive");
  if (!(relative_cost_tolerance > 0.0)) throw Error(ErrorKind::invalid_argument, "cost tolerance must be positive");
  if (!(backtracking > 0.0 && backtracking < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "backtracking factor must lie in (0, 1)");
  }
  if (max_trials < 1) throw Error(ErrorKind::invalid_argument, "max_trials must be positive");
  if (step_floor < 0.0) throw Error(ErrorKind::invalid_argument, "step_floor must be nonnegative");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::cost_tolerance: return "cost_tolerance";
    case Termination::stationary: return "stationary";
    case Termination::line_search_stalled: return "line_search_stalled";
    case Termination::max_iterations: return "max_iterations";
  }
  return "unknown";
}

double GnProblem::cost(const Eigen::VectorXd& x, const Eigen::VectorXd& voltages) const {
  return (prior_factor * (x - prior_mean)).squaredNorm() + (noise_factor * (data - voltages)).squaredNorm();
}

MapResult gauss_newton(const GnProblem& problem, Eigen::VectorXd x, const GnConfig& config) {
  config.validate();
  const auto t0 = Clock::now();
  if (problem.prior_factor.cols() != x.size() || problem.prior_mean.size() != x.size() ||
      problem.noise_factor.cols() != problem.data.size()) {
    throw Error(ErrorKind::dimension_mismatch, "Gauss-Newton problem dimensions are inconsistent");
  }
  const Eigen::MatrixXd prior_precision = problem.prior_factor.transpose() * problem.prior_factor;

  MapResult r;
  Linearization lin = problem.linearize(x);
  double cost = problem.cost(x, lin.voltages);
  r.cost_trace.push_back(cost);

  while (true) {
    if (r.iterations >= config.max_iterations) {
      r.termination = Termination::max_iterations;
      break;
    }
    const Eigen::MatrixXd lj = problem.noise_factor * lin.jacobian;
    const Eigen::VectorXd lr = problem.noise_factor * (problem.data - lin.voltages);
    const Eigen::MatrixXd h = lj.transpose() * lj + prior_precision;
    const Eigen::VectorXd g = lj.transpose() * lr - prior_precision * (x - problem.prior_mean);
    const Eigen::VectorXd d = solve_spd(h, g);
    if (d.norm() <= config.step_floor * (1.0 + x.norm()) || cost == 0.0) {
      r.termination = Termination::stationary;
      r.converged = true;
      break;
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_cost = 0.0;
    for (int k = 0; k < config.max_trials; ++k, step *= config.backtracking) {
      trial = x + step * d;
      try {
        trial_cost = problem.cost(trial, problem.forward(trial));
      } catch (const Error& e) {
        if (!rejectable(e)) throw;
        continue;
      }
      if (trial_cost < cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (r.iterations == 0) throw Error(ErrorKind::diverged, "line search found no decrease at the first iteration");
      r.termination = Termination::line_search_stalled;
      r.converged = true;
      break;
    }

    ++r.iterations;
    const double previous = cost;
    x = std::move(trial);
    cost = trial_cost;
    r.cost_trace.push_back(cost);
    if ((previous - cost) <= config.relative_cost_tolerance * previous) {
      r.termination = Termination::cost_tolerance;
      r.converged = true;
      break;
    }
    lin = problem.linearize(x);
  }
  r.estimate = std::move(x);
  r.wall_time = seconds_since(t0);
  return r;
}

MapResult map_full(const CemModel& model, const GaussianPrior& prior, const NoiseModel& noise,
                   const StimulationProtocol& protocol, const Eigen::VectorXd& measured, const GnConfig& config) {
  if (prior.dimension() != model.mesh().n_linear_nodes()) {
    throw Error(ErrorKind::model_mismatch, "prior dimension differs from the mesh node count");
  }
  if (measured.size() != protocol.n_measurements() || noise.dimension() != measured.size()) {
    throw Error(ErrorKind::dimension_mismatch, "measurement length does not match protocol or noise model");
  }
  const auto t0 = Clock::now();
  GnProblem p;
  p.forward = [&](const Eigen::VectorXd& s) { return forward_voltages(model, s, protocol); };
  p.linearize = [&](const Eigen::VectorXd& s) {
    ForwardWithJacobian fj = forward_and_jacobian(model, s, protocol);
    return Linearization{std::move(fj.voltages), std::move(fj.jacobian)};
  };
  p.data = measured - noise.mean;
  p.noise_factor = noise.precision_factor();
  p.prior_factor = prior.chol_prec;
  p.prior_mean = prior.mean;
  MapResult r = gauss_newton(p, prior.mean, config);
  r.nodal = r.estimate;
  r.wall_time = seconds_since(t0);
  return r;
}

MapResult map_reduced(const ReducedModel& model, const NoiseModel& noise, const Eigen::VectorXd& measured,
                      const GnConfig& config) {
  if (measured.size() != model.n_measurements() || noise.dimension() != measured.size()) {
    throw Error(ErrorKind::dimension_mismatch, "measurement length does not match reduced model or noise model");
  }
  const auto t0 = Clock::now();
  const int n = model.n_sigma_modes();
  GnProblem p;
  p.forward = [&](const Eigen::VectorXd& a) { return reduced_forward(model, a); };
  p.linearize = [&](const Eigen::VectorXd& a) {
    ReducedForwardWithJacobian fj = reduced_forward_and_jacobian(model, a);
    return Linearization{std::move(fj.voltages), std::move(fj.jacobian)};
  };
  p.data = measured - noise.mean;
  p.noise_factor = noise.precision_factor();
  p.prior_factor = diagonal_factor(model.sigma_basis().eigenvalues);
  p.prior_mean = Eigen::VectorXd::Zero(n);
  MapResult r = gauss_newton(p, Eigen::VectorXd::Zero(n), config);
  r.nodal = model.nodal_conductivity(r.estimate);
  r.wall_time = seconds_since(t0);
  return r;
}

Eigen::MatrixXd laplace_covariance(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& noise_factor,
                                   const Eigen::MatrixXd& prior_factor) {
  const Eigen::MatrixXd lj = noise_factor * jacobian;
  const Eigen::MatrixXd h = lj.transpose() * lj + prior_factor.transpose() * prior_factor;
  Eigen::MatrixXd cov = solve_spd(h, Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  return 0.5 * (cov + cov.transpose());
}

PosteriorSummary posterior_full(const CemModel& model, const GaussianPrior& prior, const NoiseModel& noise,
                                const StimulationProtocol& protocol, const MapResult& result) {
  if (!result.converged) throw Error(ErrorKind::not_converged, "posterior needs a converged MAP estimate");
  const Eigen::MatrixXd j = forward_and_jacobian(model, result.estimate, protocol).jacobian;
  PosteriorSummary s;
  s.covariance = laplace_covariance(j, noise.precision_factor(), prior.chol_prec);
  s.pointwise_std = s.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return s;
}

PosteriorSummary posterior_reduced(const ReducedModel& model, const NoiseModel& noise, const MapResult& result) {
  if (!result.converged) throw Error(ErrorKind::not_converged, "posterior needs a converged MAP estimate");
  const Eigen::MatrixXd j = reduced_jacobian(model, result.estimate);
  PosteriorSummary s;
  s.covariance =
      laplace_covariance(j, noise.precision_factor(), diagonal_factor(model.sigma_basis().eigenvalues));
  const Eigen::MatrixXd& v = model.sigma_basis().modes;
  s.pointwise_std = (v * s.covariance).cwiseProduct(v).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
  return s;
}

double CrossSection::coverage() const {
  if (truth.size() != estimate.size() || truth.size() == 0) {
    throw Error(ErrorKind::invalid_argument, "coverage needs the true profile");
  }
  const Eigen::VectorXd lo = lower(), hi = upper();
  int inside = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth[i] >= lo[i] && truth[i] <= hi[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

CrossSection cross_section(const Mesh2D& mesh, const Eigen::VectorXd& estimate, const Eigen::VectorXd& std,
                           const Point2& a, const Point2& b, int samples, const Eigen::VectorXd& truth) {
  if (samples < 2) throw Error(ErrorKind::invalid_argument, "cross-section needs at least two samples");
  const int n = mesh.n_linear_nodes();
  if (estimate.size() != n || std.size() != n || (truth.size() != 0 && truth.size() != n)) {
    throw Error(ErrorKind::dimension_mismatch, "cross-section fields must be nodal");
  }
  CrossSection c;
  c.arc.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    c.points.push_back(a + t * (b - a));
    c.arc[i] = t * (b - a).norm();
  }
  const PointLocator locator(mesh);
  c.estimate = evaluate_linear_field(mesh, locator, estimate, c.points);
  c.std = evaluate_linear_field(mesh, locator, std, c.points);
  if (truth.size() != 0) c.truth = evaluate_linear_field(mesh, locator, truth, c.points);
  return c;
}

double relative_l2_error(const Mesh2D& mesh, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  const double denom = l2_norm_linear(mesh, truth);
  if (!(denom > 0.0)) throw Error(ErrorKind::invalid_argument, "reference field has zero norm");
  return l2_norm_linear(mesh, estimate - truth) / denom;
}

bool nonincreasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

}  // namespace podeit
