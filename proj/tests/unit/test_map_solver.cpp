#include <doctest.h>

#include <cmath>

#include <Eigen/LU>

#include "podeit/error.hpp"
#include "podeit/map_solver.hpp"

using namespace podeit;

namespace {

Eigen::VectorXd blob(const Mesh2D& mesh, double background, double amplitude, Point2 centre, double width) {
  Eigen::VectorXd s(mesh.n_linear_nodes());
  for (int i = 0; i < s.size(); ++i) {
    s[i] = background + amplitude * std::exp(-(mesh.vertices()[i] - centre).squaredNorm() / (2 * width * width));
  }
  return s;
}

struct Desk {
  ElectrodeLayout layout{4, 2.0, 5.0, 0.0};
  Mesh2D mesh = generate_disk_mesh(layout, 100);
  StimulationProtocol protocol = StimulationProtocol::opposite_adjacent(4);
  CemModel model{mesh, ContactImpedances::uniform(4, 0.01), 3e-3};
  GaussianPrior prior = build_prior(mesh, {0.25, 2.0, 1e-4}, 3.0);
};

const Desk& desk() {
  static const Desk d;
  return d;
}

// One triangle, one electrode per edge.
Mesh2D single_triangle() {
  return Mesh2D::build({Point2(0, 0), Point2(1, 0), Point2(0, 1)}, {{0, 1, 2}},
                       {{{0, 1, 0.0}}, {{1, 2, 0.0}}, {{2, 0, 0.0}}});
}

StimulationProtocol triangle_protocol() {
  StimulationProtocol p;
  p.currents.resize(3, 2);
  p.currents << 1, 0, -1, 1, 0, -1;
  p.measurement.resize(3, 3);
  p.measurement << 1, -1, 0, 0, 1, -1, -1, 0, 1;
  return p;
}

}  // namespace

TEST_CASE("Gauss-Newton configuration validation") {
  GnConfig c;
  CHECK_NOTHROW(c.validate());
  c.backtracking = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.relative_cost_tolerance = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("scalar problem matches exhaustive grid minimisation") {
  GnProblem p;
  p.forward = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(2);
    v << std::exp(x[0]), 1.0 / (1.0 + x[0] * x[0]);
    return v;
  };
  p.linearize = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(2, 1);
    j << std::exp(x[0]), -2.0 * x[0] / std::pow(1.0 + x[0] * x[0], 2);
    return Linearization{p.forward(x), j};
  };
  p.data = Eigen::Vector2d(2.5, 0.4);
  p.noise_factor = Eigen::Matrix2d::Identity() * 10.0;
  p.prior_factor = Eigen::MatrixXd::Identity(1, 1) * 2.0;
  p.prior_mean = Eigen::VectorXd::Zero(1);
  GnConfig cfg;
  cfg.relative_cost_tolerance = 1e-12;
  const MapResult r = gauss_newton(p, Eigen::VectorXd::Zero(1), cfg);
  CHECK(r.converged);
  double best = INFINITY, arg = 0.0;
  const double h = 1e-5;
  for (double x = -3.0; x <= 3.0; x += h) {
    const Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x);
    const double c = p.cost(xv, p.forward(xv));
    if (c < best) best = c, arg = x;
  }
  CHECK(std::abs(r.estimate[0] - arg) <= h);
  for (std::size_t i = 1; i < r.cost_trace.size(); ++i) CHECK(r.cost_trace[i] < r.cost_trace[i - 1]);
}

TEST_CASE("three-node surrogate matches refined grid search of the cost") {
  const Mesh2D mesh = single_triangle();
  const CemModel model(mesh, ContactImpedances::uniform(3, 0.1));
  const StimulationProtocol protocol = triangle_protocol();
  const GaussianPrior prior = build_prior(mesh, {0.25, 0.8, 1e-4}, 3.0);
  const Eigen::VectorXd truth = Eigen::Vector3d(2.2, 3.4, 3.9);
  const Eigen::VectorXd v = forward_voltages(model, truth, protocol);
  const NoiseModel noise = NoiseModel::from_std(Eigen::VectorXd::Constant(v.size(), 0.01 * v.cwiseAbs().maxCoeff()));
  GnConfig cfg;
  cfg.relative_cost_tolerance = 1e-14;
  const MapResult r = map_full(model, prior, noise, protocol, v, cfg);
  CHECK(r.converged);

  GnProblem p;
  p.data = v;
  p.noise_factor = noise.precision_factor();
  p.prior_factor = prior.chol_prec;
  p.prior_mean = prior.mean;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1.0), hi = Eigen::Vector3d::Constant(5.0);
  Eigen::Vector3d best_x = prior.mean;
  const int n = 24;
  double cell = 0.0;
  for (int level = 0; level < 5; ++level) {
    const Eigen::Vector3d step = (hi - lo) / n;
    double best = INFINITY;
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; b <= n; ++b) {
        for (int c = 0; c <= n; ++c) {
          const Eigen::Vector3d x = lo + Eigen::Vector3d(a, b, c).cwiseProduct(step);
          const double cost = p.cost(x, forward_voltages(model, x, protocol));
          if (cost < best) best = cost, best_x = x;
        }
      }
    }
    cell = step.maxCoeff();
    lo = best_x - 2.0 * step;
    hi = best_x + 2.0 * step;
  }
  MESSAGE("grid " << best_x.transpose() << " GN " << r.estimate.transpose() << " cell " << cell);
  CHECK((r.estimate - best_x).cwiseAbs().maxCoeff() <= cell);

  // Laplace covariance against an explicit dense inverse.
  const Eigen::MatrixXd j = forward_and_jacobian(model, r.estimate, protocol).jacobian;
  const Eigen::MatrixXd gamma_e = noise.covariance;
  const Eigen::MatrixXd explicit_cov =
      (j.transpose() * gamma_e.inverse() * j + prior.covariance.inverse()).inverse();
  const PosteriorSummary post = posterior_full(model, prior, noise, protocol, r);
  CHECK((post.covariance - explicit_cov).norm() <= 1e-10 * explicit_cov.norm());
}

TEST_CASE("prior mean data is a fixed point of both solvers") {
  const Desk& d = desk();
  const Eigen::VectorXd v = forward_voltages(d.model, d.prior.mean, d.protocol);
  const NoiseModel noise = measurement_noise_model(v, NoiseSpec{});
  const MapResult r = map_full(d.model, d.prior, noise, d.protocol, v);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK((r.estimate - d.prior.mean).cwiseAbs().maxCoeff() <= 1e-8);

  const Ensemble ens = solve_ensemble(d.model, sample_prior(d.prior, 200, 5), d.protocol, {0, 1});
  std::vector<PodBasis> bases;
  for (int j = 0; j < 2; ++j) bases.push_back(potential_pod(ens.beta[j], Truncation::fraction(0.9999), j));
  const ReducedModel rom =
      precompute_reduced(d.model, conductivity_pod(d.prior, Truncation::fraction(0.99)), bases, d.protocol);
  const NoiseModel total = compose_total_error(noise, estimate_reduction_error(ens.sigma, ens.voltages, rom));
  const MapResult rr = map_reduced(rom, total, v);
  CHECK(rr.converged);
  // Coefficients in prior standard deviations.
  const double z = rr.estimate.cwiseQuotient(rom.sigma_basis().eigenvalues.cwiseSqrt()).cwiseAbs().maxCoeff();
  MESSAGE("largest normalised coefficient " << z);
  CHECK(z < 0.5);
}

TEST_CASE("reduced solver with full bases reproduces the full MAP estimate") {
  const Desk& d = desk();
  const Mesh2D fine = generate_disk_mesh(d.layout, 400);
  const SimulatedData data =
      simulate_measurements(fine, blob(fine, 3.0, -1.5, Point2(-1.5, 1.5), 1.0), ContactImpedances::uniform(4, 0.01),
                            d.protocol, NoiseSpec{}, 3, d.mesh.n_triangles());
  const NoiseModel noise = measurement_noise_model(data.measured, NoiseSpec{});
  GnConfig cfg;
  cfg.relative_cost_tolerance = 1e-13;
  const MapResult full = map_full(d.model, d.prior, noise, d.protocol, data.measured, cfg);

  std::vector<PodBasis> bases;
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(d.mesh.n_quadratic_nodes());
  for (int j = 0; j < 2; ++j) bases.push_back(identity_basis(u0, PodAmbient::potential, j));
  const ReducedModel rom =
      precompute_reduced(d.model, conductivity_pod(d.prior, Truncation::fraction(1.0)), bases, d.protocol);
  const MapResult red = map_reduced(rom, noise, data.measured, cfg);
  const double rel = (red.nodal - full.nodal).norm() / full.nodal.norm();
  MESSAGE("relative difference " << rel << " iterations " << full.iterations << " / " << red.iterations);
  CHECK(rel <= 1e-4);
  CHECK(full.converged);
  CHECK(red.converged);
  CHECK(full.cost_trace.back() < full.cost_trace.front());
  for (const MapResult* r : {&full, &red}) {
    for (std::size_t i = 1; i < r->cost_trace.size(); ++i) CHECK(r->cost_trace[i] < r->cost_trace[i - 1]);
  }

  const PosteriorSummary pf = posterior_full(d.model, d.prior, noise, d.protocol, full);
  const PosteriorSummary pr = posterior_reduced(rom, noise, red);
  CHECK((pf.pointwise_std.array() >= 0.0).all());
  CHECK((pf.pointwise_std.array() <= d.prior.covariance.diagonal().cwiseSqrt().array() + 1e-12).all());
  CHECK((pr.pointwise_std - pf.pointwise_std).cwiseAbs().maxCoeff() <= 1e-4 * pf.pointwise_std.maxCoeff());

  const CrossSection cs = cross_section(d.mesh, full.nodal, pf.pointwise_std, Point2(-5, 0), Point2(5, 0), 41,
                                        d.prior.mean);
  CHECK(cs.arc[40] == doctest::Approx(10.0));
  CHECK(cs.coverage() >= 0.0);
  CHECK((cs.upper() - cs.lower()).minCoeff() >= 0.0);
}

TEST_CASE("without data the posterior equals the prior") {
  const Desk& d = desk();
  const int n = d.prior.dimension();
  const Eigen::MatrixXd cov = laplace_covariance(Eigen::MatrixXd::Zero(8, n), Eigen::MatrixXd::Identity(8, 8),
                                                 d.prior.chol_prec);
  const Eigen::VectorXd std = cov.diagonal().cwiseSqrt();
  CHECK((std.array() - 0.5).abs().maxCoeff() <= 1e-4);
  CHECK((cov - d.prior.covariance).norm() <= 1e-8 * d.prior.covariance.norm());
}

TEST_CASE("full MAP estimate rotates with the data") {
  const Desk& d = desk();
  const Eigen::VectorXd truth = blob(d.mesh, 3.0, -1.2, Point2(-1.0, 2.0), 1.2);
  const Eigen::VectorXd v = forward_voltages(d.model, truth, d.protocol);
  const NoiseModel noise = NoiseModel::from_std(Eigen::VectorXd::Constant(v.size(), 1e-3 * v.cwiseAbs().maxCoeff()));
  // Rotating by one pitch sends pattern i to i+1 and the last to minus pattern 0.
  const int L = 4, R = 4, ninj = 2;
  Eigen::VectorXd vr(v.size());
  for (int i = 0; i < ninj; ++i) {
    const int target = (i + 1) % ninj;
    const double sign = i + 1 == ninj ? -1.0 : 1.0;
    for (int m = 0; m < R; ++m) vr[target * R + (m + 1) % L] = sign * v[i * R + m];
  }
  GnConfig cfg;
  cfg.relative_cost_tolerance = 1e-12;
  const MapResult a = map_full(d.model, d.prior, noise, d.protocol, v, cfg);
  const MapResult b = map_full(d.model, d.prior, noise, d.protocol, vr, cfg);
  const PointLocator locator(d.mesh);
  const double c = std::cos(d.layout.pitch()), s = std::sin(d.layout.pitch());
  double worst = 0.0;
  for (int k = 0; k < d.mesh.n_linear_nodes(); ++k) {
    const Point2 x = d.mesh.vertices()[k];
    const auto hit = locator.locate(Point2(c * x.x() - s * x.y(), s * x.x() + c * x.y()));
    int j;
    hit.barycentric.maxCoeff(&j);
    worst = std::max(worst, std::abs(a.estimate[k] - b.estimate[d.mesh.triangles()[hit.triangle][j]]));
  }
  MESSAGE("rotation mismatch " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("solver failure modes") {
  GnProblem p;
  p.forward = [](const Eigen::VectorXd&) -> Eigen::VectorXd {
    throw Error(ErrorKind::indefinite_reduced_system, "always");
  };
  p.linearize = [](const Eigen::VectorXd& x) {
    return Linearization{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * (1.0 + x[0])};
  };
  p.data = Eigen::VectorXd::Ones(1);
  p.noise_factor = Eigen::MatrixXd::Identity(1, 1);
  p.prior_factor = Eigen::MatrixXd::Identity(1, 1);
  p.prior_mean = Eigen::VectorXd::Zero(1);
  try {
    gauss_newton(p, Eigen::VectorXd::Zero(1), {});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::diverged);
  }
  p.forward = [](const Eigen::VectorXd&) -> Eigen::VectorXd { throw Error(ErrorKind::singular_system, "hard"); };
  CHECK_THROWS_AS(gauss_newton(p, Eigen::VectorXd::Zero(1), {}), Error);

  const Desk& d = desk();
  MapResult unconverged;
  unconverged.estimate = d.prior.mean;
  const NoiseModel noise = NoiseModel::from_std(Eigen::VectorXd::Ones(d.protocol.n_measurements()));
  try {
    posterior_full(d.model, d.prior, noise, d.protocol, unconverged);
    FAIL("expected not-converged");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_converged);
  }
  CHECK_THROWS_AS(map_full(d.model, d.prior, noise, d.protocol, Eigen::VectorXd::Ones(3)), Error);
  CHECK(nonincreasing({3.0, 2.0, 2.0}));
  CHECK_FALSE(nonincreasing({3.0, 3.5}));
}
