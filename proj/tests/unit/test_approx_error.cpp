#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "podeit/approx_error.hpp"
#include "podeit/error.hpp"

using namespace podeit;

namespace {

struct Setup {
  Mesh2D mesh = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 100);
  StimulationProtocol protocol = StimulationProtocol::opposite_adjacent(4);
  CemModel model{mesh, ContactImpedances::uniform(4, 0.01)};
  GaussianPrior prior = build_prior(mesh, {0.25, 2.0, 1e-4}, 3.0);
  Eigen::MatrixXd samples = sample_prior(prior, 400, 21);
  Ensemble ensemble = solve_ensemble(model, samples, protocol, {0, 1});
};

const Setup& setup() {
  static const Setup s;
  return s;
}

ReducedModel rom_with(int n_sigma, int n_pot) {
  const Setup& s = setup();
  std::vector<PodBasis> bases;
  for (int j = 0; j < 2; ++j) bases.push_back(potential_pod(s.ensemble.beta[j], Truncation::modes(n_pot), j));
  return precompute_reduced(s.model, conductivity_pod(s.prior, Truncation::modes(n_sigma)), bases, s.protocol);
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("exact subspace gives machine-zero reduction error") {
  const Setup& s = setup();
  std::vector<PodBasis> bases;
  for (int j = 0; j < 2; ++j) {
    bases.push_back(identity_basis(s.ensemble.beta[j].rowwise().mean(), PodAmbient::potential, j));
  }
  const ReducedModel rom =
      precompute_reduced(s.model, conductivity_pod(s.prior, Truncation::fraction(1.0)), bases, s.protocol);
  const NoiseModel e = estimate_reduction_error(s.samples.leftCols(50), s.ensemble.voltages.leftCols(50), rom);
  CHECK(e.mean.norm() <= 1e-10 * s.ensemble.voltages.col(0).norm());
  CHECK(e.covariance.norm() <= 1e-14);
}

TEST_CASE("reduction error covariance is PSD and the estimate is deterministic") {
  const Setup& s = setup();
  const ReducedModel rom = rom_with(10, 8);
  const NoiseModel a = estimate_reduction_error(s.samples, s.ensemble.voltages, rom);
  const NoiseModel b = estimate_reduction_error(s.samples, s.ensemble.voltages, rom);
  CHECK((a.covariance - b.covariance).norm() == 0.0);
  CHECK(min_eigenvalue(a.covariance) >= -1e-12 * a.covariance.norm());
  REQUIRE(a.chol_prec.has_value());
  // Recomputing the full solves gives the same statistics as reusing them.
  const NoiseModel c = estimate_reduction_error(s.samples.leftCols(40), s.model, rom);
  const NoiseModel d = estimate_reduction_error(s.samples.leftCols(40), s.ensemble.voltages.leftCols(40), rom);
  CHECK((c.mean - d.mean).norm() <= 1e-12 * d.mean.norm());
}

TEST_CASE("half-ensemble mean agrees within two Monte-Carlo standard errors") {
  const Setup& s = setup();
  const ReducedModel rom = rom_with(10, 8);
  const NoiseModel full = estimate_reduction_error(s.samples, s.ensemble.voltages, rom);
  const NoiseModel half = estimate_reduction_error(s.samples.leftCols(200), s.ensemble.voltages.leftCols(200), rom);
  int within = 0;
  for (int i = 0; i < full.dimension(); ++i) {
    const double se = std::sqrt(half.covariance(i, i) / 200.0);
    if (std::abs(full.mean[i] - half.mean[i]) <= 2.0 * se) ++within;
  }
  MESSAGE(within << " of " << full.dimension() << " components within 2 standard errors");
  CHECK(within >= 0.95 * full.dimension());
}

TEST_CASE("richer bases do not increase the reduction error") {
  const Setup& s = setup();
  double previous = INFINITY;
  for (const auto& [ns, np] : {std::pair{4, 4}, std::pair{10, 8}, std::pair{20, 16}, std::pair{40, 32}}) {
    const double t = estimate_reduction_error(s.samples, s.ensemble.voltages, rom_with(ns, np)).covariance.trace();
    MESSAGE("N_hat " << ns << " M_hat " << np << " trace " << t);
    CHECK(t <= previous);
    previous = t;
  }
}

TEST_CASE("composition adds means and covariances") {
  const Setup& s = setup();
  const Eigen::VectorXd v0 = forward_voltages(s.model, s.prior.mean, s.protocol);
  const NoiseModel meas = measurement_noise_model(v0, NoiseSpec{});
  const Eigen::MatrixXd li = meas.precision_factor().transpose() * meas.precision_factor() * meas.covariance;
  CHECK((li - Eigen::MatrixXd::Identity(li.rows(), li.cols())).cwiseAbs().maxCoeff() < 1e-6);

  const NoiseModel zero = NoiseModel::from_moments(Eigen::VectorXd::Zero(meas.dimension()),
                                                   Eigen::MatrixXd::Zero(meas.dimension(), meas.dimension()));
  CHECK_FALSE(zero.chol_prec.has_value());
  CHECK_THROWS_AS(zero.precision_factor(), Error);
  const NoiseModel same = compose_total_error(meas, zero);
  CHECK((same.mean - meas.mean).norm() == 0.0);
  CHECK((same.covariance - meas.covariance).norm() == 0.0);
  CHECK((*same.chol_prec - *meas.chol_prec).norm() == 0.0);

  const NoiseModel d1 = NoiseModel::from_std(Eigen::VectorXd::LinSpaced(5, 1.0, 2.0));
  const NoiseModel d2 = NoiseModel::from_std(Eigen::VectorXd::LinSpaced(5, 0.5, 0.1));
  const NoiseModel sum = compose_total_error(d1, d2);
  const Eigen::MatrixXd diag = sum.covariance.diagonal().asDiagonal();
  CHECK((sum.covariance - diag).norm() == 0.0);
  CHECK((sum.covariance.diagonal() - (d1.covariance.diagonal() + d2.covariance.diagonal())).norm() == 0.0);
  CHECK_THROWS_AS(compose_total_error(d1, meas), Error);
}

TEST_CASE("total error dominates the measurement error in the Loewner order") {
  const Setup& s = setup();
  const Eigen::VectorXd v0 = forward_voltages(s.model, s.prior.mean, s.protocol);
  const NoiseModel meas = measurement_noise_model(v0, NoiseSpec{});
  const NoiseModel red = estimate_reduction_error(s.samples, s.ensemble.voltages, rom_with(10, 8));
  const NoiseModel total = compose_total_error(meas, red);
  const Eigen::MatrixXd diff = total.covariance - meas.covariance;
  CHECK(min_eigenvalue(diff) >= -1e-12 * diff.norm());
  CHECK(diff.trace() > 0.0);
  const NoiseSummary sum = summarize(total);
  CHECK(sum.min_eigenvalue > 0.0);
  CHECK(sum.trace == doctest::Approx(total.covariance.trace()));
}

TEST_CASE("reduction error input validation") {
  const Setup& s = setup();
  const ReducedModel rom = rom_with(5, 5);
  try {
    estimate_reduction_error(s.samples.leftCols(1), s.ensemble.voltages.leftCols(1), rom);
    FAIL("expected ensemble-too-small");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ensemble_too_small);
  }
  CHECK_THROWS_AS(estimate_reduction_error(s.samples, s.ensemble.voltages.leftCols(3), rom), Error);
  const Mesh2D other = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 140);
  const CemModel other_model(other, ContactImpedances::uniform(4, 0.01));
  try {
    estimate_reduction_error(sample_prior(build_prior(other, {0.25, 2.0, 1e-4}, 3.0), 3, 1), other_model, rom);
    FAIL("expected model-mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::model_mismatch);
  }
}
