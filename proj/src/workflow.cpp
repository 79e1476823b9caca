#include "podeit/workflow.hpp"

#include <chrono>

#include "podeit/error.hpp"

namespace podeit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

OfflineProducts build_offline(const CemModel& model, const GaussianPrior& prior, const StimulationProtocol& protocol,
                              const OfflineConfig& config) {
  if (config.samples < 2) throw Error(ErrorKind::ensemble_too_small, "offline stage needs at least two samples");
  OfflineProducts out;
  const int ninj = protocol.n_injections();
  out.rotated = config.rotate && protocol_is_rotational(protocol) && model.mesh().layout().has_value() &&
                model.mesh().layout()->count == protocol.n_electrodes();

  auto t0 = Clock::now();
  out.sigma_samples = sample_prior(prior, config.samples, config.seed);
  std::vector<int> keep;
  for (int i = 0; i < (out.rotated ? 1 : ninj); ++i) keep.push_back(i);
  Ensemble ens = solve_ensemble(model, out.sigma_samples, protocol, keep);
  out.ensemble_voltages = std::move(ens.voltages);
  out.ensemble_seconds = seconds_since(t0);

  t0 = Clock::now();
  const PodBasis sigma_basis = conductivity_pod(prior, config.sigma);
  std::vector<PodBasis> bases;
  bases.push_back(potential_pod(ens.beta[0], config.potential, 0));
  const Truncation same = Truncation::modes(bases[0].n_modes());
  for (int i = 1; i < ninj; ++i) {
    bases.push_back(out.rotated ? rotate_potential_basis(bases[0], model.mesh(), i)
                                : potential_pod(ens.beta[i], same, i));
  }
  out.pod_seconds = seconds_since(t0);

  t0 = Clock::now();
  out.model = precompute_reduced(model, sigma_basis, bases, protocol);
  out.assembly_seconds = seconds_since(t0);

  t0 = Clock::now();
  out.reduction_error = estimate_reduction_error(out.sigma_samples, out.ensemble_voltages, out.model);
  out.error_seconds = seconds_since(t0);
  return out;
}

TruncatedModel retruncate(const ReducedModel& model, const Eigen::MatrixXd& sigma_samples,
                          const Eigen::MatrixXd& ensemble_voltages, int n_sigma, int n_potential) {
  TruncatedModel t;
  t.model = model.truncated(n_sigma, n_potential);
  t.reduction_error = estimate_reduction_error(sigma_samples, ensemble_voltages, t.model);
  return t;
}

}  // namespace podeit
