#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "podeit/cem.hpp"
#include "podeit/pod.hpp"

namespace podeit {

/// Forward solutions of a conductivity ensemble. `beta[j]` holds the inner
/// potentials (columns = samples) of injection `injections[j]`; `voltages` holds the
/// stacked measurements of every sample.
struct Ensemble {
  Eigen::MatrixXd sigma;
  std::vector<int> injections;
  std::vector<Eigen::MatrixXd> beta;
  Eigen::MatrixXd voltages;
};

/// One full-order forward solve per sample column. Only the potentials of the
/// listed injections are kept.
Ensemble solve_ensemble(const CemModel& model, const Eigen::MatrixXd& sigma_samples,
                        const StimulationProtocol& protocol, const std::vector<int>& keep_injections);

/// True when current pattern k equals pattern 0 shifted by k * (L / N_inj)
/// electrodes, i.e. the pattern set is generated by rotation.
bool protocol_is_rotational(const StimulationProtocol& protocol);

/// Reduced CEM. For injection i with W_i = [u0_i, V_u,i] and Phi = [sigma0, V_sigma]:
/// stiffness[i][k] = W_i^T B(Phi_k) W_i, contact[i] = W_i^T D W_i,
/// coupling[i] = W_i^T E. Mode index 0 is the mean in both spaces.
class ReducedModel {
 public:
  ReducedModel() = default;

  const PodBasis& sigma_basis() const { return sigma_basis_; }
  const std::vector<PodBasis>& potential_bases() const { return potential_bases_; }
  const StimulationProtocol& protocol() const { return protocol_; }
  const std::vector<std::vector<Eigen::MatrixXd>>& stiffness() const { return stiffness_; }
  const std::vector<Eigen::MatrixXd>& contact() const { return contact_; }
  const std::vector<Eigen::MatrixXd>& coupling() const { return coupling_; }
  const Eigen::VectorXd& electrode_conductance() const { return F_; }
  const Eigen::MatrixXd& basis() const { return C_; }

  int n_sigma_modes() const { return sigma_basis_.n_modes(); }
  int n_potential_modes() const { return potential_bases_.empty() ? 0 : potential_bases_[0].n_modes(); }
  int n_electrodes() const { return static_cast<int>(F_.size()); }
  int n_injections() const { return protocol_.n_injections(); }
  int n_measurements() const { return protocol_.n_measurements(); }

  std::uint64_t mesh_hash() const { return mesh_hash_; }
  std::uint64_t model_hash() const { return model_hash_; }
  std::uint64_t content_hash() const;

  /// sigma0 + V_sigma alpha.
  Eigen::VectorXd nodal_conductivity(const Eigen::VectorXd& alpha) const;

  /// Keeps the leading n_sigma conductivity and n_potential potential modes.
  ReducedModel truncated(int n_sigma, int n_potential) const;

  friend ReducedModel precompute_reduced(const CemModel&, const PodBasis&, const std::vector<PodBasis>&,
                                         const StimulationProtocol&);
  friend struct ReducedModelAccess;

 private:
  PodBasis sigma_basis_;
  std::vector<PodBasis> potential_bases_;
  StimulationProtocol protocol_;
  std::vector<std::vector<Eigen::MatrixXd>> stiffness_;
  std::vector<Eigen::MatrixXd> contact_;
  std::vector<Eigen::MatrixXd> coupling_;
  Eigen::VectorXd F_;
  Eigen::MatrixXd C_;
  std::uint64_t mesh_hash_ = 0;
  std::uint64_t model_hash_ = 0;
};

/// Offline stage. `potential_bases` holds one basis per current pattern.
ReducedModel precompute_reduced(const CemModel& model, const PodBasis& sigma_basis,
                                const std::vector<PodBasis>& potential_bases,
                                const StimulationProtocol& protocol);

struct ReducedSolution {
  std::vector<Eigen::VectorXd> beta_pod;
  std::vector<Eigen::VectorXd> gamma;
};

/// Solves the dense reduced system of every injection. Throws
/// indefinite_reduced_system when alpha makes a nodal conductivity nonpositive or
/// the reduced matrix loses definiteness.
ReducedSolution reduced_solve(const ReducedModel& model, const Eigen::VectorXd& alpha);

Eigen::VectorXd reduced_forward(const ReducedModel& model, const Eigen::VectorXd& alpha);

struct ReducedForwardWithJacobian {
  Eigen::VectorXd voltages;
  Eigen::MatrixXd jacobian;  // measurements x n_sigma_modes
};

/// Voltages and dV/dalpha by adjoint solves on each small dense system.
ReducedForwardWithJacobian reduced_forward_and_jacobian(const ReducedModel& model, const Eigen::VectorXd& alpha);

Eigen::MatrixXd reduced_jacobian(const ReducedModel& model, const Eigen::VectorXd& alpha);

}  // namespace podeit
