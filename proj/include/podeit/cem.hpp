#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "podeit/mesh.hpp"

namespace podeit {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Contact impedances z_l (Ohm cm^2), one per electrode.
struct ContactImpedances {
  Eigen::VectorXd values;

  static ContactImpedances uniform(int electrodes, double z) {
    return {Eigen::VectorXd::Constant(electrodes, z)};
  }
};

/// Injected currents (L x N_inj, columns are patterns) and the measurement
/// pattern (rows x L) shared by all injections.
struct StimulationProtocol {
  Eigen::MatrixXd currents;
  Eigen::MatrixXd measurement;

  int n_electrodes() const { return static_cast<int>(currents.rows()); }
  int n_injections() const { return static_cast<int>(currents.cols()); }
  int n_measurements_per_injection() const { return static_cast<int>(measurement.rows()); }
  int n_measurements() const { return n_injections() * n_measurements_per_injection(); }

  /// Throws invalid_protocol unless every pattern and every measurement row sums to zero.
  void validate() const;
  std::uint64_t content_hash() const;

  /// Opposite injection (electrode i to i + L/2, i < L/2) with adjacent-difference
  /// measurements U_m - U_{m+1} over all L pairs, wrapping around.
  static StimulationProtocol opposite_adjacent(int electrodes, double amplitude = 1.0);
};

/// Finite element solution for one current pattern: inner potential (P2
/// coefficients) and electrode potential coordinates in the basis n_k = e_1 - e_{k+1}.
struct ForwardSolution {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;

  Eigen::VectorXd electrode_potentials() const;
};

/// The CEM system A = [B + D, E C; C^T E^T, C^T F C] with its blocks.
struct SystemMatrices {
  SparseMatrix A;
  SparseMatrix B;
  SparseMatrix D;
  SparseMatrix E;           // M x L
  Eigen::VectorXd F;        // diagonal |e_l| / z_l
  Eigen::MatrixXd C;        // L x (L-1)

  int n_potential() const { return static_cast<int>(B.rows()); }
  int n_electrodes() const { return static_cast<int>(F.size()); }
};

/// Basis n_1 = [1,-1,0,...], ..., n_{L-1} = [1,0,...,-1] as columns.
Eigen::MatrixXd electrode_basis(int electrodes);

/// Per-triangle integrals of phi_a grad(psi_i) . grad(psi_j) for the three P1
/// conductivity functions a and six P2 potential functions i, j.
struct ElementStiffness {
  std::array<Eigen::Matrix<double, 6, 6>, 3> by_vertex;
};

/// Precomputed full-order CEM model on a mesh. Immutable after construction and
/// safe to share across threads.
///
/// Nodal conductivities below `conductivity_floor` are clipped to it inside
/// assembly (the caller's vector is untouched). With the default floor of zero any
/// nonpositive value is rejected.
class CemModel {
 public:
  CemModel(const Mesh2D& mesh, ContactImpedances z, double conductivity_floor = 0.0);

  const Mesh2D& mesh() const { return *mesh_; }
  const ContactImpedances& impedances() const { return z_; }
  double conductivity_floor() const { return floor_; }
  int n_conductivity() const { return mesh_->n_linear_nodes(); }
  int n_potential() const { return mesh_->n_quadratic_nodes(); }
  int n_electrodes() const { return mesh_->n_electrodes(); }
  int n_dofs() const { return n_potential() + n_electrodes() - 1; }

  const std::vector<ElementStiffness>& element_stiffness() const { return stiffness_; }
  const SparseMatrix& contact_matrix() const { return D_; }
  const SparseMatrix& electrode_coupling() const { return E_; }
  const Eigen::VectorXd& electrode_conductance() const { return F_; }
  const Eigen::MatrixXd& basis() const { return C_; }

  /// Conductivity after clipping. Throws nonpositive_conductivity when a value
  /// is still not strictly positive.
  Eigen::VectorXd effective_conductivity(const Eigen::VectorXd& sigma) const;

  /// B(alpha) for an arbitrary (possibly signed) coefficient vector. Linear in alpha.
  SparseMatrix stiffness(const Eigen::VectorXd& alpha) const;

  SystemMatrices assemble(const Eigen::VectorXd& sigma) const;

  std::uint64_t content_hash() const;

 private:
  const Mesh2D* mesh_;
  ContactImpedances z_;
  double floor_;
  std::vector<ElementStiffness> stiffness_;
  SparseMatrix D_;
  SparseMatrix E_;
  Eigen::VectorXd F_;
  Eigen::MatrixXd C_;
  SparseMatrix pattern_;                    // A with explicit zeros on the B pattern
  std::vector<std::array<int, 36>> slots_;  // value index in pattern_ per (element, i, j)
  Eigen::VectorXd constant_values_;         // D, EC, C^T F C contributions
};

/// Factorization of one assembled system, reused across right-hand sides.
class CemSolver {
 public:
  explicit CemSolver(const SystemMatrices& sys);

  std::vector<ForwardSolution> solve(const StimulationProtocol& protocol) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  int n_potential() const { return n_potential_; }
  int n_electrodes() const { return n_electrodes_; }

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
  Eigen::MatrixXd C_;
  int n_potential_;
  int n_electrodes_;
};

SystemMatrices assemble_system(const Mesh2D& mesh, const Eigen::VectorXd& sigma,
                               const ContactImpedances& z);

/// Solves A theta = f for every current pattern with one factorization. The
/// relative residual of every solution is checked against 1e-10.
std::vector<ForwardSolution> solve_forward(const SystemMatrices& sys,
                                           const StimulationProtocol& protocol);

/// Stacked measurements V = [M C gamma^(1); ...; M C gamma^(N_inj)].
Eigen::VectorXd compute_voltages(const std::vector<ForwardSolution>& solutions,
                                 const StimulationProtocol& protocol);

/// Forward map sigma -> stacked voltages.
Eigen::VectorXd forward_voltages(const CemModel& model, const Eigen::VectorXd& sigma,
                                 const StimulationProtocol& protocol);

struct ForwardWithJacobian {
  Eigen::VectorXd voltages;
  Eigen::MatrixXd jacobian;  // measurements x n_conductivity
};

/// Voltages and dV/dsigma by the adjoint method: L-1 extra solves against the
/// forward factorization, then element-local contractions. Clipped nodes get
/// zero sensitivity.
ForwardWithJacobian forward_and_jacobian(const CemModel& model, const Eigen::VectorXd& sigma,
                                         const StimulationProtocol& protocol);

Eigen::MatrixXd jacobian(const Mesh2D& mesh, const Eigen::VectorXd& sigma,
                         const ContactImpedances& z, const StimulationProtocol& protocol);

/// Transfer resistances R(a, b) = U_b - U_L for the unit current e_a - e_L,
/// a, b < L. Symmetric by reciprocity.
Eigen::MatrixXd transfer_resistance(const SystemMatrices& sys);

/// Two independent zero-mean Gaussian components: std relative * |V_i| and
/// std range_fraction * (max V - min V).
struct NoiseSpec {
  double relative = 0.01;
  double range_fraction = 0.001;

  Eigen::VectorXd standard_deviation(const Eigen::VectorXd& noiseless) const;
};

Eigen::VectorXd draw_measurement_noise(const Eigen::VectorXd& noiseless, const NoiseSpec& spec,
                                       std::mt19937_64& rng);

struct SimulatedData {
  Eigen::VectorXd noiseless;
  Eigen::VectorXd noise;
  Eigen::VectorXd measured;
  Eigen::VectorXd noise_std;
  bool inverse_crime_warning = false;
};

/// Synthetic data on a (fine) data mesh. `reconstruction_elements` is the element
/// count of the mesh used for inversion; a data mesh that is not strictly finer
/// sets `inverse_crime_warning`.
SimulatedData simulate_measurements(const Mesh2D& fine_mesh, const Eigen::VectorXd& sigma_true,
                                    const ContactImpedances& z,
                                    const StimulationProtocol& protocol, const NoiseSpec& noise,
                                    std::uint64_t seed, int reconstruction_elements = 0);

}  // namespace podeit
