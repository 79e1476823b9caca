#include "podeit/cem.hpp"

#include <algorithm>
#include <cmath>

#include "podeit/error.hpp"
#include "podeit/hash.hpp"
#include "podeit/quadrature.hpp"

namespace podeit {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

ElementStiffness compute_element_stiffness(const Mesh2D& mesh, int t) {
  const auto& tri = mesh.triangles()[t];
  const Point2& p0 = mesh.vertices()[tri[0]];
  const Point2& p1 = mesh.vertices()[tri[1]];
  const Point2& p2 = mesh.vertices()[tri[2]];
  const double twice_area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
  const double area = 0.5 * twice_area;
  std::array<Eigen::Vector2d, 3> grad{
      Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / twice_area,
      Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / twice_area,
      Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / twice_area};

  ElementStiffness k;
  for (auto& m : k.by_vertex) m.setZero();
  for (const auto& q : triangle_rule_degree5()) {
    const Eigen::Vector3d& l = q.barycentric;
    Eigen::Matrix<double, 2, 6> g;
    for (int a = 0; a < 3; ++a) g.col(a) = (4.0 * l[a] - 1.0) * grad[a];
    g.col(3) = 4.0 * (l[0] * grad[1] + l[1] * grad[0]);
    g.col(4) = 4.0 * (l[1] * grad[2] + l[2] * grad[1]);
    g.col(5) = 4.0 * (l[2] * grad[0] + l[0] * grad[2]);
    const Mat6 gg = g.transpose() * g;
    for (int a = 0; a < 3; ++a) k.by_vertex[a] += (q.weight * area * l[a]) * gg;
  }
  return k;
}

// Local P2 nodes of an edge in order (u, v, midpoint) with their quadrature integrals.
struct EdgeIntegrals {
  Eigen::Matrix3d mass;   // int psi_i psi_j dt over [0, 1]
  Eigen::Vector3d load;   // int psi_i dt
};

EdgeIntegrals edge_integrals() {
  EdgeIntegrals out;
  out.mass.setZero();
  out.load.setZero();
  for (const auto& q : gauss_legendre_4()) {
    const double t = q.point;
    const double lu = 1.0 - t, lv = t;
    const Eigen::Vector3d psi(lu * (2.0 * lu - 1.0), lv * (2.0 * lv - 1.0), 4.0 * lu * lv);
    out.mass += q.weight * psi * psi.transpose();
    out.load += q.weight * psi;
  }
  return out;
}

int value_slot(const SparseMatrix& m, int row, int col) {
  const int* inner = m.innerIndexPtr();
  const int begin = m.outerIndexPtr()[col];
  const int end = m.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(inner + begin, inner + end, row);
  if (it == inner + end || *it != row) throw Error(ErrorKind::singular_system, "sparsity pattern miss");
  return static_cast<int>(it - inner);
}

}  // namespace

void StimulationProtocol::validate() const {
  if (currents.rows() < 2 || currents.cols() < 1) {
    throw Error(ErrorKind::invalid_protocol, "need at least one pattern over two electrodes");
  }
  if (measurement.cols() != currents.rows() || measurement.rows() < 1) {
    throw Error(ErrorKind::invalid_protocol, "measurement pattern must have one column per electrode");
  }
  for (Eigen::Index i = 0; i < currents.cols(); ++i) {
    const double scale = std::max(1.0, currents.col(i).cwiseAbs().maxCoeff());
    if (std::abs(currents.col(i).sum()) > 1e-12 * scale) {
      throw Error(ErrorKind::invalid_protocol,
                  "current pattern " + std::to_string(i) + " violates charge conservation");
    }
  }
  for (Eigen::Index r = 0; r < measurement.rows(); ++r) {
    const double scale = std::max(1.0, measurement.row(r).cwiseAbs().maxCoeff());
    if (std::abs(measurement.row(r).sum()) > 1e-12 * scale) {
      throw Error(ErrorKind::invalid_protocol,
                  "measurement row " + std::to_string(r) + " does not sum to zero");
    }
  }
}

std::uint64_t StimulationProtocol::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.protocol.v1"));
  h.add_matrix(currents);
  h.add_matrix(measurement);
  return h.value();
}

StimulationProtocol StimulationProtocol::opposite_adjacent(int electrodes, double amplitude) {
  if (electrodes < 2 || electrodes % 2 != 0) {
    throw Error(ErrorKind::invalid_protocol, "opposite injection needs an even electrode count");
  }
  const int half = electrodes / 2;
  StimulationProtocol p;
  p.currents = Eigen::MatrixXd::Zero(electrodes, half);
  for (int i = 0; i < half; ++i) {
    p.currents(i, i) = amplitude;
    p.currents(i + half, i) = -amplitude;
  }
  p.measurement = Eigen::MatrixXd::Zero(electrodes, electrodes);
  for (int m = 0; m < electrodes; ++m) {
    p.measurement(m, m) = 1.0;
    p.measurement(m, (m + 1) % electrodes) = -1.0;
  }
  return p;
}

Eigen::VectorXd ForwardSolution::electrode_potentials() const {
  return electrode_basis(static_cast<int>(gamma.size()) + 1) * gamma;
}

Eigen::MatrixXd electrode_basis(int electrodes) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(electrodes, electrodes - 1);
  c.row(0).setOnes();
  for (int k = 0; k < electrodes - 1; ++k) c(k + 1, k) = -1.0;
  return c;
}

CemModel::CemModel(const Mesh2D& mesh, ContactImpedances z, double conductivity_floor)
    : mesh_(&mesh), z_(std::move(z)), floor_(conductivity_floor) {
  const int L = mesh.n_electrodes();
  const int M = mesh.n_quadratic_nodes();
  if (L < 2) throw Error(ErrorKind::invalid_argument, "mesh needs at least two electrodes");
  if (z_.values.size() != L) {
    throw Error(ErrorKind::dimension_mismatch, "contact impedance count differs from electrode count");
  }
  if (!(z_.values.array() > 0.0).all()) {
    throw Error(ErrorKind::nonpositive_impedance, "contact impedances must be strictly positive");
  }

  stiffness_.reserve(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) stiffness_.push_back(compute_element_stiffness(mesh, t));

  // Electrode integrals, arc-length weighted so that int_e 1 dS = |e_l| exactly.
  const EdgeIntegrals ei = edge_integrals();
  const int nv = mesh.n_linear_nodes();
  std::vector<Eigen::Triplet<double>> d_trip, e_trip;
  F_ = Eigen::VectorXd::Zero(L);
  for (int l = 0; l < L; ++l) {
    const double inv_z = 1.0 / z_.values[l];
    for (const auto& ee : mesh.electrodes()[l]) {
      const auto& edge = mesh.edges()[ee.edge];
      const std::array<int, 3> nodes{edge[0], edge[1], nv + ee.edge};
      for (int i = 0; i < 3; ++i) {
        e_trip.emplace_back(nodes[i], l, -inv_z * ee.measure * ei.load[i]);
        for (int j = 0; j < 3; ++j) {
          d_trip.emplace_back(nodes[i], nodes[j], inv_z * ee.measure * ei.mass(i, j));
        }
      }
      F_[l] += inv_z * ee.measure;
    }
  }
  D_.resize(M, M);
  D_.setFromTriplets(d_trip.begin(), d_trip.end());
  E_.resize(M, L);
  E_.setFromTriplets(e_trip.begin(), e_trip.end());
  C_ = electrode_basis(L);

  // Pattern of A: B connectivity, D, E C and the dense C^T F C block.
  const int n = M + L - 1;
  std::vector<Eigen::Triplet<double>> pattern;
  pattern.reserve(36 * mesh.n_triangles() + d_trip.size() + 2 * e_trip.size() * (L - 1) + (L - 1) * (L - 1));
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto nodes = mesh.quadratic_element(t);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) pattern.emplace_back(nodes[i], nodes[j], 0.0);
  }
  for (const auto& tr : d_trip) pattern.emplace_back(tr.row(), tr.col(), tr.value());
  const SparseMatrix C_sparse = C_.sparseView();
  const SparseMatrix EC = E_ * C_sparse;
  for (int k = 0; k < EC.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(EC, k); it; ++it) {
      pattern.emplace_back(it.row(), M + it.col(), 0.0);
      pattern.emplace_back(M + it.col(), it.row(), 0.0);
    }
  }
  for (int a = 0; a < L - 1; ++a)
    for (int b = 0; b < L - 1; ++b) pattern.emplace_back(M + a, M + b, 0.0);
  pattern_.resize(n, n);
  pattern_.setFromTriplets(pattern.begin(), pattern.end());
  pattern_.makeCompressed();

  constant_values_ = Eigen::VectorXd::Zero(pattern_.nonZeros());
  for (const auto& tr : d_trip) constant_values_[value_slot(pattern_, tr.row(), tr.col())] += tr.value();
  for (int k = 0; k < EC.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(EC, k); it; ++it) {
      constant_values_[value_slot(pattern_, it.row(), M + it.col())] += it.value();
      constant_values_[value_slot(pattern_, M + it.col(), it.row())] += it.value();
    }
  }
  for (int a = 0; a < L - 1; ++a) {
    for (int b = 0; b < L - 1; ++b) {
      const double v = F_[0] + (a == b ? F_[a + 1] : 0.0);
      constant_values_[value_slot(pattern_, M + a, M + b)] += v;
    }
  }

  slots_.resize(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto nodes = mesh.quadratic_element(t);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) slots_[t][i * 6 + j] = value_slot(pattern_, nodes[i], nodes[j]);
  }
}

Eigen::VectorXd CemModel::effective_conductivity(const Eigen::VectorXd& sigma) const {
  if (sigma.size() != n_conductivity()) {
    throw Error(ErrorKind::dimension_mismatch, "conductivity length " + std::to_string(sigma.size()) +
                                                   " differs from " + std::to_string(n_conductivity()));
  }
  Eigen::VectorXd eff = sigma.cwiseMax(floor_);
  if (!(eff.array() > 0.0).all()) {
    throw Error(ErrorKind::nonpositive_conductivity, "conductivity must be strictly positive");
  }
  return eff;
}

SparseMatrix CemModel::stiffness(const Eigen::VectorXd& alpha) const {
  if (alpha.size() != n_conductivity()) {
    throw Error(ErrorKind::dimension_mismatch, "coefficient length differs from vertex count");
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(36 * stiffness_.size());
  for (int t = 0; t < mesh_->n_triangles(); ++t) {
    const auto& tri = mesh_->triangles()[t];
    const auto nodes = mesh_->quadratic_element(t);
    const Mat6 k = alpha[tri[0]] * stiffness_[t].by_vertex[0] + alpha[tri[1]] * stiffness_[t].by_vertex[1] +
                   alpha[tri[2]] * stiffness_[t].by_vertex[2];
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(nodes[i], nodes[j], k(i, j));
  }
  SparseMatrix b(n_potential(), n_potential());
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

SystemMatrices CemModel::assemble(const Eigen::VectorXd& sigma) const {
  const Eigen::VectorXd eff = effective_conductivity(sigma);
  SystemMatrices sys;
  sys.A = pattern_;
  double* values = sys.A.valuePtr();
  Eigen::Map<Eigen::VectorXd>(values, sys.A.nonZeros()) = constant_values_;
  for (int t = 0; t < mesh_->n_triangles(); ++t) {
    const auto& tri = mesh_->triangles()[t];
    const Mat6 k = eff[tri[0]] * stiffness_[t].by_vertex[0] + eff[tri[1]] * stiffness_[t].by_vertex[1] +
                   eff[tri[2]] * stiffness_[t].by_vertex[2];
    const auto& slot = slots_[t];
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) values[slot[i * 6 + j]] += k(i, j);
  }
  sys.B = stiffness(eff);
  sys.D = D_;
  sys.E = E_;
  sys.F = F_;
  sys.C = C_;
  return sys;
}

std::uint64_t CemModel::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.cem.v1"));
  h.add(mesh_->content_hash());
  h.add_matrix(z_.values);
  h.add(floor_);
  return h.value();
}

CemSolver::CemSolver(const SystemMatrices& sys)
    : C_(sys.C), n_potential_(sys.n_potential()), n_electrodes_(sys.n_electrodes()) {
  ldlt_.compute(sys.A);
  if (ldlt_.info() != Eigen::Success) {
    throw Error(ErrorKind::singular_system, "sparse factorization of the CEM system failed");
  }
  if ((ldlt_.vectorD().array() <= 0.0).any()) {
    throw Error(ErrorKind::singular_system, "CEM system is not positive definite");
  }
}

Eigen::MatrixXd CemSolver::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd x = ldlt_.solve(rhs);
  if (ldlt_.info() != Eigen::Success) throw Error(ErrorKind::singular_system, "solve failed");
  return x;
}

std::vector<ForwardSolution> CemSolver::solve(const StimulationProtocol& protocol) const {
  if (protocol.n_electrodes() != n_electrodes_) {
    throw Error(ErrorKind::dimension_mismatch, "protocol electrode count differs from the mesh");
  }
  const int M = n_potential_;
  const int L = n_electrodes_;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(M + L - 1, protocol.n_injections());
  rhs.bottomRows(L - 1) = C_.transpose() * protocol.currents;
  const Eigen::MatrixXd theta = solve(rhs);
  std::vector<ForwardSolution> out;
  out.reserve(protocol.n_injections());
  for (int i = 0; i < protocol.n_injections(); ++i) {
    out.push_back({theta.col(i).head(M), theta.col(i).tail(L - 1)});
  }
  return out;
}

SystemMatrices assemble_system(const Mesh2D& mesh, const Eigen::VectorXd& sigma,
                               const ContactImpedances& z) {
  return CemModel(mesh, z).assemble(sigma);
}

std::vector<ForwardSolution> solve_forward(const SystemMatrices& sys,
                                           const StimulationProtocol& protocol) {
  protocol.validate();
  const CemSolver solver(sys);
  auto solutions = solver.solve(protocol);
  const int M = sys.n_potential();
  const int L = sys.n_electrodes();
  for (int i = 0; i < protocol.n_injections(); ++i) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(M + L - 1);
    f.tail(L - 1) = sys.C.transpose() * protocol.currents.col(i);
    const double fnorm = f.norm();
    if (fnorm == 0.0) continue;
    Eigen::VectorXd theta(M + L - 1);
    theta << solutions[i].beta, solutions[i].gamma;
    const double residual = (sys.A * theta - f).norm() / fnorm;
    if (!(residual <= 1e-10)) {
      throw Error(ErrorKind::singular_system,
                  "relative residual " + std::to_string(residual) + " exceeds 1e-10");
    }
  }
  return solutions;
}

Eigen::VectorXd compute_voltages(const std::vector<ForwardSolution>& solutions,
                                 const StimulationProtocol& protocol) {
  if (static_cast<int>(solutions.size()) != protocol.n_injections()) {
    throw Error(ErrorKind::dimension_mismatch, "one solution per current pattern is required");
  }
  const int R = protocol.n_measurements_per_injection();
  const Eigen::MatrixXd P = protocol.measurement * electrode_basis(protocol.n_electrodes());
  Eigen::VectorXd v(protocol.n_measurements());
  for (int i = 0; i < protocol.n_injections(); ++i) {
    if (solutions[i].gamma.size() != P.cols()) {
      throw Error(ErrorKind::dimension_mismatch, "solution electrode count differs from protocol");
    }
    v.segment(i * R, R) = P * solutions[i].gamma;
  }
  return v;
}

Eigen::VectorXd forward_voltages(const CemModel& model, const Eigen::VectorXd& sigma,
                                 const StimulationProtocol& protocol) {
  const CemSolver solver(model.assemble(sigma));
  return compute_voltages(solver.solve(protocol), protocol);
}

ForwardWithJacobian forward_and_jacobian(const CemModel& model, const Eigen::VectorXd& sigma,
                                         const StimulationProtocol& protocol) {
  const CemSolver solver(model.assemble(sigma));
  const int M = model.n_potential();
  const int L = model.n_electrodes();
  const int R = protocol.n_measurements_per_injection();
  const int n_inj = protocol.n_injections();

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(M + L - 1, n_inj + L - 1);
  rhs.topLeftCorner(M + L - 1, n_inj).bottomRows(L - 1) = model.basis().transpose() * protocol.currents;
  rhs.bottomRightCorner(L - 1, L - 1).setIdentity();
  const Eigen::MatrixXd sol = solver.solve(rhs);
  const auto theta = sol.leftCols(n_inj);
  const Eigen::MatrixXd P = protocol.measurement * model.basis();  // R x (L-1)

  ForwardWithJacobian out;
  out.voltages.resize(protocol.n_measurements());
  for (int i = 0; i < n_inj; ++i) out.voltages.segment(i * R, R) = P * theta.col(i).tail(L - 1);

  // Adjoint fields: column r solves A w = [0; P(r,:)^T].
  const Eigen::MatrixXd adjoint = sol.rightCols(L - 1).topRows(M) * P.transpose();  // M x R

  const Mesh2D& mesh = model.mesh();
  const double floor = model.conductivity_floor();
  out.jacobian = Eigen::MatrixXd::Zero(protocol.n_measurements(), model.n_conductivity());
  Eigen::Matrix<double, 6, Eigen::Dynamic> theta_e(6, n_inj);
  Eigen::Matrix<double, 6, Eigen::Dynamic> adj_e(6, R);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto nodes = mesh.quadratic_element(t);
    const auto& tri = mesh.triangles()[t];
    for (int a = 0; a < 6; ++a) {
      theta_e.row(a) = theta.row(nodes[a]);
      adj_e.row(a) = adjoint.row(nodes[a]);
    }
    for (int a = 0; a < 3; ++a) {
      const int vertex = tri[a];
      if (floor > 0.0 && sigma[vertex] < floor) continue;
      const Eigen::MatrixXd contrib =
          adj_e.transpose() * model.element_stiffness()[t].by_vertex[a] * theta_e;  // R x n_inj
      for (int i = 0; i < n_inj; ++i) {
        out.jacobian.col(vertex).segment(i * R, R) -= contrib.col(i);
      }
    }
  }
  return out;
}

Eigen::MatrixXd jacobian(const Mesh2D& mesh, const Eigen::VectorXd& sigma,
                         const ContactImpedances& z, const StimulationProtocol& protocol) {
  protocol.validate();
  return forward_and_jacobian(CemModel(mesh, z), sigma, protocol).jacobian;
}

Eigen::MatrixXd transfer_resistance(const SystemMatrices& sys) {
  const int L = sys.n_electrodes();
  const int M = sys.n_potential();
  const CemSolver solver(sys);
  Eigen::MatrixXd currents = Eigen::MatrixXd::Zero(L, L - 1);
  for (int a = 0; a < L - 1; ++a) {
    currents(a, a) = 1.0;
    currents(L - 1, a) = -1.0;
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(M + L - 1, L - 1);
  rhs.bottomRows(L - 1) = sys.C.transpose() * currents;
  const Eigen::MatrixXd theta = solver.solve(rhs);
  const Eigen::MatrixXd U = sys.C * theta.bottomRows(L - 1);  // L x (L-1)
  Eigen::MatrixXd r(L - 1, L - 1);
  for (int a = 0; a < L - 1; ++a)
    for (int b = 0; b < L - 1; ++b) r(b, a) = U(b, a) - U(L - 1, a);
  return r;
}

Eigen::VectorXd NoiseSpec::standard_deviation(const Eigen::VectorXd& noiseless) const {
  const double range = noiseless.size() > 0 ? noiseless.maxCoeff() - noiseless.minCoeff() : 0.0;
  const double s2 = range_fraction * range;
  return ((relative * noiseless.array().abs()).square() + s2 * s2).sqrt();
}

Eigen::VectorXd draw_measurement_noise(const Eigen::VectorXd& noiseless, const NoiseSpec& spec,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double range = noiseless.size() > 0 ? noiseless.maxCoeff() - noiseless.minCoeff() : 0.0;
  Eigen::VectorXd e(noiseless.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double e1 = spec.relative * std::abs(noiseless[i]) * normal(rng);
    const double e2 = spec.range_fraction * range * normal(rng);
    e[i] = e1 + e2;
  }
  return e;
}

SimulatedData simulate_measurements(const Mesh2D& fine_mesh, const Eigen::VectorXd& sigma_true,
                                    const ContactImpedances& z,
                                    const StimulationProtocol& protocol, const NoiseSpec& noise,
                                    std::uint64_t seed, int reconstruction_elements) {
  protocol.validate();
  const CemModel model(fine_mesh, z);
  SimulatedData out;
  out.noiseless = forward_voltages(model, sigma_true, protocol);
  std::mt19937_64 rng(seed);
  out.noise = draw_measurement_noise(out.noiseless, noise, rng);
  out.measured = out.noiseless + out.noise;
  out.noise_std = noise.standard_deviation(out.noiseless);
  out.inverse_crime_warning =
      reconstruction_elements > 0 && fine_mesh.n_triangles() <= reconstruction_elements;
  return out;
}

}  // namespace podeit
