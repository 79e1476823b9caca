#include "podeit/rom.hpp"

#include <Eigen/Cholesky>

#include "podeit/error.hpp"
#include "podeit/hash.hpp"

namespace podeit {

Ensemble solve_ensemble(const CemModel& model, const Eigen::MatrixXd& sigma_samples,
                        const StimulationProtocol& protocol, const std::vector<int>& keep_injections) {
  protocol.validate();
  if (sigma_samples.rows() != model.n_conductivity()) {
    throw Error(ErrorKind::dimension_mismatch, "sample length differs from vertex count");
  }
  for (int k : keep_injections) {
    if (k < 0 || k >= protocol.n_injections()) throw Error(ErrorKind::invalid_argument, "injection index out of range");
  }
  const Eigen::Index T = sigma_samples.cols();
  Ensemble out;
  out.sigma = sigma_samples;
  out.injections = keep_injections;
  out.beta.assign(keep_injections.size(), Eigen::MatrixXd(model.n_potential(), T));
  out.voltages.resize(protocol.n_measurements(), T);
  for (Eigen::Index s = 0; s < T; ++s) {
    const CemSolver solver(model.assemble(sigma_samples.col(s)));
    const auto sol = solver.solve(protocol);
    out.voltages.col(s) = compute_voltages(sol, protocol);
    for (std::size_t j = 0; j < keep_injections.size(); ++j) out.beta[j].col(s) = sol[keep_injections[j]].beta;
  }
  return out;
}

bool protocol_is_rotational(const StimulationProtocol& protocol) {
  const int L = protocol.n_electrodes();
  const auto& I = protocol.currents;
  for (int k = 1; k < protocol.n_injections(); ++k) {
    for (int l = 0; l < L; ++l) {
      if (std::abs(I(l, k) - I(((l - k) % L + L) % L, 0)) > 1e-12 * I.cwiseAbs().maxCoeff()) return false;
    }
  }
  return true;
}

std::uint64_t ReducedModel::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.rom.v1"));
  h.add(mesh_hash_).add(model_hash_).add(protocol_.content_hash());
  h.add(sigma_basis_.content_hash());
  for (const auto& b : potential_bases_) h.add(b.content_hash());
  return h.value();
}

Eigen::VectorXd ReducedModel::nodal_conductivity(const Eigen::VectorXd& alpha) const {
  return reconstruct(sigma_basis_, alpha);
}

ReducedModel ReducedModel::truncated(int n_sigma, int n_potential) const {
  if (n_sigma < 0 || n_sigma > n_sigma_modes() || n_potential < 0 || n_potential > n_potential_modes()) {
    throw Error(ErrorKind::invalid_argument, "truncation exceeds the stored reduced dimensions");
  }
  ReducedModel out;
  out.sigma_basis_ = sigma_basis_.truncated(n_sigma);
  for (const auto& b : potential_bases_) out.potential_bases_.push_back(b.truncated(n_potential));
  out.protocol_ = protocol_;
  out.F_ = F_;
  out.C_ = C_;
  out.mesh_hash_ = mesh_hash_;
  out.model_hash_ = model_hash_;
  const int m1 = n_potential + 1;
  for (std::size_t i = 0; i < stiffness_.size(); ++i) {
    std::vector<Eigen::MatrixXd> stack;
    for (int k = 0; k <= n_sigma; ++k) stack.push_back(stiffness_[i][k].topLeftCorner(m1, m1));
    out.stiffness_.push_back(std::move(stack));
    out.contact_.push_back(contact_[i].topLeftCorner(m1, m1));
    out.coupling_.push_back(coupling_[i].topRows(m1));
  }
  return out;
}

ReducedModel precompute_reduced(const CemModel& model, const PodBasis& sigma_basis,
                                const std::vector<PodBasis>& potential_bases,
                                const StimulationProtocol& protocol) {
  protocol.validate();
  const Mesh2D& mesh = model.mesh();
  const int N = model.n_conductivity();
  const int M = model.n_potential();
  if (sigma_basis.dimension() != N || sigma_basis.ambient != PodAmbient::conductivity) {
    throw Error(ErrorKind::model_mismatch, "conductivity basis does not live on this mesh");
  }
  if (static_cast<int>(potential_bases.size()) != protocol.n_injections()) {
    throw Error(ErrorKind::model_mismatch, "need one potential basis per current pattern");
  }
  if (protocol.n_electrodes() != model.n_electrodes()) {
    throw Error(ErrorKind::model_mismatch, "protocol electrode count differs from the mesh");
  }
  const int n_pot = potential_bases.front().n_modes();
  for (const auto& b : potential_bases) {
    if (b.dimension() != M || b.ambient != PodAmbient::potential || b.n_modes() != n_pot) {
      throw Error(ErrorKind::model_mismatch, "potential bases must share one size on this mesh");
    }
  }

  ReducedModel rm;
  rm.sigma_basis_ = sigma_basis;
  rm.potential_bases_ = potential_bases;
  rm.protocol_ = protocol;
  rm.F_ = model.electrode_conductance();
  rm.C_ = model.basis();
  rm.mesh_hash_ = mesh.content_hash();
  rm.model_hash_ = model.content_hash();

  const int m1 = n_pot + 1;
  Eigen::MatrixXd phi(N, sigma_basis.n_modes() + 1);
  phi << sigma_basis.mean, sigma_basis.modes;

  for (const auto& pb : potential_bases) {
    Eigen::MatrixXd w(M, m1);
    w << pb.mean, pb.modes;
    // Per-vertex reduced stiffness Q_n, stored column-wise as vec(Q_n).
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m1) * m1, N);
    Eigen::MatrixXd we(6, m1);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      const auto nodes = mesh.quadratic_element(t);
      const auto& tri = mesh.triangles()[t];
      for (int a = 0; a < 6; ++a) we.row(a) = w.row(nodes[a]);
      for (int a = 0; a < 3; ++a) {
        const Eigen::MatrixXd local = we.transpose() * model.element_stiffness()[t].by_vertex[a] * we;
        q.col(tri[a]) += Eigen::Map<const Eigen::VectorXd>(local.data(), local.size());
      }
    }
    const Eigen::MatrixXd stacked = q * phi;
    std::vector<Eigen::MatrixXd> stack;
    stack.reserve(phi.cols());
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
      Eigen::MatrixXd bk = Eigen::Map<const Eigen::MatrixXd>(stacked.col(k).data(), m1, m1);
      stack.push_back(0.5 * (bk + bk.transpose()));
    }
    rm.stiffness_.push_back(std::move(stack));
    const Eigen::MatrixXd dw = model.contact_matrix() * w;
    Eigen::MatrixXd c = w.transpose() * dw;
    rm.contact_.push_back(0.5 * (c + c.transpose()));
    rm.coupling_.push_back(w.transpose() * model.electrode_coupling());
  }
  return rm;
}

namespace {

struct ReducedSystem {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd solution;  // [beta_pod; gamma]
};

void check_alpha(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  if (alpha.size() != model.n_sigma_modes()) {
    throw Error(ErrorKind::dimension_mismatch, "alpha length " + std::to_string(alpha.size()) +
                                                   " differs from " + std::to_string(model.n_sigma_modes()));
  }
  const double lowest = model.nodal_conductivity(alpha).minCoeff();
  if (!(lowest > 0.0)) {
    throw Error(ErrorKind::indefinite_reduced_system,
                "reduced coefficients give nodal conductivity " + std::to_string(lowest));
  }
}

ReducedSystem solve_injection(const ReducedModel& model, const Eigen::VectorXd& alpha, int i) {
  const int m = model.n_potential_modes();
  const int L1 = model.n_electrodes() - 1;
  const auto& stack = model.stiffness()[i];
  Eigen::MatrixXd k = stack[0] + model.contact()[i];
  for (Eigen::Index j = 0; j < alpha.size(); ++j) k.noalias() += alpha[j] * stack[j + 1];
  const Eigen::MatrixXd& C = model.basis();
  const Eigen::MatrixXd ec = model.coupling()[i] * C;  // (m+1) x (L-1)

  Eigen::MatrixXd a(m + L1, m + L1);
  a.topLeftCorner(m, m) = k.bottomRightCorner(m, m);
  a.topRightCorner(m, L1) = ec.bottomRows(m);
  a.bottomLeftCorner(L1, m) = ec.bottomRows(m).transpose();
  a.bottomRightCorner(L1, L1) = C.transpose() * model.electrode_conductance().asDiagonal() * C;

  Eigen::VectorXd rhs(m + L1);
  rhs.head(m) = -k.col(0).tail(m);
  rhs.tail(L1) = C.transpose() * model.protocol().currents.col(i) - ec.row(0).transpose();

  ReducedSystem sys;
  sys.llt.compute(a);
  if (sys.llt.info() != Eigen::Success) {
    throw Error(ErrorKind::indefinite_reduced_system, "reduced system for injection " + std::to_string(i) +
                                                          " is not positive definite");
  }
  sys.solution = sys.llt.solve(rhs);
  return sys;
}

}  // namespace

ReducedSolution reduced_solve(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  check_alpha(model, alpha);
  const int m = model.n_potential_modes();
  ReducedSolution out;
  for (int i = 0; i < model.n_injections(); ++i) {
    const ReducedSystem sys = solve_injection(model, alpha, i);
    out.beta_pod.push_back(sys.solution.head(m));
    out.gamma.push_back(sys.solution.tail(model.n_electrodes() - 1));
  }
  return out;
}

Eigen::VectorXd reduced_forward(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  const ReducedSolution sol = reduced_solve(model, alpha);
  const StimulationProtocol& p = model.protocol();
  const Eigen::MatrixXd P = p.measurement * model.basis();
  const int R = p.n_measurements_per_injection();
  Eigen::VectorXd v(p.n_measurements());
  for (int i = 0; i < p.n_injections(); ++i) v.segment(i * R, R) = P * sol.gamma[i];
  return v;
}

ReducedForwardWithJacobian reduced_forward_and_jacobian(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  check_alpha(model, alpha);
  const StimulationProtocol& p = model.protocol();
  const int m = model.n_potential_modes();
  const int L1 = model.n_electrodes() - 1;
  const int R = p.n_measurements_per_injection();
  const int ns = model.n_sigma_modes();
  const Eigen::MatrixXd P = p.measurement * model.basis();

  Eigen::MatrixXd adjoint_rhs = Eigen::MatrixXd::Zero(m + L1, R);
  adjoint_rhs.bottomRows(L1) = P.transpose();

  ReducedForwardWithJacobian out;
  out.voltages.resize(p.n_measurements());
  out.jacobian.resize(p.n_measurements(), ns);
  Eigen::VectorXd b(m + 1);
  Eigen::MatrixXd y(m, ns);
  for (int i = 0; i < p.n_injections(); ++i) {
    const ReducedSystem sys = solve_injection(model, alpha, i);
    out.voltages.segment(i * R, R) = P * sys.solution.tail(L1);
    const Eigen::MatrixXd z = sys.llt.solve(adjoint_rhs).topRows(m);  // m x R
    b << 1.0, sys.solution.head(m);
    const auto& stack = model.stiffness()[i];
    for (int k = 0; k < ns; ++k) y.col(k).noalias() = stack[k + 1].bottomRows(m) * b;
    out.jacobian.middleRows(i * R, R).noalias() = -z.transpose() * y;
  }
  return out;
}

Eigen::MatrixXd reduced_jacobian(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  return reduced_forward_and_jacobian(model, alpha).jacobian;
}

}  // namespace podeit
