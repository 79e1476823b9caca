#include "podeit/pod.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>

#include "podeit/error.hpp"
#include "podeit/hash.hpp"

namespace podeit {

namespace {

// Ensemble eigenvalues below this fraction of the largest one are at the
// eigensolver noise floor; they are treated as zero and their modes dropped.
constexpr double kRankTolerance = 1e-10;

int truncation_count(const RetainedVarianceCurve& curve, Truncation t, int available) {
  if (t.count > 0) return std::min(t.count, available);
  if (!(t.retain > 0.0 && t.retain <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "retained fraction must lie in (0, 1]");
  }
  if (t.retain >= 1.0) return available;
  return std::min(curve.dimension_for(t.retain), available);
}

// Eigenpairs sorted by decreasing eigenvalue.
void sorted_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::eigensolve_failed, "symmetric eigensolver failed");
  values = eig.eigenvalues().reverse();
  vectors = eig.eigenvectors().rowwise().reverse();
}

int numerical_rank(const Eigen::VectorXd& values) {
  if (values.size() == 0 || values[0] <= 0.0) return 0;
  int r = 0;
  while (r < values.size() && values[r] > kRankTolerance * values[0]) ++r;
  return r;
}

}  // namespace

RetainedVarianceCurve::RetainedVarianceCurve(const Eigen::VectorXd& spectrum, double total) {
  const Eigen::VectorXd clamped = spectrum.cwiseMax(0.0);
  if (total <= 0.0) total = clamped.sum();
  values_.resize(clamped.size());
  double tail = 0.0;
  for (Eigen::Index k = clamped.size() - 1; k >= 0; --k) {
    values_[k] = total > 0.0 ? std::clamp(1.0 - tail / total, 0.0, 1.0) : 1.0;
    tail += clamped[k];
  }
}

double RetainedVarianceCurve::at(int k) const {
  if (k <= 0) return 0.0;
  if (k > values_.size()) return 1.0;
  return values_[k - 1];
}

int RetainedVarianceCurve::dimension_for(double threshold) const {
  for (Eigen::Index k = 0; k < values_.size(); ++k) {
    if (values_[k] >= threshold) return static_cast<int>(k + 1);
  }
  return static_cast<int>(values_.size());
}

std::map<double, int> RetainedVarianceCurve::threshold_dims(std::initializer_list<double> thresholds) const {
  std::map<double, int> out;
  for (double t : thresholds) out[t] = dimension_for(t);
  return out;
}

PodBasis PodBasis::truncated(int n) const {
  if (n < 0 || n > n_modes()) {
    throw Error(ErrorKind::invalid_argument,
                "cannot truncate " + std::to_string(n_modes()) + " modes to " + std::to_string(n));
  }
  PodBasis out = *this;
  out.modes = modes.leftCols(n);
  out.eigenvalues = eigenvalues.head(n);
  return out;
}

std::uint64_t PodBasis::content_hash() const {
  ContentHasher h;
  h.add(std::string_view("podeit.pod.v1"));
  h.add<int>(static_cast<int>(ambient)).add(injection);
  h.add_matrix(mean);
  h.add_matrix(eigenvalues);
  h.add_matrix(modes);
  return h.value();
}

void normalize_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index j = 0; j < modes.cols(); ++j) {
    Eigen::Index i;
    modes.col(j).cwiseAbs().maxCoeff(&i);
    if (modes(i, j) < 0.0) modes.col(j) *= -1.0;
  }
}

PodBasis conductivity_pod(const GaussianPrior& prior, Truncation t) {
  PodBasis b;
  Eigen::MatrixXd vectors;
  // The nugget shifts every eigenvalue by the same amount. Decompose the smooth
  // part, drop its eigensolver noise, then add the shift back exactly.
  const double shift = prior.kernel.nodal_variance * prior.kernel.nugget;
  Eigen::MatrixXd smooth = prior.covariance;
  smooth.diagonal().array() -= shift;
  sorted_eigen(smooth, b.spectrum, vectors);
  const double floor = 1e-12 * std::max(b.spectrum[0], 0.0);
  b.spectrum = (b.spectrum.array() <= floor).select(0.0, b.spectrum).array() + shift;
  b.total_variance = prior.covariance.trace();
  const int n = truncation_count(b.curve(), t, static_cast<int>(b.spectrum.size()));
  b.modes = vectors.leftCols(n);
  normalize_signs(b.modes);
  b.eigenvalues = b.spectrum.head(n).cwiseMax(0.0);
  b.mean = prior.mean;
  b.ambient = PodAmbient::conductivity;
  return b;
}

PodBasis potential_pod(const Eigen::MatrixXd& ensemble, Truncation t, int injection) {
  const Eigen::Index T = ensemble.cols();
  if (T < 2) throw Error(ErrorKind::ensemble_too_small, "potential POD needs at least two samples");
  PodBasis b;
  b.ambient = PodAmbient::potential;
  b.injection = injection;
  b.mean = ensemble.rowwise().mean();
  const Eigen::MatrixXd x = (ensemble.colwise() - b.mean) / std::sqrt(static_cast<double>(T - 1));
  b.total_variance = x.squaredNorm();
  if ((ensemble.colwise() - ensemble.col(0)).cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorKind::degenerate_ensemble, "all ensemble members are identical");
  }

  Eigen::MatrixXd modes;
  if (T < ensemble.rows()) {
    Eigen::MatrixXd q;
    sorted_eigen(x.transpose() * x, b.spectrum, q);
    const int rank = numerical_rank(b.spectrum);
    b.spectrum.tail(b.spectrum.size() - rank).setZero();
    const int n = std::min(truncation_count(b.curve(), t, rank), rank);
    modes = x * q.leftCols(n);
    for (int j = 0; j < n; ++j) modes.col(j) /= std::sqrt(b.spectrum[j]);
    // Snapshot modes lose orthogonality as eigenvalues shrink; clean up with QR.
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(modes);
    Eigen::MatrixXd qm = qr.householderQ() * Eigen::MatrixXd::Identity(modes.rows(), n);
    for (int j = 0; j < n; ++j)
      if (qm.col(j).dot(modes.col(j)) < 0.0) qm.col(j) *= -1.0;
    modes = std::move(qm);
  } else {
    Eigen::MatrixXd v;
    sorted_eigen(x * x.transpose(), b.spectrum, v);
    const int rank = numerical_rank(b.spectrum);
    b.spectrum.tail(b.spectrum.size() - rank).setZero();
    const int n = std::min(truncation_count(b.curve(), t, rank), rank);
    modes = v.leftCols(n);
  }
  normalize_signs(modes);
  b.modes = std::move(modes);
  b.eigenvalues = b.spectrum.head(b.modes.cols()).cwiseMax(0.0);
  return b;
}

PodBasis identity_basis(const Eigen::VectorXd& mean, PodAmbient ambient, int injection) {
  PodBasis b;
  b.modes = Eigen::MatrixXd::Identity(mean.size(), mean.size());
  b.eigenvalues = Eigen::VectorXd::Ones(mean.size());
  b.spectrum = b.eigenvalues;
  b.mean = mean;
  b.ambient = ambient;
  b.injection = injection;
  return b;
}

PodBasis rotate_potential_basis(const PodBasis& basis, const Mesh2D& mesh, int injection) {
  if (basis.ambient != PodAmbient::potential || basis.injection != 0) {
    throw Error(ErrorKind::invalid_argument, "rotation expects the potential basis of the first injection");
  }
  if (!mesh.layout()) {
    throw Error(ErrorKind::asymmetric_configuration, "mesh carries no rotationally symmetric electrode layout");
  }
  if (basis.dimension() != mesh.n_quadratic_nodes()) {
    throw Error(ErrorKind::dimension_mismatch, "basis dimension differs from the P2 node count");
  }
  if (injection < 0) throw Error(ErrorKind::invalid_argument, "injection index must be nonnegative");
  if (injection == 0) return basis;

  const double angle = -injection * mesh.layout()->pitch();
  const double c = std::cos(angle), s = std::sin(angle);
  const PointLocator locator(mesh);
  const int M = mesh.n_quadratic_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(6 * static_cast<std::size_t>(M));
  for (int q = 0; q < M; ++q) {
    const Point2 x = mesh.node_position(q);
    const auto hit = locator.locate(Point2(c * x.x() - s * x.y(), s * x.x() + c * x.y()));
    const auto nodes = mesh.quadratic_element(hit.triangle);
    const auto w = quadratic_shape_values(hit.barycentric);
    for (int a = 0; a < 6; ++a)
      if (w[a] != 0.0) trip.emplace_back(q, nodes[a], w[a]);
  }
  Eigen::SparseMatrix<double> interp(M, M);
  interp.setFromTriplets(trip.begin(), trip.end());

  PodBasis out = basis;
  out.injection = injection;
  out.mean = interp * basis.mean;
  const Eigen::MatrixXd rotated = interp * basis.modes;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(rotated);
  out.modes = qr.householderQ() * Eigen::MatrixXd::Identity(M, basis.n_modes());
  for (int j = 0; j < basis.n_modes(); ++j)
    if (out.modes.col(j).dot(rotated.col(j)) < 0.0) out.modes.col(j) *= -1.0;
  return out;
}

Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& field) {
  if (field.size() != basis.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "field length " + std::to_string(field.size()) +
                                                   " differs from basis dimension " +
                                                   std::to_string(basis.dimension()));
  }
  return basis.modes.transpose() * (field - basis.mean);
}

Eigen::MatrixXd project_columns(const PodBasis& basis, const Eigen::MatrixXd& fields) {
  if (fields.rows() != basis.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "field length differs from basis dimension");
  }
  return basis.modes.transpose() * (fields.colwise() - basis.mean);
}

Eigen::VectorXd reconstruct(const PodBasis& basis, const Eigen::VectorXd& coefficients) {
  if (coefficients.size() != basis.n_modes()) {
    throw Error(ErrorKind::dimension_mismatch, "coefficient count differs from mode count");
  }
  return basis.mean + basis.modes * coefficients;
}

}  // namespace podeit
