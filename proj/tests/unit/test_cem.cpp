#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "podeit/cem.hpp"
#include "podeit/error.hpp"
#include "podeit/quadrature.hpp"

using namespace podeit;

namespace {

ElectrodeLayout reference_layout() { return {16, 2.5, 14.0, 0.0}; }

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Eight triangles fanned around the origin with two single-edge electrodes.
Mesh2D octagon_mesh() {
  std::vector<Point2> v{Point2::Zero()};
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 8.0;
    v.emplace_back(std::cos(a), std::sin(a));
  }
  std::vector<std::array<int, 3>> t;
  for (int k = 0; k < 8; ++k) t.push_back({0, 1 + k, 1 + (k + 1) % 8});
  return Mesh2D::build(v, t, {{{1, 2, 0.0}}, {{5, 6, 0.0}}});
}

Eigen::VectorXd smooth_conductivity(const Mesh2D& mesh) {
  Eigen::VectorXd s(mesh.n_linear_nodes());
  for (int i = 0; i < s.size(); ++i) {
    const Point2 p = mesh.vertices()[i];
    s[i] = 3.0 - 1.5 * std::exp(-((p - Point2(-5, 5)).squaredNorm()) / (2 * 2.5 * 2.5)) +
           1.0 * std::exp(-((p - Point2(6, -2)).squaredNorm()) / (2 * 3.0 * 3.0));
  }
  return s;
}

// Independent dense assembly: collapsed-coordinate Gauss product rule on each
// triangle and closed-form P2 edge integrals.
Eigen::MatrixXd brute_force_system(const Mesh2D& mesh, const Eigen::VectorXd& sigma, double z) {
  const int M = mesh.n_quadratic_nodes();
  const int L = mesh.n_electrodes();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(M, M);
  const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto tri = mesh.triangles()[t];
    const auto nodes = mesh.quadratic_element(t);
    const Point2 p0 = mesh.vertices()[tri[0]], p1 = mesh.vertices()[tri[1]], p2 = mesh.vertices()[tri[2]];
    Eigen::Matrix2d jac;
    jac << p1 - p0, p2 - p0;
    const double det = jac.determinant();
    const Eigen::Matrix2d jinv_t = jac.inverse().transpose();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double u = 0.5 * (1 + g[a]);
        const double r = 0.5 * (1 + g[b]);
        const double xi = u * (1 - r), eta = u * r;  // Duffy map, Jacobian u/4 on [-1,1]^2
        const double weight = w[a] * w[b] * 0.25 * u * std::abs(det);
        const double l0 = 1 - xi - eta, l1 = xi, l2 = eta;
        // reference gradients in (xi, eta)
        Eigen::Matrix<double, 2, 6> dref;
        dref.col(0) << -(4 * l0 - 1), -(4 * l0 - 1);
        dref.col(1) << 4 * l1 - 1, 0;
        dref.col(2) << 0, 4 * l2 - 1;
        dref.col(3) << 4 * (l0 - l1), -4 * l1;
        dref.col(4) << 4 * l2, 4 * l1;
        dref.col(5) << -4 * l2, 4 * (l0 - l2);
        const Eigen::Matrix<double, 2, 6> grad = jinv_t * dref;
        const double s = l0 * sigma[tri[0]] + l1 * sigma[tri[1]] + l2 * sigma[tri[2]];
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j) B(nodes[i], nodes[j]) += weight * s * grad.col(i).dot(grad.col(j));
      }
    }
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(M, M);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(M, L);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(L);
  Eigen::Matrix3d mass;
  mass << 4, -1, 2, -1, 4, 2, 2, 2, 16;
  mass /= 30.0;
  const Eigen::Vector3d load(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0);
  for (int l = 0; l < L; ++l) {
    for (const auto& ee : mesh.electrodes()[l]) {
      const auto e = mesh.edges()[ee.edge];
      const int nodes[3] = {e[0], e[1], mesh.midpoint_node(ee.edge)};
      for (int i = 0; i < 3; ++i) {
        E(nodes[i], l) -= ee.measure * load[i] / z;
        for (int j = 0; j < 3; ++j) D(nodes[i], nodes[j]) += ee.measure * mass(i, j) / z;
      }
      F[l] += ee.measure / z;
    }
  }
  const Eigen::MatrixXd C = electrode_basis(L);
  Eigen::MatrixXd A(M + L - 1, M + L - 1);
  A << B + D, E * C, C.transpose() * E.transpose(), C.transpose() * F.asDiagonal() * C;
  return A;
}

}  // namespace

TEST_CASE("degree-5 triangle rule integrates monomials exactly") {
  for (int a = 0; a <= 5; ++a) {
    for (int b = 0; a + b <= 5; ++b) {
      double s = 0.0;
      for (const auto& q : triangle_rule_degree5()) {
        s += 0.5 * q.weight * std::pow(q.barycentric[1], a) * std::pow(q.barycentric[2], b);
      }
      CHECK(s == doctest::Approx(factorial(a) * factorial(b) / factorial(a + b + 2)).epsilon(1e-13));
    }
  }
  double w = 0.0;
  for (const auto& q : gauss_legendre_4()) w += q.weight * std::pow(q.point, 7);
  CHECK(w == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("electrode conductance is |e|/z") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 2414);
  const CemModel model(mesh, ContactImpedances::uniform(16, 0.01));
  for (int l = 0; l < 16; ++l) CHECK(model.electrode_conductance()[l] == doctest::Approx(250.0).epsilon(1e-12));
  // Contact integrals are consistent: D 1 = -E summed over electrodes, 1^T E = -F.
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.n_quadratic_nodes());
  const Eigen::VectorXd col_sums = model.electrode_coupling().transpose() * one;
  for (int l = 0; l < 16; ++l) CHECK(-col_sums[l] == doctest::Approx(250.0).epsilon(1e-12));
}

TEST_CASE("assembly matches an independent dense assembly") {
  for (const Mesh2D& mesh : {octagon_mesh(), generate_disk_mesh({4, 2.0, 5.0, 0.0}, 120)}) {
    Eigen::VectorXd sigma(mesh.n_linear_nodes());
    for (int i = 0; i < sigma.size(); ++i) sigma[i] = 1.0 + 0.3 * std::sin(1.7 * i);
    const double z = 0.05;
    const SystemMatrices sys =
        assemble_system(mesh, sigma, ContactImpedances::uniform(mesh.n_electrodes(), z));
    const Eigen::MatrixXd dense(sys.A);
    const Eigen::MatrixXd ref = brute_force_system(mesh, sigma, z);
    CHECK((dense - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * dense.cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("stiffness is linear in the coefficient vector") {
  const Mesh2D mesh = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 120);
  const CemModel model(mesh, ContactImpedances::uniform(4, 0.01));
  const int n = mesh.n_linear_nodes();
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 3.0, 0.5);
  const Eigen::MatrixXd lhs(model.stiffness(2.0 * a - 0.5 * b));
  const Eigen::MatrixXd rhs = 2.0 * Eigen::MatrixXd(model.stiffness(a)) - 0.5 * Eigen::MatrixXd(model.stiffness(b));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("conductivity and impedance validation") {
  const Mesh2D mesh = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 120);
  Eigen::VectorXd sigma = Eigen::VectorXd::Ones(mesh.n_linear_nodes());
  sigma[3] = -0.1;
  const CemModel strict(mesh, ContactImpedances::uniform(4, 0.01));
  try {
    strict.assemble(sigma);
    FAIL("expected nonpositive-conductivity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::nonpositive_conductivity);
  }
  const CemModel clipped(mesh, ContactImpedances::uniform(4, 0.01), 1e-3);
  CHECK_NOTHROW(clipped.assemble(sigma));
  const auto protocol = StimulationProtocol::opposite_adjacent(4);
  const auto fj = forward_and_jacobian(clipped, sigma, protocol);
  CHECK(fj.jacobian.col(3).norm() == 0.0);
  try {
    CemModel(mesh, ContactImpedances::uniform(4, 0.0));
    FAIL("expected nonpositive-impedance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::nonpositive_impedance);
  }
  CHECK_THROWS_AS(strict.assemble(Eigen::VectorXd::Ones(5)), Error);
}

TEST_CASE("protocol validation and layout") {
  const auto p = StimulationProtocol::opposite_adjacent(16);
  CHECK(p.n_injections() == 8);
  CHECK(p.n_measurements() == 128);
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.currents(0, 0) = 2.0;
  try {
    bad.validate();
    FAIL("expected invalid-protocol");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_protocol);
  }
  CHECK_THROWS_AS(StimulationProtocol::opposite_adjacent(5), Error);
}

TEST_CASE("zero current gives zero voltages, negation and scaling are linear") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const SystemMatrices sys = assemble_system(mesh, smooth_conductivity(mesh), ContactImpedances::uniform(16, 0.01));
  auto p = StimulationProtocol::opposite_adjacent(16);
  const Eigen::VectorXd v = compute_voltages(solve_forward(sys, p), p);
  auto zero = p;
  zero.currents.setZero();
  CHECK(compute_voltages(solve_forward(sys, zero), zero).cwiseAbs().maxCoeff() == 0.0);
  auto neg = p;
  neg.currents *= -2.5;
  const Eigen::VectorXd vn = compute_voltages(solve_forward(sys, neg), neg);
  CHECK((vn + 2.5 * v).norm() <= 1e-12 * v.norm());
}

TEST_CASE("conductivity and impedance scaling") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const auto p = StimulationProtocol::opposite_adjacent(16);
  const Eigen::VectorXd sigma = smooth_conductivity(mesh);
  const Eigen::VectorXd v1 = forward_voltages(CemModel(mesh, ContactImpedances::uniform(16, 0.01)), sigma, p);
  const Eigen::VectorXd v2 = forward_voltages(CemModel(mesh, ContactImpedances::uniform(16, 0.005)), 2.0 * sigma, p);
  CHECK((2.0 * v2 - v1).norm() <= 1e-10 * v1.norm());
}

TEST_CASE("reciprocity of transfer resistances") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 2414);
  const SystemMatrices sys = assemble_system(mesh, smooth_conductivity(mesh), ContactImpedances::uniform(16, 0.01));
  const Eigen::MatrixXd r = transfer_resistance(sys);
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * r.cwiseAbs().maxCoeff());
}

TEST_CASE("raising conductivity lowers driving-point resistances") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const auto z = ContactImpedances::uniform(16, 0.01);
  const Eigen::VectorXd sigma = smooth_conductivity(mesh);
  Eigen::VectorXd higher = sigma;
  for (int i = 0; i < higher.size(); ++i) higher[i] += 0.2 + 0.1 * std::cos(i);
  const Eigen::MatrixXd r0 = transfer_resistance(assemble_system(mesh, sigma, z));
  const Eigen::MatrixXd r1 = transfer_resistance(assemble_system(mesh, higher, z));
  // R(sigma) - R(higher) is positive semidefinite.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r0 - r1);
  CHECK(eig.eigenvalues().minCoeff() > -1e-12 * r0.norm());
  for (int a = 0; a < 15; ++a) CHECK(r1(a, a) < r0(a, a));
}

TEST_CASE("coarse and fine meshes agree within one percent for homogeneous conductivity") {
  const auto p = StimulationProtocol::opposite_adjacent(16);
  const auto z = ContactImpedances::uniform(16, 0.01);
  auto potentials = [&](const Mesh2D& mesh) {
    const auto sol = solve_forward(
        CemModel(mesh, z).assemble(Eigen::VectorXd::Constant(mesh.n_linear_nodes(), 3.0)), p);
    Eigen::VectorXd u(16 * p.n_injections());
    for (int i = 0; i < p.n_injections(); ++i) {
      const Eigen::VectorXd U = sol[i].electrode_potentials();
      u.segment(16 * i, 16) = U.array() - U.mean();
    }
    return u;
  };
  const Eigen::VectorXd uc = potentials(generate_disk_mesh(reference_layout(), 2414));
  const Eigen::VectorXd uf = potentials(generate_disk_mesh(reference_layout(), 8394));
  const double rel = (uc - uf).norm() / uf.norm();
  MESSAGE("relative coarse/fine electrode potential difference " << rel);
  CHECK(rel < 0.01);
}

TEST_CASE("adjoint Jacobian matches central finite differences") {
  const Mesh2D mesh = generate_disk_mesh({4, 2.0, 5.0, 0.0}, 150);
  REQUIRE(mesh.n_triangles() <= 200);
  const CemModel model(mesh, ContactImpedances::uniform(4, 0.01));
  const auto p = StimulationProtocol::opposite_adjacent(4);
  Eigen::VectorXd sigma(mesh.n_linear_nodes());
  for (int i = 0; i < sigma.size(); ++i) {
    const Point2 x = mesh.vertices()[i];
    sigma[i] = 2.0 + 0.5 * std::sin(0.4 * x.x()) * std::cos(0.3 * x.y());
  }
  const auto fj = forward_and_jacobian(model, sigma, p);
  CHECK((fj.voltages - forward_voltages(model, sigma, p)).norm() <= 1e-12 * fj.voltages.norm());
  Eigen::MatrixXd fd(fj.jacobian.rows(), fj.jacobian.cols());
  for (int n = 0; n < sigma.size(); ++n) {
    const double h = 1e-4 * sigma[n];
    Eigen::VectorXd sp = sigma, sm = sigma;
    sp[n] += h;
    sm[n] -= h;
    fd.col(n) = (forward_voltages(model, sp, p) - forward_voltages(model, sm, p)) / (2 * h);
  }
  const double rel = (fd - fj.jacobian).norm() / fd.norm();
  MESSAGE("Jacobian relative error " << rel);
  CHECK(rel < 1e-5);
}

TEST_CASE("Jacobian rows permute under rotation by one electrode pitch") {
  const ElectrodeLayout layout = reference_layout();
  const Mesh2D mesh = generate_disk_mesh(layout, 600);
  const CemModel model(mesh, ContactImpedances::uniform(16, 0.01));
  const auto p = StimulationProtocol::opposite_adjacent(16);
  const auto fj = forward_and_jacobian(model, Eigen::VectorXd::Constant(mesh.n_linear_nodes(), 3.0), p);
  const PointLocator locator(mesh);
  const double c = std::cos(layout.pitch()), s = std::sin(layout.pitch());
  std::vector<int> rot(mesh.n_linear_nodes());
  for (int v = 0; v < mesh.n_linear_nodes(); ++v) {
    const Point2 x = mesh.vertices()[v];
    const auto hit = locator.locate(Point2(c * x.x() - s * x.y(), s * x.x() + c * x.y()));
    int k;
    hit.barycentric.maxCoeff(&k);
    rot[v] = mesh.triangles()[hit.triangle][k];
  }
  double worst = 0.0;
  const int R = 16;
  for (int i = 0; i + 1 < 8; ++i) {
    for (int m = 0; m < R; ++m) {
      for (int v = 0; v < mesh.n_linear_nodes(); ++v) {
        const double a = fj.jacobian(i * R + m, v);
        const double b = fj.jacobian((i + 1) * R + (m + 1) % R, rot[v]);
        worst = std::max(worst, std::abs(a - b));
      }
    }
  }
  CHECK(worst <= 1e-8 * fj.jacobian.cwiseAbs().maxCoeff());
}

TEST_CASE("noise draws have the specified standard deviation") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const auto p = StimulationProtocol::opposite_adjacent(16);
  const Eigen::VectorXd v = forward_voltages(CemModel(mesh, ContactImpedances::uniform(16, 0.01)), smooth_conductivity(mesh), p);
  const NoiseSpec spec;
  const Eigen::VectorXd sd = spec.standard_deviation(v);
  std::mt19937_64 rng(7);
  const int draws = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(v.size()), sum2 = Eigen::VectorXd::Zero(v.size());
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd e = draw_measurement_noise(v, spec, rng);
    sum += e;
    sum2 += e.cwiseProduct(e);
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::VectorXd var = sum2 / draws - mean.cwiseProduct(mean);
  for (int i = 0; i < v.size(); ++i) {
    CHECK(std::sqrt(var[i]) == doctest::Approx(sd[i]).epsilon(0.05));
    CHECK(std::abs(mean[i]) < 5.0 * sd[i] / std::sqrt(draws));
  }
}

TEST_CASE("simulation is reproducible and flags inverse crimes") {
  const Mesh2D mesh = generate_disk_mesh(reference_layout(), 600);
  const auto p = StimulationProtocol::opposite_adjacent(16);
  const auto z = ContactImpedances::uniform(16, 0.01);
  const auto a = simulate_measurements(mesh, smooth_conductivity(mesh), z, p, {}, 11, mesh.n_triangles());
  const auto b = simulate_measurements(mesh, smooth_conductivity(mesh), z, p, {}, 11, 300);
  CHECK((a.measured - b.measured).norm() == 0.0);
  CHECK(a.inverse_crime_warning);
  CHECK_FALSE(b.inverse_crime_warning);
  CHECK((a.measured - a.noiseless - a.noise).norm() == doctest::Approx(0.0));
}
