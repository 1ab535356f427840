#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "ensctl/families.hpp"
#include "ensctl/model.hpp"
#include "support/gen.hpp"

using namespace ensctl;
using ensctl::testing::Gen;
using ensctl::testing::max_abs;

namespace {

model::SystemSpec constant_system(const CMatrix& A, const CMatrix& B, double T, double s_lo = 0.0, double s_hi = 1.0) {
  model::SystemSpec spec;
  spec.name = "constant";
  spec.n = static_cast<int>(A.rows());
  spec.m = static_cast<int>(B.cols());
  spec.A = [A](double, double) { return A; };
  spec.B = [B](double, double) { return B; };
  spec.T = T;
  spec.s_lo = s_lo;
  spec.s_hi = s_hi;
  return spec;
}

// expm through the eigendecomposition; fine for the well-separated random
// spectra used below.
CMatrix expm_eig(const CMatrix& A, double t) {
  Eigen::ComplexEigenSolver<CMatrix> es(A);
  const CMatrix& V = es.eigenvectors();
  CVector d = es.eigenvalues();
  for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = std::exp(d[k] * t);
  return V * d.asDiagonal() * V.inverse();
}

// x(T) = e^{AT} x0 + int_0^T e^{A(T-t)} B u(t) dt, composite Simpson with
// `pieces` panels per control interval (u linear there, so the integrand is smooth).
CVector variation_of_constants(const CMatrix& A, const CMatrix& B, const CVector& x0, const ControlSignal& u,
                               int pieces) {
  const auto& t = u.times;
  const double T = t.back();
  CVector acc = CVector::Zero(A.rows());
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double h = (t[i + 1] - t[i]) / pieces;
    for (int q = 0; q <= pieces; ++q) {
      const double tau = t[i] + q * h;
      const double w = (q == 0 || q == pieces) ? 1.0 : (q % 2 ? 4.0 : 2.0);
      acc += (w * h / 3.0) * (expm_eig(A, T - tau) * B * u.value(tau));
    }
  }
  return expm_eig(A, T) * x0 + acc;
}

}  // namespace

TEST_CASE("zero generator gives the identity everywhere") {
  const auto spec = constant_system(CMatrix::Zero(3, 3), CMatrix::Identity(3, 1), 2.0);
  const auto grid = model::Grid::uniform(2.0, 9, 0.0, 1.0, 3);
  const auto tr = model::transition_matrices(spec, grid, 1e-12);
  for (std::size_t j = 0; j < grid.ns(); ++j)
    for (std::size_t i = 0; i < grid.nt(); ++i) {
      CHECK(max_abs(tr.at(j, i) - CMatrix::Identity(3, 3)) == 0.0);
      CHECK(max_abs(tr.inverse_at(j, i) - CMatrix::Identity(3, 3)) == 0.0);
    }
}

TEST_CASE("rotation generator matches the closed-form exponential") {
  const auto spec = families::harmonic_real(-10.0, 10.0, 1.0);
  const auto grid = model::Grid::uniform(1.0, 21, -10.0, 10.0, 11);
  const auto tr = model::transition_matrices(spec, grid, 1e-11);
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    const double w = grid.param_nodes[j];
    for (std::size_t i = 0; i < grid.nt(); ++i) {
      const double t = grid.time_nodes[i];
      CMatrix R(2, 2);
      R << std::cos(w * t), -std::sin(w * t), std::sin(w * t), std::cos(w * t);
      CHECK(max_abs(tr.at(j, i) - R) <= 1e-9);
      CHECK(max_abs(tr.inverse_at(j, i) - R.transpose()) <= 1e-9);
    }
  }
}

TEST_CASE("scalar exponential") {
  model::SystemSpec spec;
  spec.n = 1;
  spec.m = 1;
  spec.A = [](double, double s) { return CMatrix::Constant(1, 1, s); };
  spec.B = [](double, double) { return CMatrix::Constant(1, 1, 1.0); };
  spec.T = 1.0;
  spec.s_lo = 1.0;
  spec.s_hi = 2.0;
  const auto grid = model::Grid::uniform(1.0, 5, 1.0, 2.0, 2);
  const auto tr = model::transition_matrices(spec, grid, 1e-12);
  CHECK(std::abs(tr.at(1, 4)(0, 0) - std::exp(2.0)) <= 1e-9);
  CHECK(std::abs(tr.inverse_at(1, 4)(0, 0) - std::exp(-2.0)) <= 1e-9);
  CHECK(std::abs(model::propagate(spec, 2.0, 0.0, 1.0, 1e-12)(0, 0) - std::exp(2.0)) <= 1e-9);
}

TEST_CASE("forward and inverse transitions are inverse to each other") {
  Gen g(11);
  const CMatrix M0 = 0.5 * g.cmat(3, 3);
  const CMatrix M1 = 0.5 * g.cmat(3, 3);
  model::SystemSpec spec = constant_system(M0, CMatrix::Identity(3, 1), 1.5, -1.0, 1.0);
  spec.A = [M0, M1](double t, double s) -> CMatrix { return M0 + std::sin(2.0 * t) * s * M1; };
  const auto grid = model::Grid::uniform(1.5, 16, -1.0, 1.0, 5);
  const auto tr = model::transition_matrices(spec, grid, 1e-11);
  for (std::size_t j = 0; j < grid.ns(); ++j)
    for (std::size_t i = 0; i < grid.nt(); i += 3)
      CHECK(max_abs(tr.inverse_at(j, i) * tr.at(j, i) - CMatrix::Identity(3, 3)) <= 1e-9);
}

TEST_CASE("semigroup property at random triples") {
  const double tol = 1e-10;
  for (std::uint64_t c = 0; c < 12; ++c) {
    Gen g(21, c);
    const CMatrix M0 = g.cmat(2, 2);
    const CMatrix M1 = g.cmat(2, 2);
    model::SystemSpec spec = constant_system(M0, CMatrix::Identity(2, 1), 2.0, 0.0, 1.0);
    spec.A = [M0, M1](double t, double s) -> CMatrix { return M0 + std::cos(3.0 * t + s) * M1; };
    const double s = g.uniform(0.0, 1.0);
    double t1 = g.uniform(0.0, 2.0);
    double t2 = g.uniform(0.0, 2.0);
    if (t1 > t2) std::swap(t1, t2);
    const CMatrix direct = model::propagate(spec, s, 0.0, t2, tol);
    const CMatrix split = model::propagate(spec, s, t1, t2, tol) * model::propagate(spec, s, 0.0, t1, tol);
    INFO("case " << c << " s=" << s << " t1=" << t1 << " t2=" << t2);
    CHECK(max_abs(direct - split) <= 10.0 * tol * std::max(1.0, max_abs(direct)));
  }
}

TEST_CASE("first three Peano-Baker terms agree for a weak generator") {
  Gen g(5);
  const CMatrix M0 = 0.05 * g.cmat(2, 2);
  const CMatrix M1 = 0.05 * g.cmat(2, 2);
  model::SystemSpec spec = constant_system(M0, CMatrix::Identity(2, 1), 1.0);
  auto A = [M0, M1](double t) -> CMatrix { return M0 + t * M1; };
  spec.A = [A](double t, double) { return A(t); };

  // I + int A + int A(t1) int_0^t1 A(t2), on a fine trapezoid grid
  const int K = 4000;
  const double h = 1.0 / K;
  CMatrix first = CMatrix::Zero(2, 2);
  CMatrix second = CMatrix::Zero(2, 2);
  CMatrix prev_a = A(0.0);
  CMatrix prev_integrand = CMatrix::Zero(2, 2);
  for (int k = 1; k <= K; ++k) {
    const CMatrix a = A(k * h);
    const CMatrix inner = first + 0.5 * h * (prev_a + a);
    const CMatrix integrand = a * inner;
    second += 0.5 * h * (prev_integrand + integrand);
    first = inner;
    prev_a = a;
    prev_integrand = integrand;
  }
  const CMatrix series = CMatrix::Identity(2, 2) + first + second;
  const CMatrix phi = model::propagate(spec, 0.0, 0.0, 1.0, 1e-12);
  // remainder ~ (|A| T)^3 / 6
  CHECK(max_abs(phi - series) <= 1e-4);
  CHECK(max_abs(phi - CMatrix::Identity(2, 2) - first) > 1e-4);
}

TEST_CASE("autonomous rest with zero dynamics and zero control") {
  const auto spec = constant_system(CMatrix::Zero(2, 2), CMatrix::Identity(2, 2), 1.0);
  const auto grid = model::Grid::uniform(1.0, 6, 0.0, 1.0, 4);
  Gen g(3);
  ParamProfile x0(grid.param_nodes, 2);
  for (Eigen::Index j = 0; j < 4; ++j) x0.values.row(j) = g.cvec(2).transpose();
  const auto traj = model::simulate_ensemble(spec, grid, x0, ControlSignal(grid.time_nodes, 2), 1e-12);
  for (std::size_t j = 0; j < grid.ns(); ++j)
    for (std::size_t i = 0; i < grid.nt(); ++i) CHECK(max_abs(traj.at(j, i) - x0.at(j)) == 0.0);
}

TEST_CASE("simulated endpoint matches variation of constants with an independent exponential") {
  for (std::uint64_t c = 0; c < 5; ++c) {
    Gen g(31, c);
    const CMatrix A = g.cmat(2, 2);
    const CMatrix B = g.cmat(2, 1);
    const auto spec = constant_system(A, B, 1.0, 0.0, 1.0);
    const auto grid = model::Grid::uniform(1.0, 11, 0.0, 1.0, 2);
    ControlSignal u(grid.time_nodes, 1);
    for (Eigen::Index i = 0; i < 11; ++i) u.samples(i, 0) = g.cnormal();
    const CVector x0 = g.cvec(2);
    const auto traj = model::simulate_ensemble(spec, grid, ParamProfile::constant(grid.param_nodes, x0), u, 1e-11);
    const CVector oracle = variation_of_constants(A, B, x0, u, 200);
    INFO("case " << c);
    CHECK(max_abs(traj.final_state(0) - oracle) <= 1e-6);
  }
}

TEST_CASE("linearity in the control") {
  const double tol = 1e-10;
  for (std::uint64_t c = 0; c < 6; ++c) {
    Gen g(41, c);
    const CMatrix M0 = g.cmat(2, 2);
    const CMatrix B = g.cmat(2, 2);
    model::SystemSpec spec = constant_system(M0, B, 1.0, 1.0, 2.0);
    spec.A = [M0](double t, double s) -> CMatrix { return s * M0 * std::cos(t); };
    const auto grid = model::Grid::uniform(1.0, 21, 1.0, 2.0, 3);
    const auto u1 = g.smooth_control(grid.time_nodes, 2);
    const auto u2 = g.smooth_control(grid.time_nodes, 2);
    const ControlSignal sum(grid.time_nodes, CRowMatrix(u1.samples + u2.samples));
    ParamProfile x0(grid.param_nodes, 2);
    for (Eigen::Index j = 0; j < 3; ++j) x0.values.row(j) = g.cvec(2).transpose();
    const auto a = model::simulate_ensemble(spec, grid, x0, sum, tol);
    const auto b = model::simulate_ensemble(spec, grid, x0, u1, tol);
    const auto d = model::simulate_ensemble(spec, grid, x0, u2, tol);
    const auto z = model::simulate_ensemble(spec, grid, x0, ControlSignal(grid.time_nodes, 2), tol);
    for (std::size_t j = 0; j < grid.ns(); ++j) {
      const CVector r = a.final_state(j) - b.final_state(j) - d.final_state(j) + z.final_state(j);
      INFO("case " << c << " node " << j);
      CHECK(max_abs(r) <= 10.0 * tol);
    }
  }
}

TEST_CASE("repeated eigenvalue diagnostic") {
  model::SystemSpec rot = constant_system(CMatrix::Zero(2, 2), CMatrix::Identity(2, 1), 1.0, 0.0, 5.0);
  rot.A = [](double, double s) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(0, 1) = -s;
    a(1, 0) = s;
    return a;
  };
  const std::vector<double> s123{1.0, 2.0, 3.0};
  CHECK(model::repeated_eigenvalue_check(rot, s123, 0.0).passes());

  model::SystemSpec scalar = rot;
  scalar.A = [](double, double s) -> CMatrix { return s * CMatrix::Identity(2, 2); };
  const auto rep = model::repeated_eigenvalue_check(scalar, s123, 0.0);
  CHECK_FALSE(rep.passes());
  CHECK(rep.clashes.front().s_a == rep.clashes.front().s_b);

  // s-independent rotation: the characteristic polynomial l^2 + 1 has roots
  // +-i at every sample, so the two samples share both eigenvalues.
  model::SystemSpec fixed = rot;
  fixed.A = [](double, double) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(0, 1) = -1.0;
    a(1, 0) = 1.0;
    return a;
  };
  const std::vector<double> s12{1.0, 2.0};
  const auto clash = model::repeated_eigenvalue_check(fixed, s12, 0.0);
  for (const CVector& ev : clash.eigenvalues) {
    const Complex tr = ev.sum();
    const Complex det = ev.prod();
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    CHECK(std::abs(tr) <= 1e-14);
    CHECK(std::abs(det - 1.0) <= 1e-14);
    CHECK(std::abs(disc - Complex{0.0, 2.0}) <= 1e-12);
  }
  CHECK_FALSE(clash.passes());
  CHECK(clash.clashes.size() == 2);
}

TEST_CASE("Kalman rank of the built-in families") {
  const auto h = families::harmonic_real(-1.0, 1.0, 1.0);
  CHECK(model::kalman_rank(h.A(0.0, 0.5), h.B(0.0, 0.5)) == 2);
  const auto e = families::rotation_scaled_input();
  CHECK(model::kalman_rank(e.A(0.0, 1.5), e.B(0.0, 1.5)) == 2);
  const auto d = families::diagonal(3, 0.0, 1.0, 1.0);
  CHECK(model::kalman_rank(d.A(0.0, 0.7), d.B(0.0, 0.7)) == 3);
  CHECK(model::kalman_rank(d.A(0.0, 0.0), d.B(0.0, 0.0)) == 1);
}

TEST_CASE("input validation") {
  const auto spec = families::harmonic_real(-1.0, 1.0, 1.0);
  const auto grid = model::Grid::uniform(1.0, 5, -1.0, 1.0, 3);
  CHECK_THROWS_AS(model::transition_matrices(spec, grid, 0.0), ParameterError);
  CHECK_THROWS_AS(model::transition_matrices(spec, model::Grid::uniform(2.0, 5, -1.0, 1.0, 3), 1e-8), ParameterError);
  CHECK_THROWS_AS(model::transition_matrices(spec, model::Grid::uniform(1.0, 5, -2.0, 1.0, 3), 1e-8), ParameterError);

  auto bad_shape = spec;
  bad_shape.B = [](double, double) -> CMatrix { return CMatrix::Identity(3, 2); };
  CHECK_THROWS_AS(bad_shape.validate(), ShapeError);

  auto blowup = spec;
  blowup.A = [](double t, double) -> CMatrix {
    return CMatrix::Constant(2, 2, t > 0.5 ? std::numeric_limits<double>::infinity() : 0.0);
  };
  CHECK_THROWS_AS(model::transition_matrices(blowup, grid, 1e-8), IntegrationError);

  CHECK_THROWS_AS(model::simulate_ensemble(spec, grid, ParamProfile(grid.param_nodes, 2),
                                           ControlSignal(grid.time_nodes, 1), 1e-8),
                  ShapeError);
  CHECK_THROWS_AS(model::transition_matrices(spec, grid, 1e-15, 2), ToleranceNotMet);
}

TEST_CASE("uniform grid weights integrate constants exactly") {
  const auto g = model::Grid::uniform(3.0, 31, -2.0, 5.0, 8);
  double st = 0.0, ss = 0.0;
  for (double w : g.time_weights) st += w;
  for (double w : g.param_weights) ss += w;
  CHECK(st == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(ss == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(g.time_nodes.back() == 3.0);
  CHECK(g.param_nodes.back() == 5.0);
}
