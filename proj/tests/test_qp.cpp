#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ensctl/oscillator.hpp"
#include "ensctl/qp.hpp"
#include "support/gen.hpp"

using namespace ensctl;
using ensctl::testing::Gen;

namespace {

constexpr double kPi = std::numbers::pi;

// Exhaustive KKT search over all 3^n (free, lower, upper) patterns: the
// unique point that is feasible and KKT-consistent is the global minimizer.
RVector brute_force_box_qp(const RMatrix& M, const RVector& c, double b) {
  const auto n = M.rows();
  double best = std::numeric_limits<double>::infinity();
  RVector best_x = RVector::Zero(n);
  std::size_t patterns = 1;
  for (Eigen::Index i = 0; i < n; ++i) patterns *= 3;
  for (std::size_t code = 0; code < patterns; ++code) {
    std::vector<int> state(static_cast<std::size_t>(n));
    std::size_t rest = code;
    for (auto& s : state) {
      s = static_cast<int>(rest % 3) - 1;
      rest /= 3;
    }
    RVector x = RVector::Zero(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 0) free.push_back(i);
      else x[i] = state[static_cast<std::size_t>(i)] * b;
    }
    if (!free.empty()) {
      const auto k = static_cast<Eigen::Index>(free.size());
      RMatrix mff(k, k);
      RVector rhs(k);
      for (Eigen::Index p = 0; p < k; ++p) {
        rhs[p] = -c[free[static_cast<std::size_t>(p)]];
        for (Eigen::Index i = 0; i < n; ++i)
          if (state[static_cast<std::size_t>(i)] != 0) rhs[p] -= M(free[static_cast<std::size_t>(p)], i) * x[i];
        for (Eigen::Index q = 0; q < k; ++q)
          mff(p, q) = M(free[static_cast<std::size_t>(p)], free[static_cast<std::size_t>(q)]);
      }
      const RVector xf = mff.ldlt().solve(rhs);
      bool inside = true;
      for (Eigen::Index p = 0; p < k; ++p) {
        if (std::abs(xf[p]) > b) inside = false;
        x[free[static_cast<std::size_t>(p)]] = xf[p];
      }
      if (!inside) continue;
    }
    const double f = x.dot(M * x) + 2.0 * c.dot(x);
    if (f < best) {
      best = f;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_CASE("matrix entries") {
  const auto p = qp::build_qp(kPi, 2, 1.0, 1.0, qp::Weighting::literal);
  CHECK(std::abs(p.H(0, 1)) <= 1e-16);
  CHECK(p.H(0, 0) == 1.0);
  CHECK(p.H(1, 1) == 1.0);
  for (double T : {0.3, 1.0, 7.0}) {
    const auto q = qp::build_qp(T, 13);
    CHECK(q.Q[0] == 1.0);
    for (Eigen::Index i = 0; i < 13; ++i) CHECK(q.H(i, i) == 1.0);
    CHECK(q.times.back() == T);
    CHECK(q.dt == doctest::Approx(T / 12.0));
  }
  CHECK(qp::reproduction_samples(1.0) == 51);
  CHECK(qp::reproduction_samples(10.0 * kPi) == 316);
}

TEST_CASE("n=51 at T=5 pi is positive definite") {
  const auto p = qp::build_qp(5.0 * kPi, 51, 1.0, 1.0, qp::Weighting::literal);
  const auto rep = qp::certify_positive_definite(p);
  CHECK(rep.certified);
  CHECK(rep.lambda_max_double > 0.0);
}

TEST_CASE("trivial solves") {
  const auto zero = qp::make_qp(RMatrix::Identity(4, 4) * 2.0, RVector::Zero(4), 1.0);
  const auto s0 = qp::solve_box_qp(zero);
  CHECK(s0.x.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s0.objective == 0.0);

  const auto scalar = qp::make_qp(RMatrix::Ones(1, 1), RVector::Ones(1), 1.0);
  const auto s1 = qp::solve_box_qp(scalar);
  CHECK(s1.x[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s1.objective == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s1.converged);
}

TEST_CASE("random small problems against exhaustive KKT enumeration") {
  for (std::uint64_t c = 0; c < 30; ++c) {
    Gen g(500, c);
    const int n = g.integer(1, 6);
    RMatrix R(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) R(i, j) = g.normal();
    const RMatrix M = R * R.transpose() + 0.05 * RMatrix::Identity(n, n);
    const RVector q = 3.0 * g.rvec(n);
    const double b = g.uniform(0.2, 2.0);
    const auto prob = qp::make_qp(M, q, b);
    const auto sol = qp::solve_box_qp(prob);
    const RVector oracle = brute_force_box_qp(M, q, b);
    INFO("case " << c << " n=" << n);
    CHECK(sol.converged);
    CHECK((sol.x - oracle).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(sol.x.cwiseAbs().maxCoeff() <= b);
    for (std::size_t k = 1; k < sol.history.size(); ++k) CHECK(sol.history[k] <= sol.history[k - 1]);
  }
}

TEST_CASE("gradient-only mode converges to the same point") {
  const auto prob = qp::build_qp(3.0, 31);
  qp::SolverOptions pg;
  pg.warmup = 0;
  pg.tol = 1e-9;
  const auto a = qp::solve_box_qp(prob, pg);
  const auto b = qp::solve_box_qp(prob);
  CHECK(b.converged);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-8));
  for (std::size_t k = 1; k < a.history.size(); ++k) CHECK(a.history[k] <= a.history[k - 1]);
}

TEST_CASE("feasibility and descent from random starts") {
  for (std::uint64_t c = 0; c < 8; ++c) {
    Gen g(600, c);
    const double T = g.uniform(0.5, 12.0);
    const auto prob = qp::build_qp(T, static_cast<std::size_t>(g.integer(5, 60)));
    const RVector start = 3.0 * g.rvec(static_cast<Eigen::Index>(prob.size()));
    const auto sol = qp::solve_box_qp(prob, {}, start);
    INFO("case " << c << " T=" << T);
    CHECK(sol.converged);
    CHECK(sol.x.cwiseAbs().maxCoeff() <= prob.bound);
    CHECK(sol.kkt_residual <= 1e-10);
    for (std::size_t k = 1; k < sol.history.size(); ++k) CHECK(sol.history[k] <= sol.history[k - 1]);
  }
}

TEST_CASE("imaginary part of the double integral vanishes") {
  for (std::uint64_t c = 0; c < 10; ++c) {
    Gen g(700, c);
    const auto prob = qp::build_qp(g.uniform(0.5, 20.0), 41);
    const RVector x = g.rvec(41);
    const double w = g.uniform(-1.0, 1.0);
    CHECK(std::abs(qp::imaginary_cross_term(prob, x, w)) <= 1e-13 * std::max(1.0, x.squaredNorm()));
  }
}

TEST_CASE("zero control keeps unit distance") {
  const auto prob = qp::build_qp(4.0, 21);
  const auto om = linspace(-1.0, 1.0, 51);
  const RVector d = qp::evaluate_final_distance(prob, RVector::Zero(21), om);
  CHECK((d.array() - 1.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("continuous cost matches the simulated integral of |p(T,w)|^2") {
  for (double T : {1.0, kPi, 5.0 * kPi}) {
    const auto prob = qp::build_qp(T, qp::reproduction_samples(T));
    const auto sol = qp::solve_box_qp(prob);
    oscillator::HarmonicSpec spec;
    spec.omega1 = -1.0;
    spec.omega2 = 1.0;
    spec.T = T;
    spec.N = 401;
    spec.time_nodes = prob.size();
    const ControlSignal u(prob.times, CRowMatrix(sol.x.cast<Complex>()));
    const CVector p0 = CVector::Ones(401);
    const auto sim = oscillator::verify_by_simulation(spec, u, p0, CVector::Zero(401));
    const auto w = trapezoid_weights(spec.frequencies());
    double integral = 0.0;
    for (std::size_t j = 0; j < 401; ++j) integral += w[j] * std::norm(sim.final_states[static_cast<Eigen::Index>(j)]);
    INFO("T=" << T);
    CHECK(std::abs(integral - sol.continuous_cost) <= 0.02 * integral);
  }
}

TEST_CASE("refuses an indefinite matrix") {
  RMatrix M = RMatrix::Identity(3, 3);
  M(2, 2) = -1.0;
  CHECK_THROWS_AS(qp::solve_box_qp(qp::make_qp(M, RVector::Ones(3), 1.0)), NumericalError);
  CHECK_THROWS_AS(qp::build_qp(1.0, 1), ParameterError);
  CHECK_THROWS_AS(qp::make_qp(RMatrix::Identity(2, 2), RVector::Ones(3), 1.0), ShapeError);
}

TEST_CASE("power iteration") {
  Gen g(8);
  RMatrix R(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) R(i, j) = g.normal();
  const RMatrix M = R * R.transpose();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(M);
  CHECK(qp::power_iteration(M) == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-8));
}
