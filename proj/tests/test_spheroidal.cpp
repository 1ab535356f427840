#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "ensctl/spheroidal.hpp"
#include "support/gen.hpp"

using namespace ensctl;
using spheroidal::DpssMethod;
using ensctl::testing::Gen;

namespace {

constexpr double kPi = std::numbers::pi;

// Frozen from scipy.signal.windows.dpss(8, 1.6, Kmax=8, return_ratios=True).
constexpr std::array<double, 8> kScipyKappa8{0.9996534667693493,    0.9854701922561213,    0.8201235999813852,
                                             0.34509137445236626,   0.04726441940260223,   0.0023449974580143085,
                                             5.151830145405656e-05, 4.3137870708864767e-07};
constexpr std::array<double, 8> kScipySeq0{0.0791835985324564, 0.22735260482211833, 0.404851785439047,
                                           0.5273858005586274, 0.5273858005586274,  0.404851785439047,
                                           0.22735260482211828, 0.07918359853245639};
constexpr std::array<double, 8> kScipySeq1{0.2567795928760803,   0.44819989217538114,  0.44506510409560046,
                                           0.1873450038104655,   -0.18734500381046543, -0.44506510409560046,
                                           -0.44819989217538125, -0.2567795928760804};

// Frozen from an 80-digit mpmath eigsy of the N=32, W=0.1 sinc matrix.
constexpr std::array<std::pair<int, double>, 9> kMpKappa32{{{0, 0.99999997053516643},
                                                            {3, 0.99825390521943177},
                                                            {6, 0.45449592902925248},
                                                            {9, 0.0012664951289570676},
                                                            {12, 1.5351698397664557e-7},
                                                            {15, 3.0351970711342936e-12},
                                                            {18, 1.2667502859986263e-17},
                                                            {21, 1.2009420090387474e-23},
                                                            {24, 2.4275746606308198e-30}}};

// Eigenvalues of a symmetric 3x3 by the trigonometric cubic solution, descending.
std::array<double, 3> symmetric_cubic(const RMatrix& A) {
  const double q = A.trace() / 3.0;
  const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
  const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) + (A(2, 2) - q) * (A(2, 2) - q) +
                    2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const RMatrix B = (A - q * RMatrix::Identity(3, 3)) / p;
  const double r = std::clamp(B.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * kPi / 3.0);
  return {e1, 3.0 * q - e1 - e3, e3};
}

// Null vector of A - l I from the cross product of two of its rows.
RVector null_vector(const RMatrix& A, double l) {
  const RMatrix M = A - l * RMatrix::Identity(3, 3);
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const Eigen::Vector3d c = Eigen::Vector3d(M.row(a)).cross(Eigen::Vector3d(M.row(b)));
      if (c.norm() > best.norm()) best = c;
    }
  return best.normalized();
}

}  // namespace

TEST_CASE("sinc matrix entries") {
  const RMatrix A = spheroidal::sinc_matrix(2, 0.25);
  CHECK(A(0, 0) == 0.5);
  CHECK(A(1, 1) == 0.5);
  CHECK(A(0, 1) == doctest::Approx(1.0 / kPi).epsilon(1e-15));
  CHECK(A(1, 0) == A(0, 1));
}

TEST_CASE("sinc matrix is symmetric Toeplitz exactly") {
  for (std::uint64_t c = 0; c < 20; ++c) {
    Gen g(51, c);
    const auto N = static_cast<std::size_t>(g.integer(2, 40));
    const double W = g.uniform(0.01, 0.49);
    const RMatrix A = spheroidal::sinc_matrix(N, W);
    const auto n = static_cast<Eigen::Index>(N);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        CHECK(A(i, j) == A(j, i));
        if (i + 1 < n && j + 1 < n) CHECK(A(i, j) == A(i + 1, j + 1));
      }
  }
}

TEST_CASE("N=8, W=0.2 eigenvalues lie in (0,1)") {
  const RVector ev = spheroidal::sinc_eigenvalues(8, 0.2);
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    CHECK(ev[k] > 0.0);
    CHECK(ev[k] < 1.0);
  }
}

TEST_CASE("N=8, W=0.2 agrees with the reference DPSS") {
  for (auto method : {DpssMethod::commuting_tridiagonal, DpssMethod::dense}) {
    const auto b = spheroidal::dpss(8, 0.2, 8, method, 1e-10);
    REQUIRE(b.count() == 8);
    for (std::size_t k = 0; k < 8; ++k)
      CHECK(b.kappas[static_cast<Eigen::Index>(k)] == doctest::Approx(kScipyKappa8[k]).epsilon(1e-10));
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(std::abs(b.sequences(static_cast<Eigen::Index>(t), 0) - kScipySeq0[t]) <= 1e-10);
      CHECK(std::abs(b.sequences(static_cast<Eigen::Index>(t), 1) - kScipySeq1[t]) <= 1e-10);
    }
  }
}

TEST_CASE("small concentrations resolved far below machine epsilon") {
  const auto b = spheroidal::dpss(32, 0.1, 0, DpssMethod::commuting_tridiagonal, 1e-32);
  REQUIRE(b.count() >= 25);
  for (auto [k, ref] : kMpKappa32) {
    INFO("k=" << k);
    CHECK(b.kappas[k] == doctest::Approx(ref).epsilon(1e-7));
  }
  // the dense solver only sees the top of the spectrum
  const auto d = spheroidal::dpss(32, 0.1, 10, DpssMethod::dense);
  for (Eigen::Index k = 0; k < 10; ++k) CHECK(d.kappas[k] == doctest::Approx(b.kappas[k]).epsilon(1e-9));
}

TEST_CASE("ordering, range, symmetry and eigen-equation residual") {
  for (std::uint64_t c = 0; c < 12; ++c) {
    Gen g(61, c);
    const auto N = static_cast<std::size_t>(g.integer(4, 300));
    // keep N W moderate so that kappa_0 stays distinguishable from 1
    const double W = g.uniform(0.02, std::min(0.3, 5.0 / static_cast<double>(N)));
    const auto b = spheroidal::dpss(N, W);
    const RMatrix A = spheroidal::sinc_matrix(N, W);
    INFO("N=" << N << " W=" << W);
    REQUIRE(b.count() >= 1);
    for (std::size_t k = 0; k < b.count(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const RVector v = b.sequences.col(col);
      CHECK(b.kappas[col] > 0.0);
      CHECK(b.kappas[col] < 1.0);
      if (k > 0) CHECK(b.kappas[col] < b.kappas[col - 1]);
      CHECK((A * v - b.kappas[col] * v).norm() <= 1e-8);
      const double parity = k % 2 == 0 ? 1.0 : -1.0;
      CHECK((v.reverse() - parity * v).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("N=3, W=0.1 against the closed-form cubic") {
  const RMatrix A = spheroidal::sinc_matrix(3, 0.1);
  const auto ev = symmetric_cubic(A);
  for (auto method : {DpssMethod::commuting_tridiagonal, DpssMethod::dense}) {
    const auto b = spheroidal::dpss(3, 0.1, 3, method, 0.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(b.kappas[k] == doctest::Approx(ev[static_cast<std::size_t>(k)]).epsilon(1e-10));
      const RVector oracle = null_vector(A, ev[static_cast<std::size_t>(k)]);
      const double align = std::abs(oracle.dot(b.sequences.col(k)));
      CHECK(align == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("trace identity") {
  for (std::uint64_t c = 0; c < 10; ++c) {
    Gen g(71, c);
    const auto N = static_cast<std::size_t>(g.integer(2, 400));
    const double W = g.uniform(0.01, 0.49);
    CHECK(spheroidal::sinc_eigenvalues(N, W).sum() == doctest::Approx(2.0 * W * N).epsilon(1e-10));
  }
}

TEST_CASE("band concentration reproduces the eigenvalue") {
  const auto b = spheroidal::dpss(64, 0.05, 8);
  for (Eigen::Index k = 0; k < 8; ++k) {
    const RVector v = b.sequences.col(k);
    const double c = spheroidal::band_concentration(std::span<const double>(v.data(), 64), 0.05);
    CHECK(c == doctest::Approx(b.kappas[k]).epsilon(1e-10));
  }
}

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2q-1") {
  for (std::size_t q : {1u, 2u, 5u, 17u, 64u}) {
    std::vector<double> x, w;
    spheroidal::gauss_legendre(q, x, w);
    for (std::size_t d = 0; d < 2 * q; ++d) {
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += w[k] * std::pow(x[k], static_cast<double>(d));
      const double exact = d % 2 ? 0.0 : 2.0 / static_cast<double>(d + 1);
      INFO("q=" << q << " degree " << d);
      CHECK(std::abs(acc - exact) <= 1e-13);
    }
  }
}

TEST_CASE("continuous basis") {
  const double beta = 10.0;
  const std::size_t N = 201;
  const auto nodes = linspace(-beta, beta, N);

  SUBCASE("zero horizon: unit phases and real functions") {
    const auto b = spheroidal::dpss(N, 0.01, 5);
    const auto cb = spheroidal::continuous_basis(b, beta, 0.0, nodes);
    CHECK((cb.phases.array() - Complex{1.0, 0.0}).abs().maxCoeff() == 0.0);
    CHECK(cb.phi_tilde.imag().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("orthonormal in the uniform-weight inner product") {
    const double T = 2.0;
    const auto b = spheroidal::dpss(N, spheroidal::bandwidth_for(T, beta, N));
    const auto cb = spheroidal::continuous_basis(b, beta, T, nodes);
    const CMatrix G = cb.d_omega * cb.phi_tilde.adjoint() * cb.phi_tilde;
    CHECK((G - CMatrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(cb.lambdas[0] == doctest::Approx(2.0 * kPi * b.kappas[0]));
    CHECK(cb.c == doctest::Approx(10.0));
    CHECK_THROWS_AS(spheroidal::continuous_basis(b, beta, 1.0, nodes), ParameterError);
  }
}

TEST_CASE("invalid arguments") {
  CHECK_THROWS_AS(spheroidal::sinc_matrix(1, 0.1), ParameterError);
  CHECK_THROWS_AS(spheroidal::sinc_matrix(8, 0.5), ParameterError);
  CHECK_THROWS_AS(spheroidal::dpss(8, 0.0), ParameterError);
  CHECK_THROWS_AS(spheroidal::dpss(8, 0.2, 9), ParameterError);
  // nothing below 1e-14 survives the default floor
  CHECK_THROWS_AS(spheroidal::dpss(32, 0.1, 30), NumericalError);
}
