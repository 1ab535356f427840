#include "ensctl/spheroidal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace ensctl::spheroidal {

namespace {

constexpr double kPi = std::numbers::pi;

void check_band(std::size_t N, double W) {
  if (N < 2) throw ParameterError("sequence length N must be at least 2");
  if (!(W > 0.0 && W < 0.5)) {
    std::ostringstream msg;
    msg << "half-bandwidth W=" << W << " violates 0 < W < 1/2";
    throw ParameterError(msg.str());
  }
}

void fix_sign(Eigen::Ref<RVector> v) {
  const double mean = v.mean();
  if (std::abs(mean) >= 1e-12) {
    if (mean < 0.0) v = -v;
    return;
  }
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > 1e-12) {
      if (v[k] < 0.0) v = -v;
      return;
    }
  }
}

// 2 * int_{lo}^{hi} |V(f)|^2 df for real v, V the centred transform.
double band_energy(std::span<const double> v, double lo, double hi) {
  const double N = static_cast<double>(v.size());
  const double centre = 0.5 * (N - 1.0);
  const auto q = static_cast<std::size_t>(std::ceil(2.0 * kPi * (N - 1.0) * (hi - lo))) + 32;
  std::vector<double> x, w;
  gauss_legendre(q, x, w);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double acc = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    const double f = mid + half * x[k];
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
      const double arg = 2.0 * kPi * f * (static_cast<double>(t) - centre);
      re += v[t] * std::cos(arg);
      im += v[t] * std::sin(arg);
    }
    acc += w[k] * (re * re + im * im);
  }
  return 2.0 * half * acc;
}

}  // namespace

void gauss_legendre(std::size_t q, std::vector<double>& nodes, std::vector<double>& weights) {
  if (q == 0) throw ParameterError("Gauss-Legendre needs at least one node");
  nodes.assign(q, 0.0);
  weights.assign(q, 0.0);
  const std::size_t half = (q + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(q) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= q; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(q) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= q; ++k) {
      const double kk = static_cast<double>(k);
      const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
      p0 = p1;
      p1 = p2;
    }
    dp = static_cast<double>(q) * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = -x;
    nodes[q - 1 - i] = x;
    weights[i] = weights[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

RMatrix sinc_matrix(std::size_t N, double W) {
  check_band(N, W);
  const auto n = static_cast<Eigen::Index>(N);
  RMatrix A(n, n);
  for (Eigen::Index d = 0; d < n; ++d) {
    const double val = d == 0 ? 2.0 * W : std::sin(2.0 * kPi * W * static_cast<double>(d)) / (kPi * static_cast<double>(d));
    for (Eigen::Index i = 0; i + d < n; ++i) {
      A(i, i + d) = val;
      A(i + d, i) = val;
    }
  }
  return A;
}

double band_concentration(std::span<const double> v, double W) {
  if (!(W > 0.0 && W <= 0.5)) throw ParameterError("band edge must lie in (0, 1/2]");
  return band_energy(v, 0.0, W);
}

RVector sinc_eigenvalues(std::size_t N, double W) {
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(sinc_matrix(N, W), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed on the sinc matrix");
  return solver.eigenvalues().reverse();
}

double bandwidth_for(double T, double beta, std::size_t N) {
  if (N < 2) throw ParameterError("need at least two frequency nodes");
  return T * beta / (2.0 * kPi * static_cast<double>(N - 1));
}

SpheroidalBasis dpss(std::size_t N, double W, std::size_t k_max, DpssMethod method, double kappa_floor) {
  check_band(N, W);
  if (k_max > N) throw ParameterError("k_max cannot exceed N");
  if (!(kappa_floor >= 0.0)) throw ParameterError("kappa_floor must be non-negative");
  const auto n = static_cast<Eigen::Index>(N);
  const std::size_t limit = k_max == 0 ? N : k_max;

  SpheroidalBasis out;
  out.N = N;
  out.W = W;
  out.method = method;
  std::vector<double> kappas;
  std::vector<RVector> vecs;

  if (method == DpssMethod::dense) {
    Eigen::SelfAdjointEigenSolver<RMatrix> solver(sinc_matrix(N, W));
    if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed on the sinc matrix");
    for (std::size_t k = 0; k < limit; ++k) {
      const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(k);
      const double kappa = solver.eigenvalues()[col];
      if (!(kappa > kappa_floor)) break;
      kappas.push_back(kappa);
      vecs.emplace_back(solver.eigenvectors().col(col));
    }
  } else {
    RVector diag(n), sub(n - 1);
    const double cw = std::cos(2.0 * kPi * W);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double a = 0.5 * (static_cast<double>(N) - 1.0 - 2.0 * static_cast<double>(t));
      diag[t] = a * a * cw;
    }
    for (Eigen::Index t = 1; t < n; ++t) sub[t - 1] = 0.5 * static_cast<double>(t) * static_cast<double>(n - t);
    Eigen::SelfAdjointEigenSolver<RMatrix> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolver failed");
    const RMatrix A = sinc_matrix(N, W);
    for (std::size_t k = 0; k < limit; ++k) {
      const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(k);
      RVector v = solver.eigenvectors().col(col);
      v.normalize();
      double kappa = v.dot(A * v);
      const std::span<const double> view(v.data(), N);
      if (kappa < 1e-6) {
        kappa = band_energy(view, 0.0, W);
      } else if (1.0 - kappa < 1e-6) {
        kappa = 1.0 - band_energy(view, W, 0.5);
      }
      if (!(kappa > kappa_floor)) break;
      // Past the integration noise floor the values stop decreasing.
      if (kappa < 1e-6 && !kappas.empty() && !(kappa < kappas.back())) break;
      kappas.push_back(kappa);
      vecs.push_back(std::move(v));
    }
  }

  if (k_max != 0 && kappas.size() < k_max) {
    std::ostringstream msg;
    msg << "only " << kappas.size() << " eigenvalues above kappa_floor=" << kappa_floor << " for N=" << N
        << ", W=" << W << "; " << k_max << " requested";
    throw NumericalError(msg.str());
  }
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    if (!(kappas[k] > 0.0 && kappas[k] < 1.0) || (k > 0 && !(kappas[k] < kappas[k - 1]))) {
      std::ostringstream msg;
      msg << "concentration " << k << " (" << kappas[k]
          << ") breaks strict ordering in (0,1); N*W is too large for double precision";
      throw NumericalError(msg.str());
    }
  }

  out.sequences.resize(n, static_cast<Eigen::Index>(kappas.size()));
  out.kappas.resize(static_cast<Eigen::Index>(kappas.size()));
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    out.sequences.col(col) = vecs[k];
    fix_sign(out.sequences.col(col));
    out.kappas[col] = kappas[k];
  }
  return out;
}

ContinuousBasis continuous_basis(const SpheroidalBasis& basis, double beta, double T,
                                 std::span<const double> freq_nodes) {
  if (!(beta > 0.0)) throw ParameterError("beta must be positive");
  if (!(T >= 0.0)) throw ParameterError("horizon T must be non-negative");
  if (freq_nodes.size() != basis.N) throw ShapeError("frequency grid length must equal the sequence length N");
  const std::size_t N = basis.N;
  const double d_omega = 2.0 * beta / static_cast<double>(N - 1);
  for (std::size_t j = 0; j < N; ++j) {
    const double expect = -beta + d_omega * static_cast<double>(j);
    if (std::abs(freq_nodes[j] - expect) > 1e-9 * beta)
      throw ParameterError("frequency nodes must be uniform on [-beta, beta]");
  }
  if (T > 0.0) {
    const double W = bandwidth_for(T, beta, N);
    if (!(W < 0.5)) throw ParameterError("W = T beta / (2 pi (N-1)) must stay below 1/2");
    if (std::abs(W - basis.W) > 1e-12 * W) throw ParameterError("basis was built for a different W than T, beta, N imply");
  }

  ContinuousBasis out;
  out.freq_nodes.assign(freq_nodes.begin(), freq_nodes.end());
  out.d_omega = d_omega;
  out.beta = beta;
  out.T = T;
  out.c = 0.5 * beta * T;
  const auto n = static_cast<Eigen::Index>(N);
  out.phases.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) out.phases[j] = std::polar(1.0, -freq_nodes[static_cast<std::size_t>(j)] * T / 2.0);
  out.phi_tilde = out.phases.asDiagonal() * basis.sequences.cast<Complex>() / std::sqrt(d_omega);
  out.lambdas = 2.0 * kPi * basis.kappas;
  return out;
}

}  // namespace ensctl::spheroidal
