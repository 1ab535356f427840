#include "ensctl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ensctl/oscillator.hpp"

namespace ensctl::qp {

namespace {

double sinc_ratio(double beta, double d) { return d == 0.0 ? beta : std::sin(beta * d) / d; }

double value(const RMatrix& M, const RVector& c, const RVector& x) { return x.dot(M * x) + 2.0 * c.dot(x); }

RVector clamp(const RVector& x, double bound) { return x.cwiseMax(-bound).cwiseMin(bound); }

double kkt(const RVector& x, const RVector& g, double bound) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v;
    if (x[i] >= bound)
      v = std::max(0.0, g[i]);
    else if (x[i] <= -bound)
      v = std::max(0.0, -g[i]);
    else
      v = std::abs(g[i]);
    worst = std::max(worst, v);
  }
  return worst;
}

template <unsigned Digits>
bool cholesky_pivots(const QpProblem& prob, double& min_log10) {
  using Real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>>;
  const auto n = static_cast<Eigen::Index>(prob.size());
  const Real T(prob.T);
  const Real beta(prob.beta);
  std::vector<Real> t(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = T * i / (n - 1);
  std::vector<Real> a(static_cast<std::size_t>(n * n));
  auto at = [&](Eigen::Index i, Eigen::Index j) -> Real& { return a[static_cast<std::size_t>(i * n + j)]; };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Real d = t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(j)];
      at(i, j) = i == j ? beta : Real(sin(beta * d) / d);
    }
  // Rounding floor for the pivots: a few hundred ulps of the largest entry.
  const Real floor = pow(Real(10), -static_cast<int>(Digits) + 6) * beta * n;
  Real min_pivot = beta;
  for (Eigen::Index k = 0; k < n; ++k) {
    Real pivot = at(k, k);
    for (Eigen::Index j = 0; j < k; ++j) pivot -= at(k, j) * at(k, j);
    if (!(pivot > floor)) return false;
    min_pivot = std::min(min_pivot, pivot);
    const Real root = sqrt(pivot);
    at(k, k) = root;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      Real s = at(i, k);
      for (Eigen::Index j = 0; j < k; ++j) s -= at(i, j) * at(k, j);
      at(i, k) = s / root;
    }
  }
  min_log10 = static_cast<double>(log10(min_pivot));
  return true;
}

}  // namespace

RMatrix QpProblem::objective_matrix() const {
  if (weighting == Weighting::literal) return H;
  return weights.asDiagonal() * H * weights.asDiagonal();
}

RVector QpProblem::objective_vector() const {
  if (weighting == Weighting::literal) return Q;
  return weights.cwiseProduct(Q);
}

QpProblem build_qp(double T, std::size_t n, double beta, double bound, Weighting weighting) {
  if (n < 2) throw ParameterError("the sampled problem needs n >= 2");
  if (!(T > 0.0)) throw ParameterError("horizon T must be positive");
  if (!(beta > 0.0) || !(bound > 0.0)) throw ParameterError("beta and the amplitude bound must be positive");
  QpProblem p;
  p.T = T;
  p.beta = beta;
  p.bound = bound;
  p.weighting = weighting;
  p.times = linspace(0.0, T, n);
  p.dt = T / static_cast<double>(n - 1);
  p.weights = Eigen::Map<const RVector>(trapezoid_weights(p.times).data(), static_cast<Eigen::Index>(n));
  const auto m = static_cast<Eigen::Index>(n);
  p.H.resize(m, m);
  p.Q.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    p.Q[i] = sinc_ratio(beta, p.times[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m; ++j)
      p.H(i, j) = sinc_ratio(beta, p.times[static_cast<std::size_t>(i)] - p.times[static_cast<std::size_t>(j)]);
  }
  return p;
}

QpProblem make_qp(RMatrix H, RVector Q, double bound) {
  if (H.rows() != H.cols() || H.rows() != Q.size() || Q.size() == 0) throw ShapeError("H must be n x n and Q length n");
  if (!(bound > 0.0)) throw ParameterError("amplitude bound must be positive");
  if (!H.isApprox(H.transpose(), 1e-14)) throw ParameterError("H must be symmetric");
  QpProblem p;
  p.bound = bound;
  p.weighting = Weighting::literal;
  p.H = std::move(H);
  p.Q = std::move(Q);
  p.weights = RVector::Ones(p.Q.size());
  return p;
}

std::size_t reproduction_samples(double T, double max_step) {
  if (!(T > 0.0) || !(max_step > 0.0)) throw ParameterError("T and max_step must be positive");
  return std::max<std::size_t>(51, static_cast<std::size_t>(std::ceil(T / max_step)) + 1);
}

double power_iteration(const RMatrix& M, std::size_t max_iterations, double rel_tol) {
  if (M.rows() == 0) return 0.0;
  RVector v = RVector::Ones(M.rows()).normalized();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    RVector w = M * v;
    const double next = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

QpSolution solve_box_qp(const QpProblem& prob, const SolverOptions& opts, const std::optional<RVector>& start) {
  const RMatrix M = prob.objective_matrix();
  const RVector c = prob.objective_vector();
  const auto n = M.rows();
  const double b = prob.bound;

  Eigen::SelfAdjointEigenSolver<RMatrix> eig(M, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || lmin < -opts.pd_tol * lmax) {
    std::ostringstream msg;
    msg << "objective matrix is not positive definite: lambda_min=" << lmin << ", lambda_max=" << lmax
        << ", ratio=" << lmin / lmax;
    throw NumericalError(msg.str());
  }

  QpSolution sol;
  // Power iteration approaches lambda_max from below; a small margin keeps 1/L a descent step.
  sol.lipschitz = 1.001 * power_iteration(M);
  const double L = sol.lipschitz;

  RVector x = start ? clamp(*start, b) : RVector::Zero(n);
  if (x.size() != n) throw ShapeError("start vector has the wrong length");
  double f = value(M, c, x);
  if (opts.keep_history) sol.history.push_back(f);
  RVector g = M * x + c;

  auto accept = [&](RVector&& next) {
    const double fn = value(M, c, next);
    if (fn > f) return false;  // rounding can make a tiny step look uphill
    x = std::move(next);
    f = fn;
    g = M * x + c;
    if (opts.keep_history) sol.history.push_back(f);
    return true;
  };
  auto pg_step = [&] { accept(clamp(x - g / L, b)); };

  // fixed[i]: 0 free, +1 or -1 held at that bound.
  std::vector<int> fixed(static_cast<std::size_t>(n), 0);
  auto pin_from_gradient = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& s = fixed[static_cast<std::size_t>(i)];
      s = (x[i] >= b && g[i] <= 0.0) ? 1 : (x[i] <= -b && g[i] >= 0.0) ? -1 : 0;
    }
  };

  bool at_minimizer = false;
  std::size_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    sol.projected_gradient = (x - clamp(x - g, b)).cwiseAbs().maxCoeff();
    if (sol.projected_gradient <= opts.tol) {
      sol.converged = true;
      break;
    }
    if (opts.warmup == 0 || it < opts.warmup) {
      pg_step();
      if (it + 1 == opts.warmup) pin_from_gradient();
      continue;
    }

    // Active-set phase: minimize over the free variables with the rest held.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (fixed[static_cast<std::size_t>(i)] == 0) free.push_back(i);
    const auto k = static_cast<Eigen::Index>(free.size());
    RVector d = RVector::Zero(k);
    if (k > 0) {
      RMatrix mff(k, k);
      RVector rhs(k);
      for (Eigen::Index p = 0; p < k; ++p) {
        rhs[p] = -g[free[static_cast<std::size_t>(p)]];
        for (Eigen::Index q = 0; q < k; ++q)
          mff(p, q) = M(free[static_cast<std::size_t>(p)], free[static_cast<std::size_t>(q)]);
      }
      Eigen::CompleteOrthogonalDecomposition<RMatrix> cod;
      cod.setThreshold(1e-13);
      cod.compute(mff);
      d = cod.solve(rhs);
      if (!d.allFinite()) d.setZero();
    }
    const bool moves = !at_minimizer && k > 0 && d.cwiseAbs().maxCoeff() > 1e-14 * b && d.dot(-RVector(g(free))) > 0.0;
    if (moves) {
      double alpha = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index p = 0; p < k; ++p) {
        const double xi = x[free[static_cast<std::size_t>(p)]];
        double room = alpha;
        if (d[p] > 0.0) room = (b - xi) / d[p];
        if (d[p] < 0.0) room = (-b - xi) / d[p];
        if (room < alpha) {
          alpha = std::max(room, 0.0);
          blocking = p;
        }
      }
      RVector next = x;
      for (Eigen::Index p = 0; p < k; ++p) {
        const Eigen::Index i = free[static_cast<std::size_t>(p)];
        next[i] = std::clamp(x[i] + alpha * d[p], -b, b);
      }
      if (blocking >= 0) {
        const Eigen::Index i = free[static_cast<std::size_t>(blocking)];
        next[i] = d[blocking] > 0.0 ? b : -b;
        fixed[static_cast<std::size_t>(i)] = d[blocking] > 0.0 ? 1 : -1;
      }
      if (!accept(std::move(next))) {
        pg_step();
        pin_from_gradient();
      }
      // A full step lands on the minimizer over the current free set.
      at_minimizer = blocking < 0;
      continue;
    }

    // Stationary on the free set: release the bound whose multiplier has the wrong sign.
    Eigen::Index worst = -1;
    double violation = opts.tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = fixed[static_cast<std::size_t>(i)];
      const double v = s > 0 ? g[i] : s < 0 ? -g[i] : 0.0;
      if (v > violation) {
        violation = v;
        worst = i;
      }
    }
    at_minimizer = false;
    if (worst >= 0) {
      fixed[static_cast<std::size_t>(worst)] = 0;
      continue;
    }
    // Nothing to release yet not optimal: the remaining gradient lives in
    // directions of negligible curvature. A gradient step handles those.
    pg_step();
    pin_from_gradient();
  }

  sol.x = x;
  sol.iterations = it;
  sol.objective = f;
  sol.literal_objective = value(prob.H, prob.Q, x);
  sol.continuous_cost = prob.times.empty() ? 0.0 : continuous_cost(prob, x);
  sol.kkt_residual = kkt(x, g, b);
  sol.projected_gradient = (x - clamp(x - g, b)).cwiseAbs().maxCoeff();
  return sol;
}

double continuous_cost(const QpProblem& prob, const RVector& x) {
  if (prob.times.empty()) throw ParameterError("continuous cost needs a time grid");
  const RVector wx = prob.weights.cwiseProduct(x);
  return 2.0 * wx.dot(prob.H * wx) + 4.0 * wx.dot(prob.Q) + 2.0 * prob.beta;
}

RVector evaluate_final_distance(const QpProblem& prob, const RVector& x, std::span<const double> omega_nodes) {
  if (static_cast<std::size_t>(x.size()) != prob.times.size()) throw ShapeError("x must be sampled on the problem's times");
  const CVector alpha = x.cast<Complex>();
  RVector out(static_cast<Eigen::Index>(omega_nodes.size()));
  for (std::size_t j = 0; j < omega_nodes.size(); ++j)
    out[static_cast<Eigen::Index>(j)] = std::abs(1.0 + oscillator::segment_transform(prob.times, alpha, omega_nodes[j]));
  return out;
}

double imaginary_cross_term(const QpProblem& prob, const RVector& x, double omega) {
  const RVector wx = prob.weights.cwiseProduct(x);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < wx.size(); ++i)
    for (Eigen::Index j = 0; j < wx.size(); ++j)
      acc += wx[i] * wx[j] * std::sin(omega * (prob.times[static_cast<std::size_t>(i)] - prob.times[static_cast<std::size_t>(j)]));
  return acc;
}

DefinitenessReport certify_positive_definite(const QpProblem& prob) {
  if (prob.times.size() < 2) throw ParameterError("certification needs a problem built on a time grid");
  DefinitenessReport rep;
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(prob.H, Eigen::EigenvaluesOnly);
  rep.lambda_min_double = eig.eigenvalues().minCoeff();
  rep.lambda_max_double = eig.eigenvalues().maxCoeff();
  double lg = 0.0;
  if (cholesky_pivots<100>(prob, lg)) {
    rep.digits = 100;
  } else if (cholesky_pivots<250>(prob, lg)) {
    rep.digits = 250;
  } else if (cholesky_pivots<600>(prob, lg)) {
    rep.digits = 600;
  } else {
    return rep;
  }
  rep.certified = true;
  rep.min_pivot_log10 = lg;
  return rep;
}

}  // namespace ensctl::qp
