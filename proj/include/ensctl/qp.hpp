#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ensctl/common.hpp"

namespace ensctl::qp {

// How the sampled control enters the objective x^T M x + 2 x^T c.
enum class Weighting {
  literal,    // M = H, c = Q
  trapezoid,  // M = D H D, c = D Q with D the trapezoid weights: a quadrature of the continuous cost
};

// Sampled form of the amplitude-constrained harmonic steering problem.
struct QpProblem {
  double T = 0.0;
  double beta = 1.0;
  double bound = 1.0;
  double dt = 0.0;
  std::vector<double> times;
  RMatrix H;  // sin(beta (t_i - t_j)) / (t_i - t_j), diagonal beta
  RVector Q;  // sin(beta t_i) / t_i, beta at t = 0
  RVector weights;  // trapezoid weights on times
  Weighting weighting = Weighting::trapezoid;

  std::size_t size() const { return static_cast<std::size_t>(Q.size()); }
  RMatrix objective_matrix() const;
  RVector objective_vector() const;
};

QpProblem build_qp(double T, std::size_t n, double beta = 1.0, double bound = 1.0,
                   Weighting weighting = Weighting::trapezoid);

/// A problem from explicit matrices (weighting literal, no time grid).
QpProblem make_qp(RMatrix H, RVector Q, double bound);

/// Samples used for the horizon-T reproduction: at least 51, spacing at most max_step.
std::size_t reproduction_samples(double T, double max_step = 0.1);

struct SolverOptions {
  double tol = 1e-12;             // infinity norm of the projected gradient
  std::size_t max_iterations = 200000;
  std::size_t warmup = 50;        // gradient steps before the active-set phase; 0: gradient steps only
  double pd_tol = 1e-10;          // refuse when lambda_min < -pd_tol * lambda_max
  bool keep_history = true;
};

struct QpSolution {
  RVector x;
  double objective = 0.0;          // x^T M x + 2 x^T c
  double literal_objective = 0.0;  // x^T H x + 2 x^T Q
  double continuous_cost = 0.0;
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
  double projected_gradient = 0.0;
  bool converged = false;
  double lipschitz = 0.0;
  std::vector<double> history;  // objective after every accepted step
};

/// Projected gradient with step 1/L (L the power-iteration estimate of
/// lambda_max(M)) for a warm start, then a primal active-set phase: exact
/// minimization over the free variables, one bound added or released per
/// step. Every accepted step lowers the objective.
QpSolution solve_box_qp(const QpProblem& prob, const SolverOptions& opts = {},
                        const std::optional<RVector>& start = std::nullopt);

/// 2 x^T D H D x + 4 x^T D Q + 2 beta, D the trapezoid weights.
double continuous_cost(const QpProblem& prob, const RVector& x);

/// |p(T, w)| from p(0) = 1 under u = x (piecewise linear), v = 0.
RVector evaluate_final_distance(const QpProblem& prob, const RVector& x, std::span<const double> omega_nodes);

/// x^T S x with S_ij = w_i w_j sin(w (t_i - t_j)), the imaginary part of the
/// double integral at one frequency.
double imaginary_cross_term(const QpProblem& prob, const RVector& x, double omega);

/// Largest eigenvalue by power iteration.
double power_iteration(const RMatrix& M, std::size_t max_iterations = 10000, double rel_tol = 1e-13);

struct DefinitenessReport {
  bool certified = false;
  unsigned digits = 0;             // working precision of the certifying run
  double min_pivot_log10 = 0.0;    // smallest Cholesky pivot of H
  double lambda_min_double = 0.0;  // float64 eigensolver, for comparison
  double lambda_max_double = 0.0;
};

/// Cholesky of H in extended precision; every pivot positive and clear of
/// the rounding floor certifies positive definiteness of the sampled matrix.
DefinitenessReport certify_positive_definite(const QpProblem& prob);

}  // namespace ensctl::qp
