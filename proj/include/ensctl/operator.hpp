#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ensctl/common.hpp"
#include "ensctl/model.hpp"
#include "ensctl/signal.hpp"

namespace ensctl::linop {

// Trapezoid discretization of (Lu)(s) = int_0^T Phi(0,t;s) B(t,s) u(t) dt.
// H has rows (s_j, component) and columns (t_i, channel), both node-major.
// K = D_s^{1/2} H D_t^{1/2} is the matrix whose plain SVD gives the singular
// system of L in the weighted L2 inner products.
struct DiscreteOperator {
  model::Grid grid;
  std::size_t n = 0;
  std::size_t m = 0;
  CMatrix kernel;
  CMatrix weighted;
  RVector param_weights;  // one entry per row of H
  RVector time_weights;   // one entry per column of H

  CMatrix block(std::size_t j, std::size_t i) const;
};

using KernelFn = std::function<CMatrix(double s, double t)>;

/// Kernel blocks h(s_j, t_i) = Phi(0, t_i; s_j) B(t_i, s_j).
DiscreteOperator assemble(const model::SystemSpec& spec, const model::Grid& grid,
                          const model::TransitionTensor& transitions);

/// Same layout from a closed-form n x m kernel h(s, t).
DiscreteOperator assemble_kernel(const model::Grid& grid, std::size_t n, std::size_t m, const KernelFn& h);

/// Trapezoid quadrature of Lu at every parameter node.
ParamProfile apply(const DiscreteOperator& op, const ControlSignal& u);
CVector apply_flat(const DiscreteOperator& op, const CVector& u);

/// L*f = H^dagger D_s f, the adjoint in the weighted inner products.
ControlSignal apply_adjoint(const DiscreteOperator& op, const ParamProfile& f);
CVector apply_adjoint_flat(const DiscreteOperator& op, const CVector& f);

/// sum_k w_k conj(a_k) b_k
Complex weighted_inner(const RVector& w, const CVector& a, const CVector& b);
double weighted_norm(const RVector& w, const CVector& a);

inline constexpr double kDefaultRankTol = 1e-12;

struct SingularSystem {
  std::vector<double> time_nodes;
  std::vector<double> param_nodes;
  std::size_t n = 0;
  std::size_t m = 0;
  RVector time_weights;   // length nt*m
  RVector param_weights;  // length ns*n
  RVector sigmas;         // retained, non-increasing
  CMatrix mu;             // columns: time-domain functions, flat
  CMatrix nu;             // columns: parameter-domain functions, flat
  double rank_tol = kDefaultRankTol;
  double sigma_max = 0.0;
  std::size_t full_rank = 0;  // number of singular values computed before truncation

  std::size_t rank() const { return static_cast<std::size_t>(sigmas.size()); }
};

/// SVD of K, un-embedded by the square-root weights and truncated at
/// sigma_1 * rank_tol. Each pair is rotated so that the largest-magnitude
/// entry of nu_n is real and positive.
SingularSystem singular_system(const DiscreteOperator& op, double rank_tol = kDefaultRankTol);

/// xi(s_j) = Phi(0,T;s_j) xF(s_j) - x0(s_j)
ParamProfile target_offset(const model::TransitionTensor& transitions, const ParamProfile& x0,
                           const ParamProfile& xF);

struct PicardThresholds {
  double residual = 1e-3;        // range residual at or below this: condition (ii) holds at this resolution
  double decay_exponent = 1.0;   // |c_n| ~ sigma_n^p with p above this: condition (i) plausible
  double coefficient_floor = 1e-13;  // relative; smaller coefficients are left out of the fit
};

struct PicardReport {
  std::vector<Complex> coefficients;  // c_n = <nu_n, xi>
  std::vector<double> partial_sums;   // sum_{k<=n} |c_k|^2 / sigma_k^2
  std::vector<double> residuals;      // ||xi - sum_{k<=n} c_k nu_k|| / ||xi||
  double xi_norm = 0.0;
  double range_residual = 0.0;
  double decay_exponent = 0.0;
  std::size_t fit_points = 0;
  bool range_condition = false;
  bool summability_condition = false;
  PicardThresholds thresholds;
};

PicardReport picard_diagnostic(const SingularSystem& sing, const ParamProfile& xi,
                               const PicardThresholds& thresholds = {});

struct SynthesisResult {
  ControlSignal control;
  std::size_t modes_used = 0;
  double achieved_residual = 0.0;  // ||xi - L u_N||, weighted, measured through the projection
  bool reached = false;
  std::vector<double> residual_by_modes;
  std::vector<double> norm_by_modes;
  CVector coefficients;  // c_n / sigma_n for n < modes_used
};

/// Truncated minimum-norm control u_N = sum (c_n / sigma_n) mu_n with the
/// smallest N whose residual is at most eps. If no retained N gets there the
/// full retained rank is used and reached is false.
SynthesisResult synthesize_min_norm(const SingularSystem& sing, const ParamProfile& xi, double eps);

/// Same expansion with a fixed number of modes.
SynthesisResult synthesize_modes(const SingularSystem& sing, const ParamProfile& xi, std::size_t modes);

struct IllPosednessReport {
  std::size_t mode = 0;
  double amplitude = 0.0;
  double sigma = 0.0;
  double xi_perturbation_norm = 0.0;
  double control_perturbation_norm = 0.0;
  double amplification = 0.0;   // 1 / sigma_n
  double measured_ratio = 0.0;  // control / target perturbation norms, NaN when a == 0
};

/// Perturbs xi by a sqrt(sigma_n) nu_n (mode is zero-based), re-synthesizes
/// with every retained mode and measures both perturbation norms.
IllPosednessReport illposedness_demo(const SingularSystem& sing, const ParamProfile& xi, std::size_t mode,
                                     double amplitude);

/// Final states X(T, s_j) = Phi(T,0) (x0 + int Psi B u) with u piecewise
/// linear, the integral taken by composite Simpson on each grid interval
/// split into 2*refine pieces. This is what the operator model predicts a
/// simulation will reach, free of the trapezoid rule's O(h^2) bias.
ParamProfile predict_final_states(const model::SystemSpec& spec, const model::Grid& grid, const ParamProfile& x0,
                                  const ControlSignal& u, double step_tol, int refine = 4);

}  // namespace ensctl::linop
