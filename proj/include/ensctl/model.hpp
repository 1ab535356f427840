#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ensctl/common.hpp"
#include "ensctl/signal.hpp"

namespace ensctl::model {

using CoefficientFn = std::function<CMatrix(double t, double s)>;

// A family of linear time-varying systems dX/dt = A(t,s) X + B(t,s) u(t)
// over the rectangle [0,T] x [s_lo, s_hi].
struct SystemSpec {
  std::string name;
  int n = 1;
  int m = 1;
  CoefficientFn A;
  CoefficientFn B;
  double T = 1.0;
  double s_lo = 0.0;
  double s_hi = 1.0;

  /// Checks dimensions and samples A, B on a coarse lattice of the rectangle.
  void validate(int samples_per_axis = 5) const;
};

// Quadrature grid on [0,T] x [s_lo, s_hi].
struct Grid {
  std::vector<double> time_nodes;
  std::vector<double> param_nodes;
  std::vector<double> time_weights;
  std::vector<double> param_weights;

  /// Uniform nodes with trapezoid weights on both axes.
  static Grid uniform(double T, std::size_t nt, double s_lo, double s_hi, std::size_t ns);

  std::size_t nt() const { return time_nodes.size(); }
  std::size_t ns() const { return param_nodes.size(); }
  double horizon() const { return time_nodes.back(); }

  void validate() const;
  /// validate() plus containment in the spec's rectangle.
  void validate_for(const SystemSpec& spec) const;
};

// Phi(t_i, 0; s_j) and Phi(0, t_i; s_j) at every grid node.
struct TransitionTensor {
  std::size_t n = 0;
  std::size_t nt = 0;
  std::size_t ns = 0;
  std::vector<CMatrix> forward;  // index j * nt + i
  std::vector<CMatrix> inverse;  // index j * nt + i
  int substeps = 1;              // RK4 steps per grid interval at convergence (max over s)

  const CMatrix& at(std::size_t j, std::size_t i) const { return forward[j * nt + i]; }
  const CMatrix& inverse_at(std::size_t j, std::size_t i) const { return inverse[j * nt + i]; }
};

struct EnsembleTrajectory {
  std::size_t n = 0;
  std::size_t nt = 0;
  std::size_t ns = 0;
  std::vector<CVector> states;  // index j * nt + i
  int substeps = 1;

  const CVector& at(std::size_t j, std::size_t i) const { return states[j * nt + i]; }
  const CVector& final_state(std::size_t j) const { return states[j * nt + nt - 1]; }
  ParamProfile final_profile(const std::vector<double>& params) const;
};

inline constexpr int kDefaultMaxHalvings = 18;

/// Transition matrices by classical RK4 with step halving. Each grid interval
/// is split into 2^k equal RK4 steps; k grows until two successive levels
/// agree to step_tol in max norm at T. The inverse Phi(0,t;s) is integrated
/// directly from dPsi/dt = -Psi A, never formed by inversion.
TransitionTensor transition_matrices(const SystemSpec& spec, const Grid& grid, double step_tol,
                                     int max_halvings = kDefaultMaxHalvings);

/// Phi(t_to, t_from; s) by the same refinement scheme on a single span.
CMatrix propagate(const SystemSpec& spec, double s, double t_from, double t_to, double step_tol,
                  int max_halvings = kDefaultMaxHalvings);

/// Integrates dX/dt = A X + B u at every parameter node, u reconstructed
/// piecewise-linearly between time nodes. Refines like transition_matrices,
/// measuring convergence on the final state.
EnsembleTrajectory simulate_ensemble(const SystemSpec& spec, const Grid& grid, const ParamProfile& x0,
                                     const ControlSignal& u, double step_tol,
                                     int max_halvings = kDefaultMaxHalvings);

struct EigenvalueClash {
  double s_a;
  std::size_t index_a;
  double s_b;
  std::size_t index_b;
  double distance;
};

struct RepeatedEigenvalueReport {
  std::vector<double> samples;
  std::vector<CVector> eigenvalues;
  std::vector<EigenvalueClash> clashes;
  bool passes() const { return clashes.empty(); }
};

/// Freezes A at t_fixed and looks for eigenvalues closer than cluster_tol,
/// within one matrix or across samples. Only meaningful for the finite sample
/// set given; nothing is inferred about the continuum in between.
RepeatedEigenvalueReport repeated_eigenvalue_check(const SystemSpec& spec, std::span<const double> samples,
                                                   double t_fixed, double cluster_tol = 1e-9);

/// Rank of the Kalman matrix [B, AB, ..., A^{n-1}B].
int kalman_rank(const CMatrix& A, const CMatrix& B, double rel_tol = 1e-10);

}  // namespace ensctl::model
