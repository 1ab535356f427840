#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ensctl/common.hpp"
#include "ensctl/operator.hpp"
#include "ensctl/signal.hpp"
#include "ensctl/spheroidal.hpp"

namespace ensctl::oscillator {

// Harmonic ensemble dp/dt = i w p + alpha, w in [omega1, omega2].
struct HarmonicSpec {
  double omega1 = -10.0;
  double omega2 = 10.0;
  double T = 1.0;
  std::size_t N = 1001;           // frequency nodes
  std::size_t time_nodes = 1001;  // samples of alpha on [0, T]
  double eps = 5e-8;              // projection residual target, uniform-weight L2 on the band
  double kappa_floor = 1e-24;
  double step_tol = 1e-10;

  double beta() const { return 0.5 * (omega2 - omega1); }
  double omega_tilde() const { return 0.5 * (omega1 + omega2); }
  double W() const;
  std::vector<double> frequencies() const;            // lab frame
  std::vector<double> symmetric_frequencies() const;  // shifted onto [-beta, beta]
  std::vector<double> times() const;
  void validate() const;
};

/// One complex value per frequency node.
using ComplexProfile = CVector;

/// u~ = u cos(w~ t) + v sin(w~ t), v~ = -u sin(w~ t) + v cos(w~ t).
std::pair<RVector, RVector> to_symmetric_frame(double omega_tilde, std::span<const double> times, const RVector& u,
                                               const RVector& v);
std::pair<RVector, RVector> from_symmetric_frame(double omega_tilde, std::span<const double> times, const RVector& u,
                                                 const RVector& v);

/// xi(w) = e^{-i w T} pF(w) - p0(w); identical in both frames.
ComplexProfile offset(const HarmonicSpec& spec, const ComplexProfile& p0, const ComplexProfile& pF);

/// int_0^T e^{-i w t} alpha(t) dt for piecewise-linear alpha, exact on every segment.
Complex segment_transform(std::span<const double> times, const CVector& alpha, double omega);

/// p(T, w) = e^{i w T} (p0 + int e^{-i w t} alpha) at every lab frequency.
ComplexProfile predict_final(const HarmonicSpec& spec, const CVector& alpha, const ComplexProfile& p0);

struct AlphaSynthesis {
  ControlSignal alpha;  // lab frame, one complex channel
  std::size_t modes_used = 0;
  bool reached = false;
  double achieved_residual = 0.0;  // ||xi - sum c_n phi_n||, uniform weights
  std::vector<double> residual_by_modes;
  std::vector<double> energy_by_modes;  // int |alpha_N|^2 dt
  CVector coefficients;                 // c_n = <phi_n, xi>
  RVector lambdas;
  ComplexProfile xi;
  ComplexProfile predicted_final;       // p(T, w) by exact integration of alpha
  RVector residual_per_omega;           // |predicted_final - pF|
};

/// Minimum-energy alpha_N from the phase-twisted DPSS basis. N is the
/// smallest count with projection residual <= spec.eps unless modes is given.
AlphaSynthesis synthesize_alpha(const HarmonicSpec& spec, const ComplexProfile& p0, const ComplexProfile& pF,
                                std::optional<std::size_t> modes = std::nullopt);

/// Basis used by synthesize_alpha.
spheroidal::ContinuousBasis harmonic_basis(const HarmonicSpec& spec);

struct SimulationCheck {
  ComplexProfile final_states;
  RVector deviation;  // |p(T, w) - pF(w)|
  double max_deviation = 0.0;
  int substeps = 1;
};

/// RK4 on the complex scalar ODE at every lab frequency with step halving,
/// alpha piecewise linear between samples.
SimulationCheck verify_by_simulation(const HarmonicSpec& spec, const ControlSignal& alpha, const ComplexProfile& p0,
                                     const ComplexProfile& pF);

/// p(t_i, w) at every time node for one frequency.
CVector trajectory(const HarmonicSpec& spec, const ControlSignal& alpha, Complex p0, double omega);

struct WitnessReport {
  double max_x_tilde = 0.0;  // max |x(t,w) - x(t,-w)|
  double max_y_tilde = 0.0;  // max |y(t,w) + y(t,-w)|
  double scale = 0.0;        // max |x|, |y| over the run
  double relative() const;
};

/// Drives the ensemble from the origin with alpha = u (real), v = 0, on a
/// frequency grid symmetric about zero.
WitnessReport noncontrollability_witness(const HarmonicSpec& spec, const RVector& u);

/// Trapezoid discretization of the kernel e^{-i w t} on the symmetric band.
linop::DiscreteOperator harmonic_operator(const HarmonicSpec& spec);

}  // namespace ensctl::oscillator
