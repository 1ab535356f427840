#pragma once

#include <span>
#include <vector>

#include "ensctl/common.hpp"

namespace ensctl::spheroidal {

/// A(t,t') = sin(2 pi W (t - t')) / (pi (t - t')), diagonal 2W.
RMatrix sinc_matrix(std::size_t N, double W);

enum class DpssMethod {
  // Eigenvectors from the tridiagonal matrix that commutes with the sinc
  // matrix; eigenvalues from the in-band energy of each sequence. Resolves
  // concentrations far below machine epsilon.
  commuting_tridiagonal,
  // Dense symmetric eigensolve of sinc_matrix. Eigenvalues below ~1e-15
  // are rounding noise.
  dense,
};

inline constexpr double kDefaultKappaFloor = 1e-14;

struct SpheroidalBasis {
  std::size_t N = 0;
  double W = 0.0;
  RMatrix sequences;  // N x k, unit Euclidean norm columns
  RVector kappas;     // strictly decreasing, in (0, 1)
  DpssMethod method = DpssMethod::commuting_tridiagonal;

  std::size_t count() const { return static_cast<std::size_t>(kappas.size()); }
};

/// The k_max leading sequences. k_max = 0 keeps every eigenvalue above
/// kappa_floor. Each sequence is signed so that its mean is positive, or,
/// for antisymmetric sequences, its first entry above 1e-12 in magnitude.
SpheroidalBasis dpss(std::size_t N, double W, std::size_t k_max = 0,
                     DpssMethod method = DpssMethod::commuting_tridiagonal,
                     double kappa_floor = kDefaultKappaFloor);

/// int_{-W}^{W} |sum_t v_t e^{-2 pi i f t}|^2 df by Gauss-Legendre.
double band_concentration(std::span<const double> v, double W);

/// All N eigenvalues of sinc_matrix in decreasing order (dense solver).
RVector sinc_eigenvalues(std::size_t N, double W);

/// Half-bandwidth matching a frequency grid of N nodes on [-beta, beta] and
/// horizon T: W = T beta / (2 pi (N - 1)).
double bandwidth_for(double T, double beta, std::size_t N);

// The sequences laid onto the frequency grid omega_j = -beta + 2 beta j / (N-1)
// with phase e^{-i omega T/2}, normalized in the uniform-weight inner product
// sum_j d_omega conj(f_j) g_j.
struct ContinuousBasis {
  std::vector<double> freq_nodes;
  double d_omega = 0.0;
  double beta = 0.0;
  double T = 0.0;
  double c = 0.0;       // beta T / 2
  CVector phases;       // e^{-i omega_j T/2}
  CMatrix phi_tilde;    // N x k
  RVector lambdas;      // 2 pi kappa_n

  std::size_t count() const { return static_cast<std::size_t>(lambdas.size()); }
};

ContinuousBasis continuous_basis(const SpheroidalBasis& basis, double beta, double T,
                                 std::span<const double> freq_nodes);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(std::size_t q, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace ensctl::spheroidal
