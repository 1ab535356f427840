#include "ensctl/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ensctl/families.hpp"
#include "ensctl/model.hpp"

namespace ensctl::oscillator {

namespace {

constexpr int kMaxHalvings = 18;
constexpr Complex kI{0.0, 1.0};

void check_profile(const HarmonicSpec& spec, const ComplexProfile& p, const char* what) {
  if (static_cast<std::size_t>(p.size()) != spec.N)
    throw ShapeError(std::string(what) + " must hold one value per frequency node");
  if (!p.allFinite()) throw NumericalError(std::string(what) + " has non-finite entries");
}

// Integrals of e^{-i theta x} and x e^{-i theta x} over [0, 1].
void segment_moments(double theta, Complex& e0, Complex& e1) {
  if (std::abs(theta) < 0.1) {
    Complex term{1.0, 0.0};  // (-i theta)^k / k!
    e0 = 0.0;
    e1 = 0.0;
    for (int k = 0; k < 12; ++k) {
      e0 += term / static_cast<double>(k + 1);
      e1 += term / static_cast<double>(k + 2);
      term *= Complex{0.0, -theta} / static_cast<double>(k + 1);
    }
    return;
  }
  const Complex ex = std::polar(1.0, -theta);
  e0 = (1.0 - ex) / (kI * theta);
  e1 = kI * ex / theta + (ex - 1.0) / (theta * theta);
}

// Advances p through one grid interval with k RK4 steps.
Complex rk4_interval(Complex p, double omega, double ta, double tb, Complex aa, Complex ab, int k) {
  const Complex iw{0.0, omega};
  const double kd = static_cast<double>(k);
  for (int q = 0; q < k; ++q) {
    const double t0 = q == 0 ? ta : ta + (tb - ta) * q / kd;
    const double t1 = q + 1 == k ? tb : ta + (tb - ta) * (q + 1) / kd;
    const double h = t1 - t0;
    const Complex f0 = aa + (ab - aa) * (q / kd);
    const Complex fm = aa + (ab - aa) * ((q + 0.5) / kd);
    const Complex f1 = aa + (ab - aa) * ((q + 1) / kd);
    const Complex k1 = iw * p + f0;
    const Complex k2 = iw * (p + 0.5 * h * k1) + fm;
    const Complex k3 = iw * (p + 0.5 * h * k2) + fm;
    const Complex k4 = iw * (p + h * k3) + f1;
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p;
}

std::vector<Complex> rk4_run(std::span<const double> times, const CVector& alpha, Complex p0, double omega, int k) {
  std::vector<Complex> out;
  out.reserve(times.size());
  Complex p = p0;
  out.push_back(p);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    p = rk4_interval(p, omega, times[i], times[i + 1], alpha[static_cast<Eigen::Index>(i)],
                     alpha[static_cast<Eigen::Index>(i + 1)], k);
    out.push_back(p);
  }
  return out;
}

// Refines until the endpoint settles to step_tol; returns the whole path.
std::vector<Complex> converged_run(std::span<const double> times, const CVector& alpha, Complex p0, double omega,
                                   double step_tol, int& substeps) {
  int k = 1;
  auto prev = rk4_run(times, alpha, p0, omega, k);
  double diff = 0.0;
  for (int level = 1; level <= kMaxHalvings; ++level) {
    k *= 2;
    auto cur = rk4_run(times, alpha, p0, omega, k);
    diff = std::abs(cur.back() - prev.back());
    prev = std::move(cur);
    if (diff < step_tol) {
      substeps = k;
      return prev;
    }
  }
  std::ostringstream msg;
  msg << "step halving did not reach step_tol=" << step_tol << " at omega=" << omega << " (last change " << diff
      << ")";
  throw ToleranceNotMet(msg.str());
}

CVector alpha_samples(const HarmonicSpec& spec, const ControlSignal& alpha) {
  if (alpha.channels() != 1) throw ShapeError("alpha must be a single complex channel");
  if (alpha.size() != spec.time_nodes) throw ShapeError("alpha must be sampled on the spec's time nodes");
  alpha.validate();
  return alpha.samples.col(0);
}

}  // namespace

double HarmonicSpec::W() const { return spheroidal::bandwidth_for(T, beta(), N); }

std::vector<double> HarmonicSpec::frequencies() const { return linspace(omega1, omega2, N); }

std::vector<double> HarmonicSpec::symmetric_frequencies() const { return linspace(-beta(), beta(), N); }

std::vector<double> HarmonicSpec::times() const { return linspace(0.0, T, time_nodes); }

void HarmonicSpec::validate() const {
  if (!(omega1 < omega2)) throw ParameterError("frequency band needs omega1 < omega2");
  if (!(T > 0.0)) throw ParameterError("horizon T must be positive");
  if (N < 2 || time_nodes < 2) throw ParameterError("need at least two frequency and two time nodes");
  if (!(W() < 0.5)) throw ParameterError("too few frequency nodes: W = T beta / (2 pi (N-1)) must stay below 1/2");
  if (!(eps >= 0.0)) throw ParameterError("eps must be non-negative");
  if (!(step_tol > 0.0)) throw ParameterError("step_tol must be positive");
}

std::pair<RVector, RVector> to_symmetric_frame(double omega_tilde, std::span<const double> times, const RVector& u,
                                               const RVector& v) {
  if (static_cast<std::size_t>(u.size()) != times.size() || u.size() != v.size())
    throw ShapeError("u and v must be sampled on the same time nodes");
  RVector ut(u.size()), vt(v.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double c = std::cos(omega_tilde * times[static_cast<std::size_t>(i)]);
    const double s = std::sin(omega_tilde * times[static_cast<std::size_t>(i)]);
    ut[i] = u[i] * c + v[i] * s;
    vt[i] = -u[i] * s + v[i] * c;
  }
  return {ut, vt};
}

std::pair<RVector, RVector> from_symmetric_frame(double omega_tilde, std::span<const double> times, const RVector& u,
                                                 const RVector& v) {
  return to_symmetric_frame(-omega_tilde, times, u, v);
}

ComplexProfile offset(const HarmonicSpec& spec, const ComplexProfile& p0, const ComplexProfile& pF) {
  check_profile(spec, p0, "initial profile");
  check_profile(spec, pF, "target profile");
  const auto w = spec.frequencies();
  ComplexProfile xi(p0.size());
  for (Eigen::Index j = 0; j < xi.size(); ++j)
    xi[j] = std::polar(1.0, -w[static_cast<std::size_t>(j)] * spec.T) * pF[j] - p0[j];
  return xi;
}

Complex segment_transform(std::span<const double> times, const CVector& alpha, double omega) {
  if (static_cast<std::size_t>(alpha.size()) != times.size()) throw ShapeError("alpha length must match its time nodes");
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double h = times[i + 1] - times[i];
    Complex e0, e1;
    segment_moments(omega * h, e0, e1);
    const Complex a = alpha[static_cast<Eigen::Index>(i)];
    const Complex b = alpha[static_cast<Eigen::Index>(i + 1)];
    acc += std::polar(h, -omega * times[i]) * (a * (e0 - e1) + b * e1);
  }
  return acc;
}

ComplexProfile predict_final(const HarmonicSpec& spec, const CVector& alpha, const ComplexProfile& p0) {
  check_profile(spec, p0, "initial profile");
  const auto w = spec.frequencies();
  const auto t = spec.times();
  ComplexProfile out(p0.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    const double om = w[static_cast<std::size_t>(j)];
    out[j] = std::polar(1.0, om * spec.T) * (p0[j] + segment_transform(t, alpha, om));
  }
  return out;
}

spheroidal::ContinuousBasis harmonic_basis(const HarmonicSpec& spec) {
  spec.validate();
  const auto basis = spheroidal::dpss(spec.N, spec.W(), 0, spheroidal::DpssMethod::commuting_tridiagonal,
                                      spec.kappa_floor);
  const auto nu = spec.symmetric_frequencies();
  return spheroidal::continuous_basis(basis, spec.beta(), spec.T, nu);
}

AlphaSynthesis synthesize_alpha(const HarmonicSpec& spec, const ComplexProfile& p0, const ComplexProfile& pF,
                                std::optional<std::size_t> modes) {
  spec.validate();
  AlphaSynthesis out;
  out.xi = offset(spec, p0, pF);
  const auto basis = harmonic_basis(spec);
  if (modes && *modes > basis.count()) throw ParameterError("more modes requested than the basis holds");
  out.lambdas = basis.lambdas;

  const double dw = basis.d_omega;
  auto norm = [dw](const CVector& f) { return std::sqrt(dw * f.squaredNorm()); };

  CVector remainder = out.xi;
  CVector g = CVector::Zero(out.xi.size());
  std::vector<Complex> coeffs;
  double energy = 0.0;
  double residual = norm(remainder);
  const std::size_t limit = modes ? *modes : basis.count();
  bool reached = !modes && residual <= spec.eps;
  for (std::size_t k = 0; k < limit && !reached; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const Complex c = dw * basis.phi_tilde.col(col).dot(out.xi);
    coeffs.push_back(c);
    g += (c / basis.lambdas[col]) * basis.phi_tilde.col(col);
    remainder -= c * basis.phi_tilde.col(col);
    energy += std::norm(c) / basis.lambdas[col];
    residual = norm(remainder);
    out.residual_by_modes.push_back(residual);
    out.energy_by_modes.push_back(energy);
    if (!modes && residual <= spec.eps) reached = true;
  }
  out.modes_used = coeffs.size();
  out.reached = modes ? residual <= spec.eps : reached;
  out.achieved_residual = residual;
  out.coefficients = Eigen::Map<const CVector>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));

  // alpha~(t) = int e^{i nu t} g(nu) d nu, then alpha = e^{i w~ t} alpha~.
  const auto t = spec.times();
  const auto& nu = basis.freq_nodes;
  const double wt = spec.omega_tilde();
  CRowMatrix samples(static_cast<Eigen::Index>(t.size()), 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < nu.size(); ++j) acc += std::polar(dw, nu[j] * t[i]) * g[static_cast<Eigen::Index>(j)];
    samples(static_cast<Eigen::Index>(i), 0) = std::polar(1.0, wt * t[i]) * acc;
  }
  out.alpha = ControlSignal(t, std::move(samples));
  out.predicted_final = predict_final(spec, out.alpha.samples.col(0), p0);
  out.residual_per_omega = (out.predicted_final - pF).cwiseAbs();
  return out;
}

SimulationCheck verify_by_simulation(const HarmonicSpec& spec, const ControlSignal& alpha, const ComplexProfile& p0,
                                     const ComplexProfile& pF) {
  spec.validate();
  check_profile(spec, p0, "initial profile");
  check_profile(spec, pF, "target profile");
  const CVector a = alpha_samples(spec, alpha);
  const auto w = spec.frequencies();
  SimulationCheck out;
  out.final_states.resize(p0.size());
  for (Eigen::Index j = 0; j < p0.size(); ++j) {
    int k = 1;
    const auto path = converged_run(alpha.times, a, p0[j], w[static_cast<std::size_t>(j)], spec.step_tol, k);
    out.final_states[j] = path.back();
    out.substeps = std::max(out.substeps, k);
  }
  out.deviation = (out.final_states - pF).cwiseAbs();
  out.max_deviation = out.deviation.maxCoeff();
  return out;
}

CVector trajectory(const HarmonicSpec& spec, const ControlSignal& alpha, Complex p0, double omega) {
  const CVector a = alpha_samples(spec, alpha);
  int k = 1;
  const auto path = converged_run(alpha.times, a, p0, omega, spec.step_tol, k);
  return Eigen::Map<const CVector>(path.data(), static_cast<Eigen::Index>(path.size()));
}

double WitnessReport::relative() const {
  const double m = std::max(max_x_tilde, max_y_tilde);
  return scale > 0.0 ? m / scale : m;
}

WitnessReport noncontrollability_witness(const HarmonicSpec& spec, const RVector& u) {
  spec.validate();
  if (std::abs(spec.omega1 + spec.omega2) > 1e-12 * spec.beta())
    throw ParameterError("the witness needs a frequency band symmetric about zero");
  if (static_cast<std::size_t>(u.size()) != spec.time_nodes) throw ShapeError("u must be sampled on the time nodes");
  const auto sys = families::harmonic_u_only(spec.omega1, spec.omega2, spec.T);
  model::Grid grid;
  grid.time_nodes = spec.times();
  grid.time_weights = trapezoid_weights(grid.time_nodes);
  grid.param_nodes = spec.frequencies();
  // Mirror the lower half so that the grid is symmetric bit for bit.
  for (std::size_t j = 0; j < spec.N / 2; ++j) grid.param_nodes[spec.N - 1 - j] = -grid.param_nodes[j];
  if (spec.N % 2 == 1) grid.param_nodes[spec.N / 2] = 0.0;
  grid.param_weights = trapezoid_weights(grid.param_nodes);

  const ControlSignal control(grid.time_nodes, CRowMatrix(u.cast<Complex>()));
  const ParamProfile x0(grid.param_nodes, 2);
  const auto traj = model::simulate_ensemble(sys, grid, x0, control, spec.step_tol);

  WitnessReport rep;
  for (std::size_t j = 0; j < spec.N; ++j) {
    const std::size_t mirror = spec.N - 1 - j;
    for (std::size_t i = 0; i < grid.nt(); ++i) {
      const CVector& a = traj.at(j, i);
      const CVector& b = traj.at(mirror, i);
      rep.max_x_tilde = std::max(rep.max_x_tilde, std::abs(a[0] - b[0]));
      rep.max_y_tilde = std::max(rep.max_y_tilde, std::abs(a[1] + b[1]));
      rep.scale = std::max({rep.scale, std::abs(a[0]), std::abs(a[1])});
    }
  }
  return rep;
}

linop::DiscreteOperator harmonic_operator(const HarmonicSpec& spec) {
  spec.validate();
  model::Grid grid;
  grid.time_nodes = spec.times();
  grid.time_weights = trapezoid_weights(grid.time_nodes);
  grid.param_nodes = spec.symmetric_frequencies();
  grid.param_weights = trapezoid_weights(grid.param_nodes);
  return linop::assemble_kernel(grid, 1, 1, [](double w, double t) {
    return CMatrix::Constant(1, 1, std::polar(1.0, -w * t));
  });
}

}  // namespace ensctl::oscillator
