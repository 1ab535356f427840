#include "ensctl/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ensctl::model {

namespace {

CMatrix evaluate(const CoefficientFn& fn, double t, double s, int rows, int cols, const char* which) {
  CMatrix out = fn(t, s);
  if (out.rows() != rows || out.cols() != cols) {
    std::ostringstream msg;
    msg << which << "(t,s) returned " << out.rows() << "x" << out.cols() << ", expected " << rows << "x" << cols;
    throw ShapeError(msg.str());
  }
  if (!out.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite " << which << " coefficient at t=" << t << ", s=" << s;
    throw IntegrationError(msg.str(), t, s);
  }
  return out;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Time of the q-th of k substeps inside [a, b]; endpoints reproduced exactly.
double substep_time(double a, double b, int q, int k) {
  if (q == 0) return a;
  if (q == k) return b;
  return a + (b - a) * static_cast<double>(q) / static_cast<double>(k);
}

struct TransitionPass {
  std::vector<CMatrix> forward;
  std::vector<CMatrix> inverse;
};

// Phi' = A Phi and Psi' = -Psi A, both from the identity at t = nodes[0].
TransitionPass transition_pass(const SystemSpec& spec, std::span<const double> nodes, double s, int k) {
  const int n = spec.n;
  TransitionPass pass;
  pass.forward.reserve(nodes.size());
  pass.inverse.reserve(nodes.size());
  CMatrix phi = CMatrix::Identity(n, n);
  CMatrix psi = CMatrix::Identity(n, n);
  pass.forward.push_back(phi);
  pass.inverse.push_back(psi);
  CMatrix a0 = evaluate(spec.A, nodes[0], s, n, n, "A");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double ta = nodes[i];
    const double tb = nodes[i + 1];
    for (int q = 0; q < k; ++q) {
      const double t0 = substep_time(ta, tb, q, k);
      const double t1 = substep_time(ta, tb, q + 1, k);
      const double h = t1 - t0;
      const CMatrix am = evaluate(spec.A, t0 + 0.5 * h, s, n, n, "A");
      const CMatrix a1 = evaluate(spec.A, t1, s, n, n, "A");

      const CMatrix k1 = a0 * phi;
      const CMatrix k2 = am * (phi + 0.5 * h * k1);
      const CMatrix k3 = am * (phi + 0.5 * h * k2);
      const CMatrix k4 = a1 * (phi + h * k3);
      phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      const CMatrix l1 = -psi * a0;
      const CMatrix l2 = -(psi + 0.5 * h * l1) * am;
      const CMatrix l3 = -(psi + 0.5 * h * l2) * am;
      const CMatrix l4 = -(psi + h * l3) * a1;
      psi += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);

      a0 = a1;
    }
    if (!phi.allFinite() || !psi.allFinite()) {
      std::ostringstream msg;
      msg << "transition matrix overflowed at t=" << tb << ", s=" << s;
      throw IntegrationError(msg.str(), tb, s);
    }
    pass.forward.push_back(phi);
    pass.inverse.push_back(psi);
  }
  return pass;
}

std::vector<CVector> state_pass(const SystemSpec& spec, std::span<const double> nodes, double s, const CVector& x0,
                                const ControlSignal& u, int k) {
  const int n = spec.n;
  const int m = spec.m;
  std::vector<CVector> states;
  states.reserve(nodes.size());
  CVector x = x0;
  states.push_back(x);
  CMatrix a0 = evaluate(spec.A, nodes[0], s, n, n, "A");
  CMatrix b0 = evaluate(spec.B, nodes[0], s, n, m, "B");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double ta = nodes[i];
    const double tb = nodes[i + 1];
    const CVector ua = u.samples.row(static_cast<Eigen::Index>(i)).transpose();
    const CVector ub = u.samples.row(static_cast<Eigen::Index>(i + 1)).transpose();
    auto control_at = [&](double frac) -> CVector { return (1.0 - frac) * ua + frac * ub; };
    CVector f0 = b0 * control_at(0.0);
    for (int q = 0; q < k; ++q) {
      const double t0 = substep_time(ta, tb, q, k);
      const double t1 = substep_time(ta, tb, q + 1, k);
      const double h = t1 - t0;
      const double kd = static_cast<double>(k);
      const CMatrix am = evaluate(spec.A, t0 + 0.5 * h, s, n, n, "A");
      const CMatrix bm = evaluate(spec.B, t0 + 0.5 * h, s, n, m, "B");
      const CMatrix a1 = evaluate(spec.A, t1, s, n, n, "A");
      const CMatrix b1 = evaluate(spec.B, t1, s, n, m, "B");
      const CVector fm = bm * control_at((static_cast<double>(q) + 0.5) / kd);
      const CVector f1 = b1 * control_at(static_cast<double>(q + 1) / kd);

      const CVector k1 = a0 * x + f0;
      const CVector k2 = am * (x + 0.5 * h * k1) + fm;
      const CVector k3 = am * (x + 0.5 * h * k2) + fm;
      const CVector k4 = a1 * (x + h * k3) + f1;
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      a0 = a1;
      f0 = f1;
    }
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << "state overflowed at t=" << tb << ", s=" << s;
      throw IntegrationError(msg.str(), tb, s);
    }
    states.push_back(x);
  }
  return states;
}

[[noreturn]] void refinement_failed(double s, double diff, double tol) {
  std::ostringstream msg;
  msg << "step halving did not reach step_tol=" << tol << " at s=" << s << " (last change " << diff << ")";
  throw ToleranceNotMet(msg.str());
}

void check_tolerance(double step_tol) {
  if (!(step_tol > 0.0) || !std::isfinite(step_tol)) throw ParameterError("step_tol must be positive and finite");
}

}  // namespace

void SystemSpec::validate(int samples_per_axis) const {
  if (n < 1 || m < 1) throw ParameterError("state and input dimensions must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("horizon T must be positive");
  if (!(s_lo < s_hi)) throw ParameterError("parameter span must satisfy s_lo < s_hi");
  if (!A || !B) throw ParameterError("system coefficients A and B must both be set");
  const int k = std::max(samples_per_axis, 2);
  for (int a = 0; a < k; ++a) {
    const double t = T * a / (k - 1);
    for (int b = 0; b < k; ++b) {
      const double s = s_lo + (s_hi - s_lo) * b / (k - 1);
      evaluate(A, t, s, n, n, "A");
      evaluate(B, t, s, n, m, "B");
    }
  }
}

Grid Grid::uniform(double T, std::size_t nt, double s_lo, double s_hi, std::size_t ns) {
  Grid g;
  g.time_nodes = linspace(0.0, T, nt);
  g.param_nodes = linspace(s_lo, s_hi, ns);
  g.time_weights = trapezoid_weights(g.time_nodes);
  g.param_weights = trapezoid_weights(g.param_nodes);
  g.validate();
  return g;
}

void Grid::validate() const {
  auto check_axis = [](const std::vector<double>& nodes, const std::vector<double>& weights, const char* axis) {
    if (nodes.size() < 2) throw ParameterError(std::string(axis) + " grid needs at least two nodes");
    if (weights.size() != nodes.size()) throw ShapeError(std::string(axis) + " weights do not match nodes");
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
      if (!(nodes[i] < nodes[i + 1])) throw ParameterError(std::string(axis) + " nodes must be strictly increasing");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw ParameterError(std::string(axis) + " weights must be positive");
      sum += w;
    }
    const double span = nodes.back() - nodes.front();
    if (std::abs(sum - span) > 1e-12 * span)
      throw ParameterError(std::string(axis) + " weights must sum to the axis length");
  };
  check_axis(time_nodes, time_weights, "time");
  check_axis(param_nodes, param_weights, "parameter");
  if (time_nodes.front() != 0.0) throw ParameterError("time grid must start at t = 0");
}

void Grid::validate_for(const SystemSpec& spec) const {
  validate();
  if (std::abs(time_nodes.back() - spec.T) > 1e-12 * spec.T) throw ParameterError("time grid must end at T");
  const double tol = 1e-12 * (spec.s_hi - spec.s_lo);
  if (param_nodes.front() < spec.s_lo - tol || param_nodes.back() > spec.s_hi + tol)
    throw ParameterError("parameter grid leaves the system's parameter span");
}

ParamProfile EnsembleTrajectory::final_profile(const std::vector<double>& params) const {
  ParamProfile out(params, n);
  for (std::size_t j = 0; j < ns; ++j) out.values.row(static_cast<Eigen::Index>(j)) = final_state(j).transpose();
  return out;
}

TransitionTensor transition_matrices(const SystemSpec& spec, const Grid& grid, double step_tol, int max_halvings) {
  check_tolerance(step_tol);
  spec.validate(2);
  grid.validate_for(spec);
  TransitionTensor out;
  out.n = static_cast<std::size_t>(spec.n);
  out.nt = grid.nt();
  out.ns = grid.ns();
  out.forward.reserve(out.nt * out.ns);
  out.inverse.reserve(out.nt * out.ns);
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    const double s = grid.param_nodes[j];
    int k = 1;
    TransitionPass prev = transition_pass(spec, grid.time_nodes, s, k);
    double diff = 0.0;
    bool converged = false;
    for (int level = 1; level <= max_halvings; ++level) {
      k *= 2;
      TransitionPass cur = transition_pass(spec, grid.time_nodes, s, k);
      diff = std::max(max_abs_diff(cur.forward.back(), prev.forward.back()),
                      max_abs_diff(cur.inverse.back(), prev.inverse.back()));
      prev = std::move(cur);
      if (diff < step_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) refinement_failed(s, diff, step_tol);
    out.substeps = std::max(out.substeps, k);
    for (auto& mtx : prev.forward) out.forward.push_back(std::move(mtx));
    for (auto& mtx : prev.inverse) out.inverse.push_back(std::move(mtx));
  }
  return out;
}

CMatrix propagate(const SystemSpec& spec, double s, double t_from, double t_to, double step_tol, int max_halvings) {
  check_tolerance(step_tol);
  if (t_from == t_to) return CMatrix::Identity(spec.n, spec.n);
  const std::array<double, 2> span{t_from, t_to};
  if (t_to < t_from) throw ParameterError("propagate integrates forward in time only");
  int k = 1;
  CMatrix prev = transition_pass(spec, span, s, k).forward.back();
  double diff = 0.0;
  for (int level = 1; level <= max_halvings; ++level) {
    k *= 2;
    CMatrix cur = transition_pass(spec, span, s, k).forward.back();
    diff = max_abs_diff(cur, prev);
    prev = std::move(cur);
    if (diff < step_tol) return prev;
  }
  refinement_failed(s, diff, step_tol);
}

EnsembleTrajectory simulate_ensemble(const SystemSpec& spec, const Grid& grid, const ParamProfile& x0,
                                     const ControlSignal& u, double step_tol, int max_halvings) {
  check_tolerance(step_tol);
  spec.validate(2);
  grid.validate_for(spec);
  if (x0.size() != grid.ns() || x0.components() != static_cast<std::size_t>(spec.n))
    throw ShapeError("initial profile must hold one n-vector per parameter node");
  if (u.channels() != static_cast<std::size_t>(spec.m))
    throw ShapeError("control has " + std::to_string(u.channels()) + " channels, system expects " +
                     std::to_string(spec.m));
  if (u.size() != grid.nt()) throw ShapeError("control must be sampled on the grid's time nodes");
  for (std::size_t i = 0; i < u.size(); ++i)
    if (std::abs(u.times[i] - grid.time_nodes[i]) > 1e-12 * std::max(1.0, grid.horizon()))
      throw ShapeError("control time nodes differ from the grid's time nodes");
  u.validate();

  EnsembleTrajectory out;
  out.n = static_cast<std::size_t>(spec.n);
  out.nt = grid.nt();
  out.ns = grid.ns();
  out.states.reserve(out.nt * out.ns);
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    const double s = grid.param_nodes[j];
    const CVector start = x0.at(j);
    int k = 1;
    std::vector<CVector> prev = state_pass(spec, grid.time_nodes, s, start, u, k);
    double diff = 0.0;
    bool converged = false;
    for (int level = 1; level <= max_halvings; ++level) {
      k *= 2;
      std::vector<CVector> cur = state_pass(spec, grid.time_nodes, s, start, u, k);
      diff = (cur.back() - prev.back()).cwiseAbs().maxCoeff();
      prev = std::move(cur);
      if (diff < step_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) refinement_failed(s, diff, step_tol);
    out.substeps = std::max(out.substeps, k);
    // The first slice is the supplied profile, bit for bit.
    prev.front() = start;
    for (auto& x : prev) out.states.push_back(std::move(x));
  }
  return out;
}

RepeatedEigenvalueReport repeated_eigenvalue_check(const SystemSpec& spec, std::span<const double> samples,
                                                   double t_fixed, double cluster_tol) {
  if (!(cluster_tol >= 0.0)) throw ParameterError("cluster tolerance must be non-negative");
  RepeatedEigenvalueReport report;
  report.samples.assign(samples.begin(), samples.end());
  for (double s : samples) {
    const CMatrix a = evaluate(spec.A, t_fixed, s, spec.n, spec.n, "A");
    Eigen::ComplexEigenSolver<CMatrix> solver(a, false);
    if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
      std::ostringstream msg;
      msg << "eigenvalue solver failed for A at s=" << s;
      throw NumericalError(msg.str());
    }
    report.eigenvalues.push_back(solver.eigenvalues());
  }
  const std::size_t count = report.samples.size();
  for (std::size_t a = 0; a < count; ++a) {
    const CVector& ea = report.eigenvalues[a];
    for (Eigen::Index p = 0; p < ea.size(); ++p) {
      for (std::size_t b = a; b < count; ++b) {
        const CVector& eb = report.eigenvalues[b];
        for (Eigen::Index q = (b == a ? p + 1 : 0); q < eb.size(); ++q) {
          const double d = std::abs(ea[p] - eb[q]);
          if (d <= cluster_tol)
            report.clashes.push_back({report.samples[a], static_cast<std::size_t>(p), report.samples[b],
                                      static_cast<std::size_t>(q), d});
        }
      }
    }
  }
  return report;
}

int kalman_rank(const CMatrix& A, const CMatrix& B, double rel_tol) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw ShapeError("Kalman rank needs A n x n and B n x m");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  CMatrix kalman(n, n * m);
  CMatrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    kalman.middleCols(k * m, m) = block;
    block = A * block;
  }
  Eigen::JacobiSVD<CMatrix> svd(kalman);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_tol * sv[0]) ++rank;
  return rank;
}

}  // namespace ensctl::model
