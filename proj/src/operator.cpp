#include "ensctl/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

namespace ensctl::linop {

namespace {

RVector expand_weights(const std::vector<double>& w, std::size_t per_node) {
  RVector out(static_cast<Eigen::Index>(w.size() * per_node));
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t c = 0; c < per_node; ++c) out[static_cast<Eigen::Index>(k * per_node + c)] = w[k];
  return out;
}

void finish(DiscreteOperator& op) {
  op.param_weights = expand_weights(op.grid.param_weights, op.n);
  op.time_weights = expand_weights(op.grid.time_weights, op.m);
  op.weighted = op.param_weights.cwiseSqrt().asDiagonal() * op.kernel * op.time_weights.cwiseSqrt().asDiagonal();
  if (!op.weighted.allFinite()) throw NumericalError("discretized operator has non-finite entries");
}

void check_profile(const SingularSystem& sing, const ParamProfile& xi) {
  if (xi.size() != sing.param_nodes.size() || xi.components() != sing.n)
    throw ShapeError("target profile does not match the singular system's parameter grid");
}

}  // namespace

CMatrix DiscreteOperator::block(std::size_t j, std::size_t i) const {
  return kernel.block(static_cast<Eigen::Index>(j * n), static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(m));
}

DiscreteOperator assemble(const model::SystemSpec& spec, const model::Grid& grid,
                          const model::TransitionTensor& transitions) {
  grid.validate_for(spec);
  if (transitions.nt != grid.nt() || transitions.ns != grid.ns() ||
      transitions.n != static_cast<std::size_t>(spec.n))
    throw ShapeError("transition tensor was not computed on this grid");
  DiscreteOperator op;
  op.grid = grid;
  op.n = static_cast<std::size_t>(spec.n);
  op.m = static_cast<std::size_t>(spec.m);
  op.kernel.resize(static_cast<Eigen::Index>(grid.ns() * op.n), static_cast<Eigen::Index>(grid.nt() * op.m));
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    const double s = grid.param_nodes[j];
    for (std::size_t i = 0; i < grid.nt(); ++i) {
      const double t = grid.time_nodes[i];
      const CMatrix b = spec.B(t, s);
      if (b.rows() != spec.n || b.cols() != spec.m) throw ShapeError("B(t,s) has the wrong shape");
      op.kernel.block(static_cast<Eigen::Index>(j * op.n), static_cast<Eigen::Index>(i * op.m), spec.n, spec.m) =
          transitions.inverse_at(j, i) * b;
    }
  }
  finish(op);
  return op;
}

DiscreteOperator assemble_kernel(const model::Grid& grid, std::size_t n, std::size_t m, const KernelFn& h) {
  grid.validate();
  if (n == 0 || m == 0) throw ParameterError("kernel dimensions must be positive");
  DiscreteOperator op;
  op.grid = grid;
  op.n = n;
  op.m = m;
  op.kernel.resize(static_cast<Eigen::Index>(grid.ns() * n), static_cast<Eigen::Index>(grid.nt() * m));
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    for (std::size_t i = 0; i < grid.nt(); ++i) {
      const CMatrix b = h(grid.param_nodes[j], grid.time_nodes[i]);
      if (static_cast<std::size_t>(b.rows()) != n || static_cast<std::size_t>(b.cols()) != m)
        throw ShapeError("kernel returned a block of the wrong shape");
      op.kernel.block(static_cast<Eigen::Index>(j * n), static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(m)) = b;
    }
  }
  finish(op);
  return op;
}

CVector apply_flat(const DiscreteOperator& op, const CVector& u) {
  if (u.size() != op.kernel.cols()) throw ShapeError("control length does not match the operator");
  return op.kernel * (op.time_weights.cast<Complex>().cwiseProduct(u));
}

ParamProfile apply(const DiscreteOperator& op, const ControlSignal& u) {
  if (u.size() != op.grid.nt() || u.channels() != op.m) throw ShapeError("control is not sampled on the operator grid");
  return ParamProfile::from_flat(op.grid.param_nodes, op.n, apply_flat(op, u.flat()));
}

CVector apply_adjoint_flat(const DiscreteOperator& op, const CVector& f) {
  if (f.size() != op.kernel.rows()) throw ShapeError("profile length does not match the operator");
  return op.kernel.adjoint() * (op.param_weights.cast<Complex>().cwiseProduct(f));
}

ControlSignal apply_adjoint(const DiscreteOperator& op, const ParamProfile& f) {
  if (f.size() != op.grid.ns() || f.components() != op.n)
    throw ShapeError("profile is not sampled on the operator grid");
  return ControlSignal::from_flat(op.grid.time_nodes, op.m, apply_adjoint_flat(op, f.flat()));
}

Complex weighted_inner(const RVector& w, const CVector& a, const CVector& b) {
  if (w.size() != a.size() || a.size() != b.size()) throw ShapeError("inner product operands differ in length");
  Complex acc{0.0, 0.0};
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += w[k] * std::conj(a[k]) * b[k];
  return acc;
}

double weighted_norm(const RVector& w, const CVector& a) {
  if (w.size() != a.size()) throw ShapeError("norm operand differs in length from its weights");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += w[k] * std::norm(a[k]);
  return std::sqrt(acc);
}

SingularSystem singular_system(const DiscreteOperator& op, double rank_tol) {
  if (!(rank_tol >= 0.0) || rank_tol >= 1.0) throw ParameterError("rank_tol must lie in [0, 1)");
  Eigen::BDCSVD<CMatrix> svd(op.weighted, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD of the discretized operator failed");
  const RVector& sv = svd.singularValues();
  if (!sv.allFinite()) throw NumericalError("SVD returned non-finite singular values");

  SingularSystem out;
  out.time_nodes = op.grid.time_nodes;
  out.param_nodes = op.grid.param_nodes;
  out.n = op.n;
  out.m = op.m;
  out.time_weights = op.time_weights;
  out.param_weights = op.param_weights;
  out.rank_tol = rank_tol;
  out.full_rank = static_cast<std::size_t>(sv.size());
  out.sigma_max = sv.size() > 0 ? sv[0] : 0.0;

  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > out.sigma_max * rank_tol && sv[rank] > 0.0) ++rank;

  out.sigmas = sv.head(rank);
  const RVector inv_sqrt_t = op.time_weights.cwiseSqrt().cwiseInverse();
  const RVector inv_sqrt_s = op.param_weights.cwiseSqrt().cwiseInverse();
  out.mu = inv_sqrt_t.asDiagonal() * svd.matrixV().leftCols(rank);
  out.nu = inv_sqrt_s.asDiagonal() * svd.matrixU().leftCols(rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    Eigen::Index where = 0;
    svd.matrixU().col(k).cwiseAbs().maxCoeff(&where);
    const Complex pivot = out.nu(where, k);
    const Complex phase = std::abs(pivot) > 0.0 ? std::conj(pivot) / std::abs(pivot) : Complex{1.0, 0.0};
    out.nu.col(k) *= phase;
    out.mu.col(k) *= phase;
  }
  return out;
}

ParamProfile target_offset(const model::TransitionTensor& transitions, const ParamProfile& x0,
                           const ParamProfile& xF) {
  if (x0.size() != transitions.ns || xF.size() != transitions.ns)
    throw ShapeError("profiles must have one entry per parameter node");
  if (x0.components() != transitions.n || xF.components() != transitions.n)
    throw ShapeError("profiles must hold n-vectors");
  ParamProfile xi(x0.params, transitions.n);
  const std::size_t last = transitions.nt - 1;
  for (std::size_t j = 0; j < transitions.ns; ++j)
    xi.values.row(static_cast<Eigen::Index>(j)) = (transitions.inverse_at(j, last) * xF.at(j) - x0.at(j)).transpose();
  xi.validate();
  return xi;
}

PicardReport picard_diagnostic(const SingularSystem& sing, const ParamProfile& xi, const PicardThresholds& thresholds) {
  check_profile(sing, xi);
  PicardReport report;
  report.thresholds = thresholds;
  const CVector f = xi.flat();
  report.xi_norm = weighted_norm(sing.param_weights, f);
  const double scale = report.xi_norm > 0.0 ? report.xi_norm : 1.0;

  CVector remainder = f;
  double partial = 0.0;
  for (std::size_t k = 0; k < sing.rank(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const Complex c = weighted_inner(sing.param_weights, sing.nu.col(col), f);
    report.coefficients.push_back(c);
    partial += std::norm(c) / (sing.sigmas[col] * sing.sigmas[col]);
    report.partial_sums.push_back(partial);
    remainder -= c * sing.nu.col(col);
    report.residuals.push_back(weighted_norm(sing.param_weights, remainder) / scale);
  }
  report.range_residual = report.residuals.empty() ? (report.xi_norm > 0.0 ? 1.0 : 0.0) : report.residuals.back();
  if (report.xi_norm == 0.0) report.range_residual = 0.0;

  // Least-squares slope of log|c_n| against log sigma_n.
  double cmax = 0.0;
  for (const auto& c : report.coefficients) cmax = std::max(cmax, std::abs(c));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < report.coefficients.size(); ++k) {
    const double a = std::abs(report.coefficients[k]);
    if (!(a > thresholds.coefficient_floor * cmax) || a == 0.0) continue;
    const double x = std::log(sing.sigmas[static_cast<Eigen::Index>(k)]);
    const double y = std::log(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  report.fit_points = count;
  const double denom = static_cast<double>(count) * sxx - sx * sx;
  report.decay_exponent =
      count >= 2 && denom > 0.0 ? (static_cast<double>(count) * sxy - sx * sy) / denom
                                : std::numeric_limits<double>::quiet_NaN();
  report.range_condition = report.range_residual <= thresholds.residual;
  report.summability_condition = std::isfinite(report.decay_exponent) && report.decay_exponent > thresholds.decay_exponent;
  return report;
}

namespace {

SynthesisResult expand(const SingularSystem& sing, const ParamProfile& xi, std::size_t max_modes, double eps,
                       bool stop_at_eps) {
  check_profile(sing, xi);
  const CVector f = xi.flat();
  SynthesisResult out;
  CVector remainder = f;
  CVector u = CVector::Zero(sing.mu.rows());
  std::vector<Complex> ratios;
  double energy = 0.0;
  double residual = weighted_norm(sing.param_weights, f);
  std::size_t used = 0;
  bool reached = residual <= eps;
  if (!(stop_at_eps && reached)) {
    for (std::size_t k = 0; k < max_modes; ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const Complex c = weighted_inner(sing.param_weights, sing.nu.col(col), f);
      const Complex r = c / sing.sigmas[col];
      ratios.push_back(r);
      u += r * sing.mu.col(col);
      remainder -= c * sing.nu.col(col);
      energy += std::norm(r);
      residual = weighted_norm(sing.param_weights, remainder);
      out.residual_by_modes.push_back(residual);
      out.norm_by_modes.push_back(std::sqrt(energy));
      used = k + 1;
      if (stop_at_eps && residual <= eps) {
        reached = true;
        break;
      }
    }
  }
  if (!stop_at_eps) reached = residual <= eps;
  out.modes_used = used;
  out.achieved_residual = residual;
  out.reached = reached;
  out.coefficients = Eigen::Map<const CVector>(ratios.data(), static_cast<Eigen::Index>(ratios.size()));
  out.control = ControlSignal::from_flat(sing.time_nodes, sing.m, u);
  return out;
}

}  // namespace

SynthesisResult synthesize_min_norm(const SingularSystem& sing, const ParamProfile& xi, double eps) {
  if (!(eps >= 0.0)) throw ParameterError("eps must be non-negative");
  return expand(sing, xi, sing.rank(), eps, true);
}

SynthesisResult synthesize_modes(const SingularSystem& sing, const ParamProfile& xi, std::size_t modes) {
  if (modes > sing.rank()) throw ParameterError("more modes requested than the singular system retains");
  return expand(sing, xi, modes, 0.0, false);
}

IllPosednessReport illposedness_demo(const SingularSystem& sing, const ParamProfile& xi, std::size_t mode,
                                     double amplitude) {
  if (mode >= sing.rank()) throw ParameterError("mode index beyond the retained rank");
  check_profile(sing, xi);
  IllPosednessReport rep;
  rep.mode = mode;
  rep.amplitude = amplitude;
  rep.sigma = sing.sigmas[static_cast<Eigen::Index>(mode)];
  rep.amplification = 1.0 / rep.sigma;

  const CVector delta = amplitude * std::sqrt(rep.sigma) * sing.nu.col(static_cast<Eigen::Index>(mode));
  ParamProfile perturbed = ParamProfile::from_flat(xi.params, sing.n, xi.flat() + delta);
  const auto base = synthesize_modes(sing, xi, sing.rank());
  const auto moved = synthesize_modes(sing, perturbed, sing.rank());
  rep.xi_perturbation_norm = weighted_norm(sing.param_weights, delta);
  rep.control_perturbation_norm = weighted_norm(sing.time_weights, moved.control.flat() - base.control.flat());
  rep.measured_ratio = rep.xi_perturbation_norm > 0.0 ? rep.control_perturbation_norm / rep.xi_perturbation_norm
                                                      : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

ParamProfile predict_final_states(const model::SystemSpec& spec, const model::Grid& grid, const ParamProfile& x0,
                                  const ControlSignal& u, double step_tol, int refine) {
  if (refine < 1) throw ParameterError("refine must be at least 1");
  grid.validate_for(spec);
  if (u.size() != grid.nt() || u.channels() != static_cast<std::size_t>(spec.m))
    throw ShapeError("control is not sampled on the grid's time nodes with m channels");
  if (x0.size() != grid.ns() || x0.components() != static_cast<std::size_t>(spec.n))
    throw ShapeError("initial profile does not match the grid");

  const int pieces = 2 * refine;
  model::Grid fine;
  fine.param_nodes = grid.param_nodes;
  fine.param_weights = grid.param_weights;
  fine.time_nodes.reserve((grid.nt() - 1) * static_cast<std::size_t>(pieces) + 1);
  for (std::size_t i = 0; i + 1 < grid.nt(); ++i) {
    const double a = grid.time_nodes[i];
    const double b = grid.time_nodes[i + 1];
    for (int q = 0; q < pieces; ++q) fine.time_nodes.push_back(a + (b - a) * q / pieces);
  }
  fine.time_nodes.push_back(grid.time_nodes.back());
  fine.time_weights = trapezoid_weights(fine.time_nodes);
  const auto tr = model::transition_matrices(spec, fine, step_tol);

  ParamProfile out(grid.param_nodes, static_cast<std::size_t>(spec.n));
  const std::size_t last = fine.nt() - 1;
  for (std::size_t j = 0; j < grid.ns(); ++j) {
    const double s = grid.param_nodes[j];
    CVector acc = CVector::Zero(spec.n);
    for (std::size_t i = 0; i + 1 < grid.nt(); ++i) {
      const CVector ua = u.samples.row(static_cast<Eigen::Index>(i)).transpose();
      const CVector ub = u.samples.row(static_cast<Eigen::Index>(i + 1)).transpose();
      const double h = (grid.time_nodes[i + 1] - grid.time_nodes[i]) / pieces;
      for (int q = 0; q <= pieces; ++q) {
        const std::size_t idx = i * static_cast<std::size_t>(pieces) + static_cast<std::size_t>(q);
        const double frac = static_cast<double>(q) / pieces;
        const double w = (q == 0 || q == pieces) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
        const CVector val = tr.inverse_at(j, idx) * (spec.B(fine.time_nodes[idx], s) * ((1.0 - frac) * ua + frac * ub));
        acc += (w * h / 3.0) * val;
      }
    }
    out.values.row(static_cast<Eigen::Index>(j)) = (tr.at(j, last) * (x0.at(j) + acc)).transpose();
  }
  return out;
}

}  // namespace ensctl::linop
