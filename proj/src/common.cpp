#include "ensctl/common.hpp"
#include "ensctl/signal.hpp"

#include <algorithm>
#include <cmath>

namespace ensctl {

std::vector<double> linspace(double a, double b, std::size_t count) {
  if (count < 2) throw ParameterError("linspace needs at least two nodes");
  std::vector<double> out(count);
  const double h = (b - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = a + h * static_cast<double>(i);
  out.back() = b;
  return out;
}

std::vector<double> trapezoid_weights(std::span<const double> nodes) {
  if (nodes.size() < 2) throw ParameterError("trapezoid rule needs at least two nodes");
  std::vector<double> w(nodes.size(), 0.0);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double h = nodes[i + 1] - nodes[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

ControlSignal::ControlSignal(std::vector<double> t, std::size_t channels)
    : times(std::move(t)),
      samples(CRowMatrix::Zero(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(channels))) {}

ControlSignal::ControlSignal(std::vector<double> t, CRowMatrix values) : times(std::move(t)), samples(std::move(values)) {
  validate();
}

CVector ControlSignal::value(double t) const {
  const auto& ts = times;
  if (t <= ts.front()) return samples.row(0).transpose();
  if (t >= ts.back()) return samples.row(samples.rows() - 1).transpose();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const auto i = static_cast<Eigen::Index>(std::distance(ts.begin(), it) - 1);
  const double frac = (t - ts[i]) / (ts[i + 1] - ts[i]);
  return ((1.0 - frac) * samples.row(i) + frac * samples.row(i + 1)).transpose();
}

CVector ControlSignal::flat() const {
  return Eigen::Map<const CVector>(samples.data(), samples.size());
}

ControlSignal ControlSignal::from_flat(std::vector<double> t, std::size_t channels, const CVector& flat) {
  if (static_cast<std::size_t>(flat.size()) != t.size() * channels)
    throw ShapeError("control vector length does not match time nodes x channels");
  CRowMatrix values = Eigen::Map<const CRowMatrix>(flat.data(), static_cast<Eigen::Index>(t.size()),
                                                   static_cast<Eigen::Index>(channels));
  return ControlSignal(std::move(t), std::move(values));
}

void ControlSignal::validate() const {
  if (static_cast<std::size_t>(samples.rows()) != times.size())
    throw ShapeError("control sample count does not match its time nodes");
  if (samples.cols() < 1) throw ShapeError("control needs at least one channel");
  if (!samples.allFinite()) throw NumericalError("control contains non-finite samples");
}

ParamProfile::ParamProfile(std::vector<double> s, std::size_t components)
    : params(std::move(s)),
      values(CRowMatrix::Zero(static_cast<Eigen::Index>(params.size()), static_cast<Eigen::Index>(components))) {}

ParamProfile::ParamProfile(std::vector<double> s, CRowMatrix v) : params(std::move(s)), values(std::move(v)) {
  validate();
}

CVector ParamProfile::flat() const {
  return Eigen::Map<const CVector>(values.data(), values.size());
}

ParamProfile ParamProfile::from_flat(std::vector<double> s, std::size_t components, const CVector& flat) {
  if (static_cast<std::size_t>(flat.size()) != s.size() * components)
    throw ShapeError("profile vector length does not match nodes x components");
  CRowMatrix v = Eigen::Map<const CRowMatrix>(flat.data(), static_cast<Eigen::Index>(s.size()),
                                              static_cast<Eigen::Index>(components));
  return ParamProfile(std::move(s), std::move(v));
}

ParamProfile ParamProfile::constant(std::vector<double> s, const CVector& value) {
  ParamProfile p(std::move(s), static_cast<std::size_t>(value.size()));
  for (Eigen::Index j = 0; j < p.values.rows(); ++j) p.values.row(j) = value.transpose();
  return p;
}

void ParamProfile::validate() const {
  if (static_cast<std::size_t>(values.rows()) != params.size())
    throw ShapeError("profile row count does not match its parameter nodes");
  if (!values.allFinite()) throw NumericalError("profile contains non-finite values");
}

}  // namespace ensctl
