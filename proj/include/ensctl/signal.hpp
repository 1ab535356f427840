#pragma once

#include <vector>

#include "ensctl/common.hpp"

namespace ensctl {

// A sampled control u(t): one row per time node, one column per input channel.
struct ControlSignal {
  std::vector<double> times;
  CRowMatrix samples;  // nt x m

  ControlSignal() = default;
  ControlSignal(std::vector<double> t, std::size_t channels);
  ControlSignal(std::vector<double> t, CRowMatrix values);

  std::size_t size() const { return times.size(); }
  std::size_t channels() const { return static_cast<std::size_t>(samples.cols()); }

  /// Piecewise-linear reconstruction at an arbitrary time inside the node span.
  CVector value(double t) const;

  /// Time-major flattening (t_i, channel) matching the column order of the
  /// discretized operator.
  CVector flat() const;
  static ControlSignal from_flat(std::vector<double> t, std::size_t channels, const CVector& flat);

  void validate() const;
};

// Samples of a vector-valued function over parameter nodes: one row per
// node, one column per state component.
struct ParamProfile {
  std::vector<double> params;
  CRowMatrix values;  // ns x n

  ParamProfile() = default;
  ParamProfile(std::vector<double> s, std::size_t components);
  ParamProfile(std::vector<double> s, CRowMatrix v);

  std::size_t size() const { return params.size(); }
  std::size_t components() const { return static_cast<std::size_t>(values.cols()); }
  CVector at(std::size_t j) const { return values.row(static_cast<Eigen::Index>(j)).transpose(); }

  /// Node-major flattening (s_j, component) matching the operator's row order.
  CVector flat() const;
  static ParamProfile from_flat(std::vector<double> s, std::size_t components, const CVector& flat);

  /// Same value at every node.
  static ParamProfile constant(std::vector<double> s, const CVector& value);

  void validate() const;
};

}  // namespace ensctl
