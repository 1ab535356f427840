#pragma once

// Hand-rolled generators for the property tests. Every case derives its own
// engine from (seed, case index), so a failure message pins the exact input.

#include <cstdint>
#include <random>
#include <vector>

#include "ensctl/common.hpp"
#include "ensctl/signal.hpp"

namespace ensctl::testing {

class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  Gen(std::uint64_t seed, std::uint64_t index) : rng_(mix(seed, index)) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  Complex cnormal() { return {normal(), normal()}; }

  RVector rvec(Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    RVector v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = uniform(lo, hi);
    return v;
  }
  CVector cvec(Eigen::Index n) {
    CVector v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = cnormal();
    return v;
  }
  CMatrix cmat(Eigen::Index r, Eigen::Index c) {
    CMatrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cnormal();
    return m;
  }

  // Smooth random control: a few random complex sinusoids per channel.
  ControlSignal smooth_control(const std::vector<double>& t, std::size_t channels, int terms = 3) {
    ControlSignal u(t, channels);
    for (std::size_t c = 0; c < channels; ++c)
      for (int q = 0; q < terms; ++q) {
        const Complex a = cnormal();
        const double f = uniform(-6.0, 6.0);
        for (std::size_t i = 0; i < t.size(); ++i)
          u.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) += a * std::polar(1.0, f * t[i]);
      }
    return u;
  }

  std::mt19937_64& engine() { return rng_; }

private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  std::mt19937_64 rng_;
};

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace ensctl::testing
