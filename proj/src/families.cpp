#include "ensctl/families.hpp"

namespace ensctl::families {

namespace {

void check_band(double lo, double hi, double T) {
  if (!(lo < hi)) throw ParameterError("parameter band needs lo < hi");
  if (!(T > 0.0)) throw ParameterError("horizon T must be positive");
}

CMatrix rotation_generator(double w) {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 1) = -w;
  a(1, 0) = w;
  return a;
}

}  // namespace

model::SystemSpec harmonic_real(double omega1, double omega2, double T) {
  check_band(omega1, omega2, T);
  model::SystemSpec spec;
  spec.name = "harmonic";
  spec.n = 2;
  spec.m = 2;
  spec.A = [](double, double w) { return rotation_generator(w); };
  spec.B = [](double, double) -> CMatrix { return CMatrix::Identity(2, 2); };
  spec.T = T;
  spec.s_lo = omega1;
  spec.s_hi = omega2;
  return spec;
}

model::SystemSpec harmonic_complex(double omega1, double omega2, double T) {
  check_band(omega1, omega2, T);
  model::SystemSpec spec;
  spec.name = "harmonic-complex";
  spec.n = 1;
  spec.m = 1;
  spec.A = [](double, double w) { return CMatrix::Constant(1, 1, Complex{0.0, w}); };
  spec.B = [](double, double) { return CMatrix::Constant(1, 1, Complex{1.0, 0.0}); };
  spec.T = T;
  spec.s_lo = omega1;
  spec.s_hi = omega2;
  return spec;
}

model::SystemSpec harmonic_u_only(double omega1, double omega2, double T) {
  model::SystemSpec spec = harmonic_real(omega1, omega2, T);
  spec.name = "harmonic-u";
  spec.m = 1;
  spec.B = [](double, double) -> CMatrix {
    CMatrix b = CMatrix::Zero(2, 1);
    b(0, 0) = 1.0;
    return b;
  };
  return spec;
}

model::SystemSpec rotation_scaled_input(double s_lo, double s_hi, double T) {
  check_band(s_lo, s_hi, T);
  model::SystemSpec spec;
  spec.name = "rotation-scaled";
  spec.n = 2;
  spec.m = 1;
  spec.A = [](double, double) { return rotation_generator(1.0); };
  spec.B = [](double, double s) -> CMatrix {
    CMatrix b = CMatrix::Zero(2, 1);
    b(0, 0) = s;
    return b;
  };
  spec.T = T;
  spec.s_lo = s_lo;
  spec.s_hi = s_hi;
  return spec;
}

model::SystemSpec diagonal(int n, double s_lo, double s_hi, double T) {
  check_band(s_lo, s_hi, T);
  if (n < 1) throw ParameterError("state dimension must be positive");
  model::SystemSpec spec;
  spec.name = "diagonal";
  spec.n = n;
  spec.m = 1;
  spec.A = [n](double, double s) -> CMatrix {
    CMatrix a = CMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k) a(k, k) = s * (k + 1);
    return a;
  };
  spec.B = [n](double, double) -> CMatrix { return CMatrix::Ones(n, 1); };
  spec.T = T;
  spec.s_lo = s_lo;
  spec.s_hi = s_hi;
  return spec;
}

}  // namespace ensctl::families
