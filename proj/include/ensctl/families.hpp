#pragma once

#include "ensctl/model.hpp"

namespace ensctl::families {

/// dx/dt = -w y + u, dy/dt = w x + v with w the parameter on [omega1, omega2].
/// Two real channels (u, v).
model::SystemSpec harmonic_real(double omega1, double omega2, double T);

/// The same ensemble as dp/dt = i w p + alpha, p = x + i y, alpha = u + i v.
model::SystemSpec harmonic_complex(double omega1, double omega2, double T);

/// Harmonic ensemble driven only through x: B = (1, 0)^T, so v = 0.
model::SystemSpec harmonic_u_only(double omega1, double omega2, double T);

/// dX/dt = [[0,-1],[1,0]] X + s (1,0)^T u on s in [s_lo, s_hi].
model::SystemSpec rotation_scaled_input(double s_lo = 1.0, double s_hi = 2.0, double T = 1.0);

/// A = s diag(1, ..., n), B = (1, ..., 1)^T.
model::SystemSpec diagonal(int n, double s_lo, double s_hi, double T);

}  // namespace ensctl::families
