#pragma once

// Theodorsen's lift-deficiency function and the oscillatory pitch-damping
// derivative built from it.

#include "flutterid/error.hpp"

#include <cmath>
#include <complex>

namespace flutterid {

/// C(k) = H1(k) / (H1(k) + i H0(k)), H_n = J_n - i Y_n (second kind).
/// k = 0 returns the quasi-steady limit 1 exactly.
inline std::complex<double> theodorsen(double k)
{
    require(std::isfinite(k) && k >= 0.0, "reduced frequency must be finite and >= 0");
    if (k == 0.0) return {1.0, 0.0};
    const std::complex<double> h0(std::cyl_bessel_j(0.0, k), -std::cyl_neumann(0.0, k));
    const std::complex<double> h1(std::cyl_bessel_j(1.0, k), -std::cyl_neumann(1.0, k));
    return h1 / (h1 + std::complex<double>(0.0, 1.0) * h0);
}

/// Nondimensional pitch-damping derivative at reduced frequency k (semichord
/// based) for pivot offset `a` from midchord in semichords, scaled by the
/// lift-curve slope instead of 2 pi.
inline double m_theta_dot(double k, double a, double lift_curve_slope)
{
    require(std::isfinite(k) && k > 0.0, "reduced frequency must be > 0");
    const std::complex<double> c = theodorsen(k);
    const double f = c.real();
    const double g = c.imag();
    return lift_curve_slope *
           (-0.5 * k * (0.5 - a) + k * f * (a + 0.5) * (0.5 - a) + (g / k) * (0.5 + a));
}

} // namespace flutterid
