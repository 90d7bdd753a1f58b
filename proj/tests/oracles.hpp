#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include "flutterid/frf.hpp"

#include <cmath>
#include <numbers>

namespace flutterid::testing {

inline constexpr double euler_gamma = 0.57721566490153286061;

// Power series for J0, J1, Y0, Y1 (small argument).
struct BesselSeries {
    double j0 = 0, j1 = 0, y0 = 0, y1 = 0;
};

inline BesselSeries bessel_series(double x)
{
    const double h = x / 2.0;
    BesselSeries s;
    double harmonic = 0.0;  // H_k
    double sum_y0 = 0.0, sum_y1 = 0.0;
    double fact_k = 1.0;    // k!
    for (int k = 0; k < 40; ++k) {
        if (k > 0) {
            fact_k *= k;
            harmonic += 1.0 / k;
        }
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        const double t0 = sign * std::pow(h, 2 * k) / (fact_k * fact_k);
        const double t1 = sign * std::pow(h, 2 * k + 1) / (fact_k * fact_k * (k + 1));
        s.j0 += t0;
        s.j1 += t1;
        if (k > 0) sum_y0 += -t0 * harmonic;  // (-1)^{k+1} H_k h^{2k} / (k!)^2
        const double psi_k1 = -euler_gamma + harmonic;
        const double psi_k2 = psi_k1 + 1.0 / (k + 1);
        sum_y1 += t1 * (psi_k1 + psi_k2);
    }
    const double pi = std::numbers::pi;
    s.y0 = 2.0 / pi * (std::log(h) + euler_gamma) * s.j0 + 2.0 / pi * sum_y0;
    s.y1 = -2.0 / (pi * x) + 2.0 / pi * std::log(h) * s.j1 - sum_y1 / pi;
    return s;
}

inline cplx theodorsen_series(double k)
{
    const BesselSeries b = bessel_series(k);
    const cplx h0(b.j0, -b.y0), h1(b.j1, -b.y1);
    return h1 / (h1 + cplx(0.0, 1.0) * h0);
}

} // namespace flutterid::testing
