#pragma once

// Two-degree-of-freedom flexible-wing model: flap (bending) and pitch
// (torsion) generalized coordinates of a rectangular wing with uniform
// properties, a_m q'' + (rho U b + d) q' + (rho U^2 c_a + e) q = 0.

#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"
#include "flutterid/theodorsen.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <array>
#include <cmath>
#include <memory>
#include <sstream>

namespace flutterid {

struct WingGeometry {
    double chord_m = 0.172;
    double span_m = 1.385;
    double flexural_axis_fraction = 0.25;  ///< x_f / chord
    double lift_curve_slope = 7.143;       ///< per rad
    double eccentricity = 0.0;
    double total_mass_kg = 3.024;
    double air_density = 1.225;  ///< kg/m^3

    void validate() const
    {
        auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
        require(finite_pos(chord_m), "chord must be positive");
        require(finite_pos(span_m), "span must be positive");
        require(flexural_axis_fraction > 0.0 && flexural_axis_fraction < 1.0,
                "flexural axis fraction must lie in (0, 1)");
        require(std::isfinite(lift_curve_slope) && lift_curve_slope >= 0.0, "lift-curve slope must be >= 0");
        require(std::isfinite(eccentricity) && eccentricity >= 0.0, "eccentricity must be >= 0");
        require(finite_pos(total_mass_kg), "total mass must be positive");
        require(finite_pos(air_density), "air density must be positive");
    }

    double flexural_axis_m() const { return flexural_axis_fraction * chord_m; }

    /// Flexural-axis offset from midchord in semichords (-0.5 at quarter chord).
    double pivot_parameter() const { return 2.0 * flexural_axis_fraction - 1.0; }

    /// omega * chord / (2 U).
    double reduced_frequency(double omega, double speed) const { return omega * chord_m / (2.0 * speed); }
};

inline double mass_per_area(const WingGeometry& g)
{
    g.validate();
    return g.total_mass_kg / (g.span_m * g.chord_m);
}

inline Eigen::Matrix2d assemble_inertia(const WingGeometry& g)
{
    const double m = mass_per_area(g);
    const double c = g.chord_m, b = g.span_m, xf = g.flexural_axis_m();
    const double coupling = std::pow(b, 4) / 4.0 * (c * c / 2.0 - c * xf);
    Eigen::Matrix2d a;
    a << c * std::pow(b, 5) / 5.0, coupling,
        coupling, std::pow(b, 3) / 3.0 * (c * c * c / 3.0 - c * c * xf + c * xf * xf);
    return m * a;
}

/// Aerodynamic damping and stiffness matrices before the rho U and rho U^2 factors.
struct AeroMatrices {
    Eigen::Matrix2d b;
    Eigen::Matrix2d c_a;
};

inline AeroMatrices assemble_aero(const WingGeometry& g, double m_theta_dot_value)
{
    g.validate();
    require(std::isfinite(m_theta_dot_value), "pitch-damping derivative must be finite");
    const double c = g.chord_m, bw = g.span_m, aw = g.lift_curve_slope, e = g.eccentricity;
    AeroMatrices out;
    out.b << c * aw * std::pow(bw, 5) / 10.0, 0.0,
        -c * c * e * aw * std::pow(bw, 4) / 8.0, -c * c * c * std::pow(bw, 3) * m_theta_dot_value / 24.0;
    out.c_a << 0.0, c * aw * std::pow(bw, 4) / 8.0,
        0.0, -c * c * e * aw * std::pow(bw, 3) / 6.0;
    return out;
}

struct StiffnessPair {
    double EI = 0.0;  ///< N m^2
    double GJ = 0.0;  ///< N m^2

    void validate() const
    {
        require(std::isfinite(EI) && EI > 0.0, "EI must be positive");
        require(std::isfinite(GJ) && GJ > 0.0, "GJ must be positive");
    }
};

/// diag(4 EI b_w, GJ b_w).
inline Eigen::Matrix2d stiffness_matrix(const WingGeometry& g, const StiffnessPair& s)
{
    s.validate();
    return Eigen::Vector2d(4.0 * s.EI * g.span_m, s.GJ * g.span_m).asDiagonal();
}

struct ModalTargets {
    double bending_hz = 0.0;
    double torsion_hz = 0.0;
    double bending_zeta = 0.0;
    double torsion_zeta = 0.0;

    void validate() const
    {
        require(std::isfinite(bending_hz) && bending_hz > 0.0, "bending frequency must be positive");
        require(std::isfinite(torsion_hz) && torsion_hz > bending_hz,
                "torsion frequency must exceed bending frequency");
        require(bending_zeta >= 0.0 && bending_zeta < 1.0, "bending damping ratio must lie in [0, 1)");
        require(torsion_zeta >= 0.0 && torsion_zeta < 1.0, "torsion damping ratio must lie in [0, 1)");
    }

    Eigen::Vector2d omega() const { return {hz_to_rad(bending_hz), hz_to_rad(torsion_hz)}; }
    Eigen::Vector2d zeta() const { return {bending_zeta, torsion_zeta}; }
};

/// Targets from an identified set: first mode as bending, second as torsion.
inline ModalTargets modal_targets(const ModalParameterSet& modes)
{
    require(modes.size() >= 2, "at least two identified modes are needed (bending and torsion)");
    ModalTargets t{modes[0].frequency_hz, modes[1].frequency_hz, modes[0].damping_ratio, modes[1].damping_ratio};
    t.validate();
    return t;
}

struct StillAirModes {
    Eigen::Vector2d omega;    ///< rad/s, ascending
    Eigen::Matrix2d shapes;   ///< columns, phi^T a_m phi = I
};

/// e phi = omega^2 a_m phi.
inline StillAirModes still_air_modes(const Eigen::Matrix2d& a_m, const Eigen::Matrix2d& e_stiff)
{
    require(a_m.allFinite() && e_stiff.allFinite(), "matrices must be finite");
    require((a_m - a_m.transpose()).norm() <= 1e-12 * a_m.norm(), "inertia matrix must be symmetric");
    Eigen::LLT<Eigen::Matrix2d> llt(a_m);
    require(llt.info() == Eigen::Success && a_m.determinant() > 0.0, "inertia matrix must be positive definite");
    require(e_stiff(0, 1) == 0.0 && e_stiff(1, 0) == 0.0 && e_stiff(0, 0) > 0.0 && e_stiff(1, 1) > 0.0,
            "stiffness matrix must be positive diagonal");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> ges(e_stiff, a_m);
    if (ges.info() != Eigen::Success) throw NumericalError("still-air eigenproblem failed");
    StillAirModes out;
    out.omega = ges.eigenvalues().cwiseSqrt();
    out.shapes = ges.eigenvectors();
    for (int j = 0; j < 2; ++j) {
        Eigen::Index big = 0;
        out.shapes.col(j).cwiseAbs().maxCoeff(&big);
        if (out.shapes(big, j) < 0.0) out.shapes.col(j) *= -1.0;
    }
    return out;
}

/// Roots of det(a p^2 + c p + k) = 0 via the first-order companion form.
inline Eigen::Vector4cd quadratic_eigenvalues(const Eigen::Matrix2d& a, const Eigen::Matrix2d& c,
                                               const Eigen::Matrix2d& k)
{
    const Eigen::Matrix2d a_inv = a.inverse();
    Eigen::Matrix4d comp = Eigen::Matrix4d::Zero();
    comp.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
    comp.bottomLeftCorner<2, 2>() = -a_inv * k;
    comp.bottomRightCorner<2, 2>() = -a_inv * c;
    Eigen::EigenSolver<Eigen::Matrix4d> es(comp, false);
    if (es.info() != Eigen::Success) throw NumericalError("quadratic eigenproblem failed");
    return es.eigenvalues();
}

// ---------------------------------------------------------------------------
// Stiffness calibration

struct Calibration {
    StiffnessPair stiffness;
    Eigen::Vector2d model_omega;  ///< rad/s at the optimum
    double residual = 0.0;        ///< sum of squared frequency errors, (rad/s)^2
    int iterations = 0;
};

namespace aero_detail {

struct CalibrationProblem {
    Eigen::Matrix2d a_m;
    Eigen::Vector2d target;
    double span;
};

inline Eigen::Vector2d model_omega(const CalibrationProblem& p, double ei, double gj)
{
    const Eigen::Matrix2d e = Eigen::Vector2d(4.0 * ei * p.span, gj * p.span).asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> ges(e, p.a_m, Eigen::EigenvaluesOnly);
    return ges.eigenvalues().cwiseMax(0.0).cwiseSqrt();
}

inline double objective(const gsl_vector* x, void* params)
{
    const auto* p = static_cast<const CalibrationProblem*>(params);
    const double ei = std::exp(gsl_vector_get(x, 0));
    const double gj = std::exp(gsl_vector_get(x, 1));
    if (!std::isfinite(ei) || !std::isfinite(gj) || ei <= 0.0 || gj <= 0.0) return HUGE_VAL;
    return (model_omega(*p, ei, gj) - p->target).squaredNorm();
}

} // namespace aero_detail

/// Fits (EI, GJ) so the still-air frequencies match the targets. Simplex
/// descent in log-stiffness from the decoupled estimate; throws when the
/// fit misses the targets by more than 0.1%.
inline Calibration calibrate_stiffness(const ModalTargets& targets, const WingGeometry& geom,
                                       double tolerance = 1e-10, int max_iterations = 500)
{
    targets.validate();
    geom.validate();
    const Eigen::Matrix2d a_m = assemble_inertia(geom);
    aero_detail::CalibrationProblem prob{a_m, targets.omega(), geom.span_m};

    const Eigen::Vector2d w = targets.omega();
    const double ei0 = w(0) * w(0) * a_m(0, 0) / (4.0 * geom.span_m);
    const double gj0 = w(1) * w(1) * a_m(1, 1) / geom.span_m;

    gsl_set_error_handler_off();
    using Minimizer = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;
    using Vector = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
    Minimizer s(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2), &gsl_multimin_fminimizer_free);
    Vector x(gsl_vector_alloc(2), &gsl_vector_free);
    Vector step(gsl_vector_alloc(2), &gsl_vector_free);
    if (!s || !x || !step) throw NumericalError("calibration: allocation failed");
    gsl_vector_set(x.get(), 0, std::log(ei0));
    gsl_vector_set(x.get(), 1, std::log(gj0));
    gsl_vector_set_all(step.get(), 0.1);

    gsl_multimin_function fn{&aero_detail::objective, 2, &prob};
    gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get());

    int it = 0;
    while (it < max_iterations && s->fval > tolerance) {
        ++it;
        if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_fminimizer_size(s.get()) < 1e-15) break;
    }

    Calibration out;
    out.stiffness = {std::exp(gsl_vector_get(s->x, 0)), std::exp(gsl_vector_get(s->x, 1))};
    out.model_omega = aero_detail::model_omega(prob, out.stiffness.EI, out.stiffness.GJ);
    out.residual = s->fval;
    out.iterations = it;
    const double worst = ((out.model_omega - w).array() / w.array()).abs().maxCoeff();
    if (!(worst <= 1e-3)) {
        std::ostringstream msg;
        msg << "stiffness calibration did not converge: residual " << out.residual << " (rad/s)^2 after " << it
            << " iterations";
        throw NumericalError(msg.str());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Damping and full model

/// phi^{-T} diag(2 zeta omega) phi^{-1} for mass-normalised shapes.
inline Eigen::Matrix2d damping_matrix(const Eigen::Matrix2d& shapes, const Eigen::Vector2d& omega,
                                      const Eigen::Vector2d& zeta)
{
    require(shapes.allFinite() && omega.allFinite() && zeta.allFinite(), "inputs must be finite");
    require((zeta.array() >= 0.0).all() && (zeta.array() < 1.0).all(), "damping ratios must lie in [0, 1)");
    Eigen::FullPivLU<Eigen::Matrix2d> lu(shapes);
    if (!lu.isInvertible()) throw NumericalError("mode-shape matrix is singular");
    const Eigen::Matrix2d inv = lu.inverse();
    const Eigen::Matrix2d dn = (2.0 * zeta.cwiseProduct(omega)).asDiagonal();
    const Eigen::Matrix2d d = inv.transpose() * dn * inv;
    return 0.5 * (d + d.transpose());
}

inline Eigen::Matrix2d damping_matrix(const StillAirModes& modes, const ModalTargets& targets)
{
    return damping_matrix(modes.shapes, modes.omega, targets.zeta());
}

struct RomMatrices {
    Eigen::Matrix2d a_m, b, c_a, d, e_stiff;
};

inline RomMatrices assemble_rom(const WingGeometry& geom, const StiffnessPair& stiffness, const ModalTargets& targets,
                                double m_theta_dot_value)
{
    targets.validate();
    RomMatrices r;
    r.a_m = assemble_inertia(geom);
    r.e_stiff = stiffness_matrix(geom, stiffness);
    const AeroMatrices aero = assemble_aero(geom, m_theta_dot_value);
    r.b = aero.b;
    r.c_a = aero.c_a;
    r.d = damping_matrix(still_air_modes(r.a_m, r.e_stiff), targets);
    return r;
}

} // namespace flutterid
