#pragma once

// p-k flutter solution over an airspeed grid, eigenvalue tracking and
// onset detection.

#include "flutterid/aero_rom.hpp"
#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"
#include "flutterid/theodorsen.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace flutterid {

struct SpeedGrid {
    std::vector<double> speeds;  ///< m/s, >= 0, strictly increasing

    void validate() const
    {
        require(!speeds.empty(), "speed grid is empty");
        for (std::size_t i = 0; i < speeds.size(); ++i) {
            require(std::isfinite(speeds[i]) && speeds[i] >= 0.0, "speeds must be finite and >= 0");
            if (i > 0) require(speeds[i] > speeds[i - 1], "speeds must be strictly increasing");
        }
    }

    /// lo, lo+step, ..., up to hi inclusive.
    static SpeedGrid range(double lo, double hi, double step)
    {
        require(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && hi >= lo, "speed range must satisfy 0 <= lo <= hi");
        require(std::isfinite(step) && step > 0.0, "speed step must be positive");
        SpeedGrid g;
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) g.speeds.push_back(lo + static_cast<double>(i) * step);
        return g;
    }

    static SpeedGrid standard() { return range(0.0, 28.0, 0.25); }
};

/// Structural model plus geometry; aerodynamics are re-assembled per k.
struct PkModel {
    WingGeometry geom;
    Eigen::Matrix2d a_m;
    Eigen::Matrix2d d;
    Eigen::Matrix2d e_stiff;

    static PkModel from(const WingGeometry& geom, const StiffnessPair& stiffness, const Eigen::Matrix2d& d)
    {
        return {geom, assemble_inertia(geom), d, stiffness_matrix(geom, stiffness)};
    }
};

struct PkPoint {
    cplx lambda{};  ///< rad/s, upper half-plane branch
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
    double k = std::numeric_limits<double>::quiet_NaN();  ///< NaN at U = 0
    int iterations = 0;
    bool converged = true;
};

struct PkSolution {
    std::vector<double> speeds;
    std::vector<std::array<PkPoint, 2>> points;  ///< [speed][mode]
    std::vector<std::string> warnings;
};

namespace pk_detail {

inline constexpr double k_floor = 1e-8;

inline PkPoint make_point(cplx lambda)
{
    PkPoint p;
    p.lambda = lambda;
    const double mag = std::abs(lambda);
    p.frequency_hz = rad_to_hz(mag);
    p.damping_ratio = mag > 0.0 ? -lambda.real() / mag : 0.0;
    return p;
}

inline Eigen::Vector4cd eigenvalues_at(const PkModel& m, double speed, double k)
{
    const double rho = m.geom.air_density;
    if (speed == 0.0) return quadratic_eigenvalues(m.a_m, m.d, m.e_stiff);
    const AeroMatrices aero = assemble_aero(m.geom, m_theta_dot(k, m.geom.pivot_parameter(), m.geom.lift_curve_slope));
    return quadratic_eigenvalues(m.a_m, rho * speed * aero.b + m.d, rho * speed * speed * aero.c_a + m.e_stiff);
}

/// Index of the eigenvalue (Im >= 0 preferred) closest to `previous`; a tie
/// goes to the candidate with closer real part. Sets `tie` when one occurred.
inline Eigen::Index select(const Eigen::Vector4cd& eig, cplx previous, bool& tie)
{
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    tie = false;
    for (int pass = 0; pass < 2 && best < 0; ++pass) {
        for (Eigen::Index i = 0; i < 4; ++i) {
            if (pass == 0 && eig(i).imag() < 0.0) continue;
            const double dist = std::abs(eig(i) - previous);
            const double scale = std::max(std::abs(previous), 1e-300);
            if (best >= 0 && std::abs(dist - best_d) <= 1e-12 * scale) {
                tie = true;
                if (std::abs(eig(i).real() - previous.real()) < std::abs(eig(best).real() - previous.real())) best = i;
            } else if (dist < best_d) {
                best_d = dist;
                best = i;
            }
        }
    }
    return best;
}

} // namespace pk_detail

/// Still-air modes as tracked starting points: the two upper half-plane roots.
inline std::array<PkPoint, 2> still_air_points(const PkModel& m)
{
    const Eigen::Vector4cd eig = quadratic_eigenvalues(m.a_m, m.d, m.e_stiff);
    std::vector<cplx> upper;
    for (Eigen::Index i = 0; i < 4; ++i) {
        if (eig(i).imag() >= 0.0) upper.push_back(eig(i));
    }
    if (upper.size() != 2) throw NumericalError("still-air system is not oscillatory in both modes");
    if (std::abs(upper[0]) > std::abs(upper[1])) std::swap(upper[0], upper[1]);
    return {pk_detail::make_point(upper[0]), pk_detail::make_point(upper[1])};
}

/// One p-k solve at `speed`, warm-started per mode from `previous` (its
/// eigenvalue drives selection, its k seeds the loop).
inline std::array<PkPoint, 2> pk_at_speed(const PkModel& m, double speed, const std::array<PkPoint, 2>& previous,
                                          std::vector<std::string>* warnings = nullptr, double tolerance = 1e-6,
                                          int max_iterations = 100)
{
    require(std::isfinite(speed) && speed >= 0.0, "speed must be >= 0");
    if (speed == 0.0) return still_air_points(m);

    std::array<PkPoint, 2> out;
    for (std::size_t n = 0; n < 2; ++n) {
        const PkPoint& prev = previous[n];
        double k = std::isfinite(prev.k) && prev.k > 0.0 ? prev.k
                                                         : m.geom.reduced_frequency(std::abs(prev.lambda.imag()), speed);
        k = std::max(k, pk_detail::k_floor);
        cplx target = prev.lambda;
        PkPoint point;
        point.converged = false;
        bool tie_logged = false;
        for (int it = 1; it <= max_iterations; ++it) {
            const Eigen::Vector4cd eig = pk_detail::eigenvalues_at(m, speed, k);
            bool tie = false;
            const Eigen::Index sel = pk_detail::select(eig, target, tie);
            if (tie && !tie_logged && warnings) {
                std::ostringstream msg;
                msg << "equidistant eigenvalues for mode " << n + 1 << " at U = " << speed
                    << " m/s; kept the damping-continuous one";
                warnings->push_back(msg.str());
                tie_logged = true;
            }
            const cplx lambda = eig(sel);
            const double k_new = std::max(m.geom.reduced_frequency(std::abs(lambda.imag()), speed), pk_detail::k_floor);
            const double change = std::abs(k_new - k) / k;
            point = pk_detail::make_point(lambda);
            point.iterations = it;
            point.converged = false;
            k = k_new;
            target = lambda;
            if (change < tolerance) {
                point.converged = true;
                break;
            }
        }
        // k is the value consistent with the recorded eigenvalue.
        point.k = k;
        if (!point.converged && warnings) {
            std::ostringstream msg;
            msg << "k loop did not converge for mode " << n + 1 << " at U = " << speed << " m/s";
            warnings->push_back(msg.str());
        }
        out[n] = point;
    }
    return out;
}

/// Ascending march with warm starts from the previous speed.
inline PkSolution sweep(const PkModel& m, const SpeedGrid& grid)
{
    grid.validate();
    PkSolution sol;
    std::array<PkPoint, 2> state = still_air_points(m);
    for (double u : grid.speeds) {
        try {
            state = pk_at_speed(m, u, state, &sol.warnings);
        } catch (const std::exception& e) {
            sol.warnings.push_back("p-k failed at U = " + std::to_string(u) + " m/s: " + e.what());
            continue;
        }
        sol.speeds.push_back(u);
        sol.points.push_back(state);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Onset detection

struct OnsetReport {
    std::optional<double> flutter_speed_ms;
    std::optional<double> divergence_speed_ms;
    std::optional<std::pair<double, double>> flutter_bracket;
    std::optional<std::pair<double, double>> divergence_bracket;
    int critical_mode_index = -1;  ///< 0-based tracked mode of the first event
    bool degenerate = false;        ///< unstable already at the first speed
    std::vector<std::string> notes;
};

namespace pk_detail {

/// -1, 0, +1 with a relative dead band around zero.
inline int sign_of(cplx lambda)
{
    const double tol = 1e-9 * std::abs(lambda);
    if (lambda.real() > tol) return 1;
    if (lambda.real() < -tol) return -1;
    return 0;
}

} // namespace pk_detail

inline OnsetReport detect_onset(const PkSolution& sol, double divergence_threshold = 1e-3)
{
    require(sol.speeds.size() >= 2 && sol.points.size() == sol.speeds.size(), "onset detection needs >= 2 speeds");
    OnsetReport r;
    auto record = [&](bool divergence, double speed, std::pair<double, double> bracket, int mode) {
        auto& field = divergence ? r.divergence_speed_ms : r.flutter_speed_ms;
        if (field) return;
        field = speed;
        (divergence ? r.divergence_bracket : r.flutter_bracket) = bracket;
        if (r.critical_mode_index < 0) r.critical_mode_index = mode;
    };

    for (int n = 0; n < 2; ++n) {
        const PkPoint& first = sol.points.front()[static_cast<std::size_t>(n)];
        if (pk_detail::sign_of(first.lambda) > 0) {
            r.degenerate = true;
            r.notes.push_back("mode " + std::to_string(n + 1) + " unstable at the first speed");
            record(std::abs(first.lambda.imag()) <= divergence_threshold, sol.speeds.front(),
                   {sol.speeds.front(), sol.speeds.front()}, n);
        }
    }
    for (std::size_t i = 0; i + 1 < sol.speeds.size(); ++i) {
        for (int n = 0; n < 2; ++n) {
            const cplx lo = sol.points[i][static_cast<std::size_t>(n)].lambda;
            const cplx hi = sol.points[i + 1][static_cast<std::size_t>(n)].lambda;
            if (!(pk_detail::sign_of(lo) < 0 && pk_detail::sign_of(hi) >= 0)) continue;
            const double u0 = sol.speeds[i], u1 = sol.speeds[i + 1];
            const double t = lo.real() / (lo.real() - hi.real());
            const double at = u0 + t * (u1 - u0);
            const bool divergence = std::abs(hi.imag()) <= divergence_threshold;
            record(divergence, at, {u0, u1}, n);
        }
    }
    if (!r.flutter_speed_ms && !r.divergence_speed_ms) r.notes.push_back("no instability in the swept range");
    if (r.flutter_speed_ms && r.divergence_speed_ms) {
        r.notes.push_back(*r.flutter_speed_ms < *r.divergence_speed_ms ? "flutter precedes divergence"
                                                                       : "divergence precedes flutter");
    }
    return r;
}

/// Largest real part among the tracked modes at `speed`, warm-started.
inline double max_real_part(const PkModel& m, double speed, const std::array<PkPoint, 2>& warm)
{
    const std::array<PkPoint, 2> pts = pk_at_speed(m, speed, warm);
    return std::max(pts[0].lambda.real(), pts[1].lambda.real());
}

/// Bisection on the sign of the largest tracked real part until the bracket
/// is narrower than `resolution`; returns its midpoint. `warm` is the p-k
/// state at or below the lower bound.
inline double refine_onset(const PkModel& m, std::pair<double, double> bracket, const std::array<PkPoint, 2>& warm,
                           double resolution = 0.01)
{
    auto [lo, hi] = bracket;
    require(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && hi >= lo, "bracket must satisfy 0 <= lo <= hi");
    if (hi - lo < resolution) return 0.5 * (lo + hi);
    const double g_lo = max_real_part(m, lo, warm);
    const double g_hi = max_real_part(m, hi, warm);
    if (!(g_lo < 0.0 && g_hi >= 0.0) && !(g_lo >= 0.0 && g_hi < 0.0)) {
        throw ValidationError("no sign change of max Re(lambda) in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "] m/s");
    }
    const bool rising = g_lo < 0.0;
    while (hi - lo >= resolution) {
        const double mid = 0.5 * (lo + hi);
        const bool below = max_real_part(m, mid, warm) < 0.0;
        (below == rising ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Warm state from the last grid point at or below `speed`.
inline const std::array<PkPoint, 2>& warm_state(const PkSolution& sol, double speed)
{
    require(!sol.speeds.empty(), "empty p-k solution");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < sol.speeds.size(); ++i) {
        if (sol.speeds[i] <= speed) idx = i;
    }
    return sol.points[idx];
}

/// CSV `U_ms, mode, f_hz, zeta, re_lambda, im_lambda, k, converged`.
inline std::string trajectory_csv(const PkSolution& sol)
{
    std::ostringstream out;
    out.precision(12);
    out << "U_ms, mode, f_hz, zeta, re_lambda, im_lambda, k, converged\n";
    for (std::size_t i = 0; i < sol.speeds.size(); ++i) {
        for (std::size_t n = 0; n < 2; ++n) {
            const PkPoint& p = sol.points[i][n];
            out << sol.speeds[i] << ", " << n + 1 << ", " << p.frequency_hz << ", " << p.damping_ratio << ", "
                << p.lambda.real() << ", " << p.lambda.imag() << ", ";
            if (std::isfinite(p.k)) out << p.k;
            else out << "nan";
            out << ", " << (p.converged ? 1 : 0) << "\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Modal data to onset speed

struct FlutterAnalysis {
    ModalTargets targets;
    Calibration calibration;
    PkModel model;
    PkSolution solution;
    OnsetReport onset;
    std::optional<double> flutter_speed_ms;     ///< refined
    std::optional<double> divergence_speed_ms;  ///< refined
};

/// calibrate -> assemble -> sweep -> detect -> refine.
inline FlutterAnalysis analyse_flutter(const ModalTargets& targets, const WingGeometry& geom,
                                       const SpeedGrid& grid = SpeedGrid::standard())
{
    FlutterAnalysis a;
    a.targets = targets;
    a.calibration = calibrate_stiffness(targets, geom);
    const Eigen::Matrix2d a_m = assemble_inertia(geom);
    const Eigen::Matrix2d e = stiffness_matrix(geom, a.calibration.stiffness);
    const Eigen::Matrix2d d = damping_matrix(still_air_modes(a_m, e), targets);
    a.model = PkModel::from(geom, a.calibration.stiffness, d);
    a.solution = sweep(a.model, grid);
    if (a.solution.speeds.size() < 2) throw NumericalError("p-k sweep produced fewer than two speeds");
    a.onset = detect_onset(a.solution);
    auto refine = [&](const std::optional<std::pair<double, double>>& bracket, const std::optional<double>& coarse)
        -> std::optional<double> {
        if (!bracket) return std::nullopt;
        if (a.onset.degenerate && bracket->first == bracket->second) return coarse;
        try {
            return refine_onset(a.model, *bracket, warm_state(a.solution, bracket->first));
        } catch (const ValidationError&) {
            a.solution.warnings.push_back("onset refinement lost the sign change; kept the grid estimate");
            return coarse;
        }
    };
    a.flutter_speed_ms = refine(a.onset.flutter_bracket, a.onset.flutter_speed_ms);
    a.divergence_speed_ms = refine(a.onset.divergence_bracket, a.onset.divergence_speed_ms);
    return a;
}

} // namespace flutterid
