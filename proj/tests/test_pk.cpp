#include "flutterid/fixtures.hpp"
#include "flutterid/pk_flutter.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace flutterid;
using flutterid::testing::rel_err;

namespace {

ModalTargets targets_of(const FixtureModes& fm, double zeta_scale = 1.0)
{
    return {fm.frequency_hz[0], fm.frequency_hz[1], zeta_scale * fm.damping_ratio[0],
            zeta_scale * fm.damping_ratio[1]};
}

ModalTargets baseline_targets(double zeta_scale = 1.0) { return targets_of(scenario_fixture(1).n4sid, zeta_scale); }

PkModel model_for(const ModalTargets& t, const WingGeometry& g = {})
{
    const Calibration c = calibrate_stiffness(t, g);
    const Eigen::Matrix2d a = assemble_inertia(g);
    const Eigen::Matrix2d e = stiffness_matrix(g, c.stiffness);
    return PkModel::from(g, c.stiffness, damping_matrix(still_air_modes(a, e), t));
}

PkSolution solution_from(std::vector<double> speeds, std::vector<std::array<cplx, 2>> lambdas)
{
    PkSolution s;
    s.speeds = std::move(speeds);
    for (const auto& l : lambdas) {
        std::array<PkPoint, 2> pts;
        for (int n = 0; n < 2; ++n) {
            pts[n].lambda = l[n];
            pts[n].frequency_hz = rad_to_hz(std::abs(l[n]));
        }
        s.points.push_back(pts);
    }
    return s;
}

} // namespace

TEST(SpeedGrid, StandardAndValidation)
{
    const SpeedGrid g = SpeedGrid::standard();
    ASSERT_EQ(g.speeds.size(), 113u);
    EXPECT_EQ(g.speeds.front(), 0.0);
    EXPECT_DOUBLE_EQ(g.speeds.back(), 28.0);
    EXPECT_NO_THROW(g.validate());
    EXPECT_THROW((SpeedGrid{{0.0, 1.0, 1.0}}).validate(), ValidationError);
    EXPECT_THROW((SpeedGrid{{-1.0, 1.0}}).validate(), ValidationError);
    EXPECT_THROW(SpeedGrid::range(0.0, 1.0, 0.0), ValidationError);
    EXPECT_EQ(SpeedGrid::range(0.0, 1.0, 0.1).speeds.size(), 11u);
}

TEST(PkAtSpeed, StillAirMatchesQuadraticEigenvalues)
{
    const PkModel m = model_for(baseline_targets());
    const std::array<PkPoint, 2> pts = pk_at_speed(m, 0.0, still_air_points(m));
    const Eigen::Vector4cd eig = quadratic_eigenvalues(m.a_m, m.d, m.e_stiff);
    for (const PkPoint& p : pts) {
        double best = INFINITY;
        for (Eigen::Index i = 0; i < 4; ++i) best = std::min(best, std::abs(eig(i) - p.lambda));
        EXPECT_LE(best, 1e-10 * std::abs(p.lambda));
    }
    // lambda = -zeta wn + i wn sqrt(1 - zeta^2) of the targets.
    const ModalTargets t = baseline_targets();
    EXPECT_LT(rel_err(pts[0].lambda, modal_to_pole(t.bending_hz, t.bending_zeta)), 5e-3);
    EXPECT_LT(rel_err(pts[1].lambda, modal_to_pole(t.torsion_hz, t.torsion_zeta)), 5e-3);
}

TEST(PkAtSpeed, UndampedStillAirIsPurelyImaginary)
{
    const PkModel m = model_for(baseline_targets(0.0));
    for (const PkPoint& p : pk_at_speed(m, 0.0, still_air_points(m))) {
        EXPECT_LE(std::abs(p.lambda.real()), 1e-12 * std::abs(p.lambda));
        EXPECT_GT(p.lambda.imag(), 0.0);
    }
}

TEST(PkAtSpeed, TorsionDampingFallsTowardZeroNearOnset)
{
    const PkModel m = model_for(baseline_targets());
    const PkSolution s = sweep(m, SpeedGrid::range(0.0, 24.0, 0.5));
    auto zeta_at = [&](double u) {
        for (std::size_t i = 0; i < s.speeds.size(); ++i) {
            if (std::abs(s.speeds[i] - u) < 1e-9) return s.points[i][1].damping_ratio;
        }
        return std::nan("");
    };
    EXPECT_GT(zeta_at(22.0), 0.0);
    EXPECT_LT(zeta_at(22.0), zeta_at(21.0));
    EXPECT_LT(zeta_at(21.0), zeta_at(20.0));
    EXPECT_LT(zeta_at(24.0), 0.0);
}

TEST(PkAtSpeed, SelfConsistentReducedFrequency)
{
    const PkModel m = model_for(baseline_targets());
    const PkSolution s = sweep(m, SpeedGrid::standard());
    ASSERT_EQ(s.speeds.size(), 113u);
    for (std::size_t i = 0; i < s.speeds.size(); ++i) {
        for (const PkPoint& p : s.points[i]) {
            if (s.speeds[i] == 0.0) {
                EXPECT_TRUE(std::isnan(p.k));
                continue;
            }
            ASSERT_TRUE(p.converged) << s.speeds[i];
            const double k = m.geom.reduced_frequency(std::abs(p.lambda.imag()), s.speeds[i]);
            EXPECT_LE(std::abs(p.k - k), 1e-6 * k) << s.speeds[i];
        }
    }
}

TEST(PkAtSpeed, NonConvergenceFlaggedNotThrown)
{
    const PkModel m = model_for(baseline_targets());
    std::vector<std::string> warnings;
    const auto pts = pk_at_speed(m, 15.0, still_air_points(m), &warnings, 1e-12, 1);
    for (const PkPoint& p : pts) {
        EXPECT_FALSE(p.converged);
        EXPECT_EQ(p.iterations, 1);
    }
    EXPECT_EQ(warnings.size(), 2u);
}

TEST(Sweep, TrajectoriesContinuous)
{
    for (const ScenarioFixture& fx : scenario_fixtures()) {
        for (IdMethod method : all_id_methods) {
            WingGeometry g;
            g.total_mass_kg = fx.mass_kg;
            const PkSolution s = sweep(model_for(targets_of(fx.modes(method)), g), SpeedGrid::standard());
            ASSERT_EQ(s.speeds.size(), 113u);
            for (std::size_t i = 1; i < s.speeds.size(); ++i) {
                for (int n = 0; n < 2; ++n) {
                    const double w0 = std::abs(s.points[i - 1][n].lambda);
                    const double w1 = std::abs(s.points[i][n].lambda);
                    EXPECT_LT(std::abs(w1 - w0), 0.2 * w0) << fx.scenario << " " << to_string(method) << " " << i;
                    EXPECT_GE(s.points[i][n].lambda.imag(), 0.0);
                }
            }
        }
    }
}

TEST(Sweep, SinglePointGridIsStillAir)
{
    const PkModel m = model_for(baseline_targets());
    const PkSolution s = sweep(m, SpeedGrid{{0.0}});
    ASSERT_EQ(s.speeds.size(), 1u);
    const auto still = still_air_points(m);
    EXPECT_EQ(s.points[0][0].lambda, still[0].lambda);
    EXPECT_EQ(s.points[0][1].lambda, still[1].lambda);
}

TEST(Sweep, DampingPostponesFlutter)
{
    const WingGeometry g;
    std::optional<double> previous;
    for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
        const FlutterAnalysis a = analyse_flutter(baseline_targets(alpha), g);
        ASSERT_TRUE(a.flutter_speed_ms) << alpha;
        if (previous) {
            EXPECT_GT(*a.flutter_speed_ms, *previous) << alpha;
        }
        previous = a.flutter_speed_ms;
    }
}

TEST(Sweep, FourEigenvaluesEverywhere)
{
    const PkModel m = model_for(baseline_targets());
    for (double u : {0.0, 5.0, 20.0, 28.0}) {
        const double k = u > 0.0 ? 0.2 : 1.0;
        const Eigen::Vector4cd eig = pk_detail::eigenvalues_at(m, u, k);
        int upper = 0;
        for (Eigen::Index i = 0; i < 4; ++i) upper += eig(i).imag() > 0.0 ? 1 : 0;
        EXPECT_EQ(upper, 2) << u;
    }
}

TEST(DetectOnset, BaselineFlutterWithoutDivergence)
{
    const FlutterAnalysis a = analyse_flutter(baseline_targets(), WingGeometry{});
    ASSERT_TRUE(a.onset.flutter_speed_ms);
    EXPECT_FALSE(a.onset.divergence_speed_ms);
    EXPECT_FALSE(a.onset.degenerate);
    EXPECT_EQ(a.onset.critical_mode_index, 1);
    EXPECT_NEAR(*a.onset.flutter_speed_ms, 22.710, 0.1 * 22.710);
    EXPECT_GE(*a.onset.flutter_speed_ms, a.solution.speeds.front());
    EXPECT_LE(*a.onset.flutter_speed_ms, a.solution.speeds.back());
    ASSERT_TRUE(a.flutter_speed_ms);
    EXPECT_NEAR(*a.flutter_speed_ms, *a.onset.flutter_speed_ms, 0.25);
}

TEST(DetectOnset, CappedSweepReportsNothing)
{
    const PkSolution s = sweep(model_for(baseline_targets()), SpeedGrid::range(0.0, 10.0, 0.25));
    const OnsetReport r = detect_onset(s);
    EXPECT_FALSE(r.flutter_speed_ms);
    EXPECT_FALSE(r.divergence_speed_ms);
    EXPECT_EQ(r.critical_mode_index, -1);
    EXPECT_THROW(detect_onset(sweep(model_for(baseline_targets()), SpeedGrid{{0.0}})), ValidationError);
}

TEST(DetectOnset, UnstableAtFirstSpeedIsDegenerate)
{
    const PkSolution s = solution_from({0.0, 1.0}, {{cplx(0.5, 10.0), cplx(-1.0, 60.0)}, {{cplx(0.6, 10.0), cplx(-1.0, 60.0)}}});
    const OnsetReport r = detect_onset(s);
    EXPECT_TRUE(r.degenerate);
    ASSERT_TRUE(r.flutter_speed_ms);
    EXPECT_EQ(*r.flutter_speed_ms, 0.0);
    EXPECT_EQ(r.critical_mode_index, 0);
}

TEST(DetectOnset, ClassifiesDivergenceAndFlutter)
{
    // Mode 1 crosses with no oscillation (divergence) before mode 2 flutters.
    const PkSolution s = solution_from(
        {0.0, 1.0, 2.0, 3.0},
        {{cplx(-1.0, 5.0), cplx(-1.0, 60.0)}, {{cplx(-0.5, 0.0), cplx(-0.5, 60.0)}}, {{cplx(0.5, 0.0), cplx(-0.1, 60.0)}},
         {{cplx(1.0, 0.0), cplx(0.3, 60.0)}}});
    const OnsetReport r = detect_onset(s);
    ASSERT_TRUE(r.divergence_speed_ms);
    ASSERT_TRUE(r.flutter_speed_ms);
    EXPECT_NEAR(*r.divergence_speed_ms, 1.5, 1e-12);
    EXPECT_NEAR(*r.flutter_speed_ms, 2.25, 1e-12);
    EXPECT_EQ(r.critical_mode_index, 0);
}

TEST(RefineOnset, AgreesWithFineGrid)
{
    const PkModel m = model_for(baseline_targets());
    const PkSolution coarse = sweep(m, SpeedGrid::standard());
    const OnsetReport r = detect_onset(coarse);
    ASSERT_TRUE(r.flutter_bracket);
    const double refined = refine_onset(m, *r.flutter_bracket, warm_state(coarse, r.flutter_bracket->first));

    // Oracle: 0.01 m/s sweep across the bracket.
    const PkSolution fine = sweep(m, SpeedGrid::range(0.0, r.flutter_bracket->second + 0.02, 0.01));
    const OnsetReport rf = detect_onset(fine);
    ASSERT_TRUE(rf.flutter_speed_ms);
    EXPECT_NEAR(refined, *rf.flutter_speed_ms, 0.01);
    EXPECT_GE(refined, r.flutter_bracket->first);
    EXPECT_LE(refined, r.flutter_bracket->second);
}

TEST(RefineOnset, NoCrossingRejectedAndZeroWidthReturned)
{
    const PkModel m = model_for(baseline_targets());
    const auto still = still_air_points(m);
    EXPECT_THROW(refine_onset(m, {5.0, 10.0}, still), ValidationError);
    EXPECT_EQ(refine_onset(m, {23.5, 23.5}, still), 23.5);
    EXPECT_THROW(refine_onset(m, {10.0, 5.0}, still), ValidationError);
}

TEST(TrajectoryCsv, HeaderRowsAndNan)
{
    const PkModel m = model_for(baseline_targets());
    const std::string csv = trajectory_csv(sweep(m, SpeedGrid::range(0.0, 1.0, 0.5)));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "U_ms, mode, f_hz, zeta, re_lambda, im_lambda, k, converged");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_NE(csv.find("\n0, 1, "), std::string::npos);
    EXPECT_NE(csv.find(", nan, 1\n"), std::string::npos);
    EXPECT_NE(csv.find("\n1, 2, "), std::string::npos);
}
