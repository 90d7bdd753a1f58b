#include "flutterid/fixtures.hpp"
#include "flutterid/vector_fitting.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace flutterid;
using flutterid::testing::nearest_rel;
using flutterid::testing::rel_err;

namespace {

std::vector<cplx> planted_poles(const ModalParameterSet& set)
{
    std::vector<cplx> poles;
    for (const Mode& m : set.modes) {
        poles.push_back(m.pole);
        poles.push_back(std::conj(m.pole));
    }
    return poles;
}

bool conjugate_closed(const std::vector<cplx>& poles)
{
    for (const cplx p : poles) {
        if (nearest_rel(poles, std::conj(p)) > 1e-14) return false;
    }
    return true;
}

} // namespace

TEST(InitPoles, LinearSpacingIncludesEndpoints)
{
    const auto poles = init_poles(6, {2.0, 25.0});
    ASSERT_EQ(poles.size(), 6u);
    const double betas[] = {two_pi * 2.0, two_pi * 13.5, two_pi * 25.0};
    for (int n = 0; n < 3; ++n) {
        EXPECT_NEAR(poles[2 * n].imag(), betas[n], 1e-12 * betas[n]);
        EXPECT_NEAR(poles[2 * n].real(), -betas[n] / 100.0, 1e-12 * betas[n]);
        EXPECT_EQ(poles[2 * n + 1], std::conj(poles[2 * n]));
    }
}

TEST(InitPoles, SinglePairAtMidpoint)
{
    const auto poles = init_poles(2, {2.0, 25.0});
    EXPECT_NEAR(poles[0].imag(), two_pi * 13.5, 1e-12);
    EXPECT_THROW(init_poles(2, {1.0, 1.0}), ValidationError);
    EXPECT_THROW(init_poles(3, {1.0, 2.0}), ValidationError);
    EXPECT_THROW(init_poles(4, {0.0, 2.0}), ValidationError);
}

TEST(PoleRelocation, TruePolesAreAFixedPoint)
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 4, 3.0, 22.0);
        const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 400));
        const auto truth = planted_poles(set);
        for (bool relaxed : {true, false}) {
            const RelocationResult step = pole_relocation_step(frf, truth, relaxed);
            for (const cplx p : step.poles) EXPECT_LT(nearest_rel(truth, p), 1e-8);
        }
    }
}

TEST(PoleRelocation, RecoversTwoPlantedPairs)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 2, 3, 3.0, 22.0);
        const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 600));
        std::uniform_real_distribution<double> where(2.0, 25.0);
        std::vector<cplx> poles;
        for (int n = 0; n < 2; ++n) {
            const double b = two_pi * where(rng);
            poles.emplace_back(-b / 100.0, b);
            poles.emplace_back(-b / 100.0, -b);
        }
        for (int it = 0; it < 10; ++it) poles = pole_relocation_step(frf, poles, true).poles;
        for (const cplx p : planted_poles(set)) EXPECT_LT(nearest_rel(poles, p), 1e-6);
    }
}

TEST(PoleRelocation, UnstablePolesAreReflected)
{
    // Data generated by an unstable pair pulls the relocation into Re > 0.
    Mode unstable;
    unstable.pole = {0.8, two_pi * 8.0};
    unstable.frequency_hz = std::abs(unstable.pole) / two_pi;
    unstable.shape = Eigen::VectorXcd::Ones(2);
    const ModalParameterSet set({unstable, Mode::from_modal(15.0, 0.02, Eigen::VectorXcd::Ones(2))},
                                SourceMethod::external);
    const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 500));
    std::vector<cplx> poles = init_poles(4, {2.0, 25.0});
    int reflected = 0;
    for (int it = 0; it < 15; ++it) {
        const RelocationResult step = pole_relocation_step(frf, poles, true);
        reflected += step.reflected;
        poles = step.poles;
        for (const cplx p : poles) EXPECT_LT(p.real(), 0.0);
    }
    EXPECT_GT(reflected, 0);

    VfConfig free;
    free.enforce_stable_poles = false;
    poles = planted_poles(set);
    const RelocationResult step = pole_relocation_step(frf, poles, true, free);
    EXPECT_LT(nearest_rel(step.poles, unstable.pole), 1e-8);
}

TEST(PoleRelocation, RankDeficientWhenOverParameterized)
{
    // One exact mode fitted with many poles leaves sigma undetermined.
    const ModalParameterSet set({Mode::from_modal(6.0, 0.02, Eigen::VectorXcd::Ones(1))}, SourceMethod::external);
    const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 300));
    std::vector<cplx> poles = planted_poles(set);
    for (const cplx p : init_poles(6, {3.0, 20.0})) poles.push_back(p);
    VfConfig cfg;
    cfg.order = 8;
    EXPECT_THROW(pole_relocation_step(frf, poles, false, cfg), RankDeficientError);
    cfg.allow_rank_deficient = true;
    EXPECT_NO_THROW(pole_relocation_step(frf, poles, false, cfg));
}

TEST(ResidueIdentification, ExactPolesGiveExactFit)
{
    const ModalParameterSet set = fixture_modal_set(scenario_fixture(1).n4sid);
    const FrfDataset frf = synthesize_frf(set, default_synthetic_grid());
    const VfResult fit = residue_identification(frf, planted_poles(set));
    EXPECT_LT(fit.rms_fit_error, 1e-10);
    for (std::size_t m = 0; m + 1 < fit.poles.size(); m += 2) {
        EXPECT_EQ(fit.residues.col(static_cast<Eigen::Index>(m + 1)),
                  fit.residues.col(static_cast<Eigen::Index>(m)).conjugate());
    }
}

TEST(ResidueIdentification, SdofResidueMatchesPlanted)
{
    const Mode m = Mode::from_modal(7.5, 0.04, Eigen::VectorXcd::Constant(1, cplx(0.7, 0.0)));
    const ModalParameterSet set({m}, SourceMethod::external);
    const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 200));
    const VfResult fit = residue_identification(frf, planted_poles(set));
    const cplx planted = modal_residue(m)(0);
    EXPECT_LT(std::abs(fit.residues(0, 0) - planted) / std::abs(planted), 1e-10);
}

TEST(ResidueIdentification, NearDuplicatePolesRejected)
{
    const ModalParameterSet set({Mode::from_modal(7.5, 0.04, Eigen::VectorXcd::Ones(1))}, SourceMethod::external);
    const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 200));
    std::vector<cplx> poles = planted_poles(set);
    poles.push_back(set[0].pole * (1.0 + 1e-13));
    poles.push_back(std::conj(poles.back()));
    EXPECT_THROW(residue_identification(frf, poles), NumericalError);
}

TEST(ResidueIdentification, AsymptoticTermsNeverHurt)
{
    // Out-of-band mode at 40 Hz seen through a 2-25 Hz window.
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        ModalParameterSet in_band = flutterid::testing::random_modes(rng, 2, 3, 4.0, 20.0);
        std::vector<Mode> modes = in_band.modes;
        modes.push_back(Mode::from_modal(40.0, 0.03, Eigen::VectorXcd::Constant(3, cplx(2.0, 0.0))));
        const ModalParameterSet set(modes, SourceMethod::external);
        const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 500));
        VfConfig none;
        none.include_d_term = false;
        none.include_e_term = false;
        VfConfig both;
        both.include_d_term = true;
        both.include_e_term = true;
        const auto poles = planted_poles(in_band);
        const double e0 = residue_identification(frf, poles, none).rms_fit_error;
        const double e1 = residue_identification(frf, poles, both).rms_fit_error;
        EXPECT_GT(e0, 0.0);
        EXPECT_TRUE(std::isfinite(e0));
        EXPECT_LT(e1, e0);
    }
}

TEST(FrvfIdentify, ScenarioOneNoiseFree)
{
    for (const ScenarioFixture& fx : scenario_fixtures()) {
        const ModalParameterSet set = fixture_modal_set(fx.n4sid);
        const FrfDataset frf = synthesize_frf(set, default_synthetic_grid());
        VfConfig cfg;
        cfg.order = 6;
        const FrvfOutcome out = frvf_identify(frf, cfg);
        EXPECT_TRUE(out.fit.converged);
        ASSERT_EQ(out.modes.size(), 3u);
        for (std::size_t n = 0; n < 3; ++n) {
            EXPECT_LT(rel_err(out.modes[n].frequency_hz, set[n].frequency_hz), 5e-4);
            EXPECT_LT(rel_err(out.modes[n].damping_ratio, set[n].damping_ratio), 1e-2);
        }
    }
}

TEST(FrvfIdentify, OnePercentNoiseMedianAccuracy)
{
    const ModalParameterSet set = fixture_modal_set(scenario_fixture(1).n4sid);
    std::vector<std::vector<double>> ferr(3), zerr(3);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const FrfDataset frf = synthesize_frf(set, default_synthetic_grid(), 0.01, seed);
        const FrvfOutcome out = frvf_identify(frf, {});
        for (std::size_t n = 0; n < 3; ++n) {
            const std::size_t k = flutterid::testing::nearest_mode(out.modes, set[n].frequency_hz);
            ferr[n].push_back(rel_err(out.modes[k].frequency_hz, set[n].frequency_hz));
            zerr[n].push_back(rel_err(out.modes[k].damping_ratio, set[n].damping_ratio));
        }
    }
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_LT(flutterid::testing::median(ferr[n]), 5e-3);
        EXPECT_LT(flutterid::testing::median(zerr[n]), 0.10);
    }
}

TEST(FrvfIdentify, UnderModelledOrderDoesNotCrash)
{
    const ModalParameterSet set = fixture_modal_set(scenario_fixture(1).n4sid);
    const FrfDataset frf = synthesize_frf(set, default_synthetic_grid());
    VfConfig cfg;
    cfg.order = 2;
    const FrvfOutcome out = frvf_identify(frf, cfg);
    EXPECT_GT(out.fit.rms_fit_error, 0.05);
    EXPECT_TRUE(std::isfinite(out.fit.rms_fit_error));
}

TEST(FrvfIdentify, RelaxedAndUnrelaxedAgree)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 4, 3.0, 22.0);
        const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 800));
        VfConfig relaxed;
        VfConfig plain;
        plain.relaxed = false;
        plain.max_iterations = 60;
        const FrvfOutcome a = frvf_identify(frf, relaxed);
        const FrvfOutcome b = frvf_identify(frf, plain);
        for (const cplx p : a.fit.poles) EXPECT_LT(nearest_rel(b.fit.poles, p), 1e-6);
    }
}

TEST(FrvfProperties, ConjugateClosureAndStability)
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> order(1, 5);
    for (int trial = 0; trial < 15; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 2, 3.0, 22.0);
        const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 300), 0.02, trial);
        VfConfig cfg;
        cfg.order = 2 * order(rng);
        cfg.max_iterations = 10;
        const FrvfOutcome out = frvf_identify(frf, cfg);
        EXPECT_TRUE(conjugate_closed(out.fit.poles));
        for (const cplx p : out.fit.poles) EXPECT_LT(p.real(), 0.0);
        EXPECT_TRUE(std::isfinite(out.fit.rms_fit_error));
        EXPECT_GE(out.fit.rms_fit_error, 0.0);
    }
}
