#include "flutterid/frf.hpp"
#include "flutterid/frf_io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace flutterid;
using flutterid::testing::rel_err;

namespace {

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("flutterid_" + name);
}

} // namespace

TEST(FrequencyGrid, RejectsBadValues)
{
    EXPECT_THROW(FrequencyGrid({1.0}), ValidationError);
    EXPECT_THROW(FrequencyGrid({0.0, 1.0}), ValidationError);
    EXPECT_THROW(FrequencyGrid({1.0, 1.0}), ValidationError);
    EXPECT_THROW(FrequencyGrid({2.0, 1.0}), ValidationError);
    const FrequencyGrid g = FrequencyGrid::linspace(2.0, 25.0, 2048);
    EXPECT_EQ(g.size(), 2048u);
    EXPECT_DOUBLE_EQ(g.lo(), 2.0);
    EXPECT_DOUBLE_EQ(g.hi(), 25.0);
    EXPECT_DOUBLE_EQ(g.s(0).imag(), two_pi * 2.0);
}

TEST(PoleConversion, KnownValues)
{
    const ModalPoint real_pole = pole_to_modal({-1.0, 0.0});
    EXPECT_DOUBLE_EQ(real_pole.frequency_hz, 1.0 / two_pi);
    EXPECT_DOUBLE_EQ(real_pole.damping_ratio, 1.0);

    const ModalPoint undamped = pole_to_modal({0.0, 10.0});
    EXPECT_DOUBLE_EQ(undamped.frequency_hz, 10.0 / two_pi);
    EXPECT_DOUBLE_EQ(undamped.damping_ratio, 0.0);

    const double w = two_pi * 11.896;
    const double z = 0.066;
    const ModalPoint mp = pole_to_modal({-z * w, w * std::sqrt(1 - z * z)});
    EXPECT_LT(rel_err(mp.frequency_hz, 11.896), 1e-12);
    EXPECT_LT(rel_err(mp.damping_ratio, 0.066), 1e-12);

    EXPECT_THROW(pole_to_modal({0.0, 0.0}), ValidationError);
}

TEST(PoleConversion, RoundTripProperty)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> f(0.1, 500.0), z(0.0, 0.95);
    for (int trial = 0; trial < 500; ++trial) {
        const double fh = f(rng);
        const double zeta = z(rng);
        const Mode m = Mode::from_modal(fh, zeta);
        EXPECT_LT(rel_err(std::abs(m.pole), m.omega_n()), 1e-12);
        const ModalPoint back = pole_to_modal(m.pole);
        EXPECT_LT(rel_err(back.frequency_hz, fh), 1e-12);
        if (zeta > 1e-6) EXPECT_LT(rel_err(back.damping_ratio, zeta), 1e-12);
        EXPECT_NEAR(m.omega_d(), m.omega_n() * std::sqrt(1 - zeta * zeta), 1e-9 * m.omega_n());
    }
}

TEST(Synthesis, SdofPeakAtResonance)
{
    const double f = 3.19, zeta = 0.032;
    ModalParameterSet set({Mode::from_modal(f, zeta, Eigen::VectorXcd::Ones(1))}, SourceMethod::external);
    const FrequencyGrid grid = FrequencyGrid::linspace(2.0, 5.0, 3001);
    const FrfDataset frf = synthesize_frf(set, grid);
    Eigen::Index peak = 0;
    frf.responses.row(0).cwiseAbs().maxCoeff(&peak);
    const double resonance = f * std::sqrt(1 - 2 * zeta * zeta);
    std::size_t nearest = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid.hz(i) - resonance) < std::abs(grid.hz(nearest) - resonance)) nearest = i;
    }
    EXPECT_EQ(static_cast<std::size_t>(peak), nearest);
}

TEST(Synthesis, ShapeAndErrors)
{
    std::mt19937_64 rng(3);
    const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 4, 2.0, 20.0);
    const FrequencyGrid grid = FrequencyGrid::linspace(1.0, 30.0, 257);
    const FrfDataset frf = synthesize_frf(set, grid);
    EXPECT_EQ(frf.bins(), 257);
    EXPECT_EQ(frf.channels(), 4);
    EXPECT_TRUE(frf.responses.allFinite());

    EXPECT_THROW(synthesize_frf(ModalParameterSet{}, grid), ValidationError);
    ModalParameterSet ragged({Mode::from_modal(3.0, 0.02, Eigen::VectorXcd::Ones(2)),
                              Mode::from_modal(5.0, 0.02, Eigen::VectorXcd::Ones(3))},
                             SourceMethod::external);
    EXPECT_THROW(synthesize_frf(ragged, grid), ValidationError);
}

TEST(Synthesis, ConjugateSymmetry)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 2, 3, 1.0, 40.0);
        for (double w : {0.7, 13.0, 101.0}) {
            const Eigen::VectorXcd pos = evaluate_modal_model(set, {0.0, w});
            const Eigen::VectorXcd neg = evaluate_modal_model(set, {0.0, -w});
            EXPECT_LT((neg - pos.conjugate()).norm(), 1e-12 * pos.norm());
        }
    }
}

TEST(Synthesis, NoiseIsDeterministicAndScaled)
{
    ModalParameterSet set({Mode::from_modal(5.0, 0.02, Eigen::VectorXcd::Ones(2))}, SourceMethod::external);
    const FrequencyGrid grid = FrequencyGrid::linspace(1.0, 10.0, 4000);
    const FrfDataset clean = synthesize_frf(set, grid);
    const FrfDataset a = synthesize_frf(set, grid, 0.05, 42);
    const FrfDataset b = synthesize_frf(set, grid, 0.05, 42);
    const FrfDataset c = synthesize_frf(set, grid, 0.05, 43);
    EXPECT_EQ(a.responses, b.responses);
    EXPECT_NE(a.responses, c.responses);
    const double rms_clean = std::sqrt(clean.responses.row(0).squaredNorm() / 4000.0);
    const double rms_noise = std::sqrt((a.responses - clean.responses).row(0).squaredNorm() / 4000.0);
    EXPECT_NEAR(rms_noise / rms_clean, 0.05, 0.003);
}

TEST(Realization, DiagonalBlockGivesOneMode)
{
    StateSpaceRealization r;
    r.E = Eigen::MatrixXcd::Identity(2, 2);
    r.A.resize(2, 2);
    r.A << cplx(-1, 0), cplx(10, 0), cplx(-10, 0), cplx(-1, 0);
    r.B = Eigen::MatrixXcd::Ones(2, 1);
    r.C = Eigen::MatrixXcd::Ones(1, 2);
    r.D = Eigen::MatrixXcd::Zero(1, 1);
    const ModalExtraction ex = realization_to_modal(r, {0.1, 10.0});
    ASSERT_EQ(ex.modes.size(), 1u);
    EXPECT_LT(rel_err(ex.modes[0].frequency_hz, std::sqrt(101.0) / two_pi), 1e-12);
    EXPECT_LT(rel_err(ex.modes[0].pole, cplx(-1, 10)), 1e-12);
}

TEST(Realization, ZeroPoleGoesToDiscardReport)
{
    StateSpaceRealization r;
    r.E = Eigen::MatrixXcd::Identity(3, 3);
    r.A = Eigen::MatrixXcd::Zero(3, 3);
    r.A(0, 0) = -1.0;
    r.A(0, 1) = 10.0;
    r.A(1, 0) = -10.0;
    r.A(1, 1) = -1.0;
    r.B = Eigen::MatrixXcd::Ones(3, 1);
    r.C = Eigen::MatrixXcd::Ones(1, 3);
    r.D = Eigen::MatrixXcd::Zero(1, 1);
    const ModalExtraction ex = realization_to_modal(r, {0.1, 10.0});
    ASSERT_EQ(ex.modes.size(), 1u);
    ASSERT_EQ(ex.discarded.size(), 1u);
    EXPECT_EQ(ex.discarded[0].reason, DiscardReason::real_valued);
    EXPECT_EQ(std::abs(ex.discarded[0].value), 0.0);
}

TEST(Realization, ExactModalRealizationRoundTrip)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 4, 2.0, 25.0);
        // Complex diagonal realization of the modal model.
        StateSpaceRealization r;
        r.E = Eigen::MatrixXcd::Identity(6, 6);
        r.A = Eigen::MatrixXcd::Zero(6, 6);
        r.B = Eigen::MatrixXcd::Ones(6, 1);
        r.C.resize(4, 6);
        r.D = Eigen::MatrixXcd::Zero(4, 1);
        for (int n = 0; n < 3; ++n) {
            r.A(2 * n, 2 * n) = set[n].pole;
            r.A(2 * n + 1, 2 * n + 1) = std::conj(set[n].pole);
            r.C.col(2 * n) = modal_residue(set[n]);
            r.C.col(2 * n + 1) = modal_residue(set[n]).conjugate();
        }
        const ModalExtraction ex = realization_to_modal(r, {1.0, 30.0});
        ASSERT_EQ(ex.modes.size(), 3u);
        for (int n = 0; n < 3; ++n) {
            EXPECT_LT(rel_err(ex.modes[n].frequency_hz, set[n].frequency_hz), 1e-8);
            EXPECT_LT(rel_err(ex.modes[n].damping_ratio, set[n].damping_ratio), 1e-8);
        }
        const Eigen::VectorXcd h_real = r.transfer({0.0, 40.0}).col(0);
        EXPECT_LT((h_real - evaluate_modal_model(set, {0.0, 40.0})).norm(), 1e-10 * h_real.norm());
    }
}

TEST(Realization, NoModeInBandThrows)
{
    StateSpaceRealization r;
    r.E = Eigen::MatrixXcd::Identity(2, 2);
    r.A.resize(2, 2);
    r.A << cplx(-1, 0), cplx(10, 0), cplx(-10, 0), cplx(-1, 0);
    r.B = Eigen::MatrixXcd::Ones(2, 1);
    r.C = Eigen::MatrixXcd::Ones(1, 2);
    r.D = Eigen::MatrixXcd::Zero(1, 1);
    EXPECT_THROW(realization_to_modal(r, {5.0, 10.0}), NumericalError);
}

TEST(FrfFile, ParsesWellFormedFile)
{
    std::ostringstream text;
    text << "# frf kind=receptance channels=3\n";
    for (int i = 1; i <= 10; ++i) text << i << ", 1, 0, 2, -1, 3.5, 0.25\n";
    std::istringstream in(text.str());
    const FrfDataset d = parse_frf(in);
    EXPECT_EQ(d.channels(), 3);
    EXPECT_EQ(d.bins(), 10);
    EXPECT_EQ(d.responses(1, 4), cplx(2, -1));
}

TEST(FrfFile, RejectsMalformedInput)
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return parse_frf(in);
    };
    try {
        parse("# frf kind=receptance channels=1\n2, 1, 0\n1, 1, 0\n");
        FAIL() << "expected a grid error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("non-monotonic grid"), std::string::npos);
    }
    EXPECT_THROW(parse("frf kind=receptance channels=1\n1, 1, 0\n2, 1, 0\n"), ValidationError);
    EXPECT_THROW(parse("# frf kind=velocity channels=1\n1, 1, 0\n2, 1, 0\n"), ValidationError);
    EXPECT_THROW(parse("# frf kind=receptance\n1, 1, 0\n2, 1, 0\n"), ValidationError);
    EXPECT_THROW(parse("# frf kind=receptance channels=1\n1, 1, 0\n2, nan, 0\n"), ValidationError);
    EXPECT_THROW(parse("# frf kind=receptance channels=2\n1, 1, 0\n2, 1, 0\n"), ValidationError);
}

TEST(FrfFile, StoreLoadIsBitIdentical)
{
    std::mt19937_64 rng(8);
    const ModalParameterSet set = flutterid::testing::random_modes(rng, 3, 5, 2.0, 25.0);
    const FrfDataset frf = synthesize_frf(set, FrequencyGrid::linspace(2.0, 25.0, 513), 0.01, 9);
    const auto path = temp_file("roundtrip.csv");
    store_frf(frf, path);
    const FrfDataset back = load_frf(path);
    EXPECT_EQ(back.grid, frf.grid);
    EXPECT_EQ(back.responses, frf.responses);
    EXPECT_EQ(back.kind, frf.kind);
    std::filesystem::remove(path);
}

TEST(FrfDataset, ReceptanceConversion)
{
    ModalParameterSet set({Mode::from_modal(4.0, 0.03, Eigen::VectorXcd::Ones(1))}, SourceMethod::external);
    const FrequencyGrid grid = FrequencyGrid::linspace(1.0, 10.0, 64);
    const FrfDataset rec = synthesize_frf(set, grid);
    Eigen::MatrixXcd acc = rec.responses;
    for (Eigen::Index j = 0; j < acc.cols(); ++j) acc.col(j) *= -grid.omega(j) * grid.omega(j);
    const FrfDataset back = FrfDataset(grid, acc, FrfKind::accelerance).to_receptance();
    EXPECT_LT((back.responses - rec.responses).norm(), 1e-12 * rec.responses.norm());
}
