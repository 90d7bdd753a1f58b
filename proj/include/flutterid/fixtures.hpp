#pragma once

// Bundled reference data for the XB-2 wing: identified modal parameters for
// four loading scenarios and three identification methods, scenario masses,
// wing geometry, and published flutter onset speeds.

#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace flutterid {

enum class IdMethod { n4sid, lf, frvf };

inline constexpr std::array<IdMethod, 3> all_id_methods{IdMethod::n4sid, IdMethod::lf, IdMethod::frvf};

inline std::string to_string(IdMethod m)
{
    switch (m) {
    case IdMethod::n4sid: return "n4sid";
    case IdMethod::lf: return "lf";
    case IdMethod::frvf: return "frvf";
    }
    return "n4sid";
}

inline IdMethod id_method_from_string(const std::string& s)
{
    if (s == "n4sid") return IdMethod::n4sid;
    if (s == "lf") return IdMethod::lf;
    if (s == "frvf") return IdMethod::frvf;
    throw ValidationError("unknown identification method '" + s + "' (valid: n4sid, lf, frvf)");
}

/// Three identified modes: 1st bending, 1st coupled, 2nd coupled.
struct FixtureModes {
    std::array<double, 3> frequency_hz;
    std::array<double, 3> damping_ratio;
};

struct ScenarioFixture {
    int scenario;
    double mass_kg;
    FixtureModes n4sid, lf, frvf;
    std::array<double, 3> flutter_speed_ms;  ///< published onset, order n4sid, lf, frvf

    const FixtureModes& modes(IdMethod m) const
    {
        switch (m) {
        case IdMethod::n4sid: return n4sid;
        case IdMethod::lf: return lf;
        case IdMethod::frvf: return frvf;
        }
        return n4sid;
    }

    double flutter_speed(IdMethod m) const { return flutter_speed_ms[static_cast<std::size_t>(m)]; }
};

// clang-format off
inline const std::array<ScenarioFixture, 4>& scenario_fixtures()
{
    static const std::array<ScenarioFixture, 4> table{{
        {1, 3.024,
         {{3.190, 11.896, 17.763}, {0.032, 0.066, 0.058}},
         {{3.202, 11.886, 17.703}, {0.040, 0.063, 0.061}},
         {{3.203, 11.858, 17.725}, {0.028, 0.065, 0.062}},
         {22.710, 21.498, 22.057}},
        {2, 3.172,
         {{2.957, 12.096, 17.350}, {0.021, 0.060, 0.061}},
         {{2.958, 12.134, 17.302}, {0.024, 0.057, 0.056}},
         {{2.945, 12.083, 17.294}, {0.025, 0.058, 0.060}},
         {23.336, 22.200, 22.743}},
        {3, 3.307,
         {{2.775, 12.002, 17.079}, {0.019, 0.058, 0.050}},
         {{2.769, 12.025, 17.101}, {0.022, 0.055, 0.050}},
         {{2.788, 12.014, 17.023}, {0.021, 0.057, 0.057}},
         {23.285, 22.116, 22.727}},
        {4, 3.658,
         {{2.729, 11.970, 15.067}, {0.019, 0.050, 0.046}},
         {{2.725, 11.965, 15.052}, {0.021, 0.048, 0.039}},
         {{2.727, 11.938, 15.004}, {0.019, 0.052, 0.038}},
         {23.205, 21.991, 22.590}},
    }};
    return table;
}

/// Printed percentage differences versus N4SID, [scenario][mode], for the
/// LF and FRVF columns (frequency then damping).
struct PrintedDifferences {
    std::array<std::array<double, 3>, 4> lf_frequency, frvf_frequency, lf_damping, frvf_damping;
};

inline const PrintedDifferences& printed_differences()
{
    static const PrintedDifferences d{
        {{{0.38, -0.08, -0.34}, {0.03, 0.31, -0.28}, {-0.22, 0.19, 0.13}, {-0.15, -0.04, -0.10}}},
        {{{0.41, -0.32, -0.21}, {-0.41, -0.11, -0.32}, {0.47, 0.10, -0.33}, {-0.07, -0.27, -0.42}}},
        {{{25.00, -4.55, 5.17}, {14.29, -5.00, -8.20}, {15.79, -5.17, 0.00}, {10.53, -4.00, -15.22}}},
        {{{-12.50, -1.52, 6.90}, {19.05, -3.33, -1.64}, {10.53, -1.72, 14.00}, {0.00, 4.00, -17.39}}},
    };
    return d;
}

/// Printed flutter-speed differences versus N4SID [%], per scenario.
inline constexpr std::array<double, 4> printed_lf_flutter_delta{-5.34, -4.87, -5.02, -5.23};
inline constexpr std::array<double, 4> printed_frvf_flutter_delta{-2.88, -2.54, -2.40, -2.65};
// clang-format on

inline const ScenarioFixture& scenario_fixture(int scenario)
{
    for (const ScenarioFixture& f : scenario_fixtures()) {
        if (f.scenario == scenario) return f;
    }
    throw ValidationError("unknown fixture scenario " + std::to_string(scenario) +
                          "; valid fixtures: 1..4 with method n4sid, lf or frvf (e.g. 1:n4sid)");
}

/// Parses "<scenario>:<method>".
struct FixtureRef {
    int scenario = 1;
    IdMethod method = IdMethod::n4sid;
};

inline FixtureRef parse_fixture_ref(const std::string& text)
{
    const auto colon = text.find(':');
    const std::string valid = "; valid fixtures: 1..4 with method n4sid, lf or frvf (e.g. 1:n4sid)";
    if (colon == std::string::npos) throw ValidationError("malformed fixture '" + text + "'" + valid);
    FixtureRef ref;
    try {
        std::size_t used = 0;
        ref.scenario = std::stoi(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ValidationError("malformed fixture '" + text + "'" + valid);
    }
    scenario_fixture(ref.scenario);
    try {
        ref.method = id_method_from_string(text.substr(colon + 1));
    } catch (const ValidationError&) {
        throw ValidationError("unknown fixture method in '" + text + "'" + valid);
    }
    return ref;
}

/// Cantilever-like real shapes sin((2n+1) pi c / 2p) over `channels` sensors.
inline Eigen::VectorXcd synthetic_shape(int mode_index, Eigen::Index channels)
{
    Eigen::VectorXcd v(channels);
    for (Eigen::Index c = 0; c < channels; ++c) {
        const double x = static_cast<double>(c + 1) / static_cast<double>(channels);
        v(c) = std::sin((2 * mode_index + 1) * std::numbers::pi * x / 2.0);
    }
    return v;
}

inline ModalParameterSet fixture_modal_set(const FixtureModes& fm, Eigen::Index channels = 8)
{
    std::vector<Mode> modes;
    for (int n = 0; n < 3; ++n) {
        const auto i = static_cast<std::size_t>(n);
        modes.push_back(Mode::from_modal(fm.frequency_hz[i], fm.damping_ratio[i], synthetic_shape(n, channels)));
    }
    return {std::move(modes), SourceMethod::external};
}

/// 2-25 Hz, 2048 bins: the grid used for synthetic identification checks.
inline FrequencyGrid default_synthetic_grid() { return FrequencyGrid::linspace(2.0, 25.0, 2048); }

} // namespace flutterid
