#pragma once

// Run configuration: flat `key = value` file with [geometry], [identify] and
// [flutter] sections, overridable from the command line.

#include "flutterid/aero_rom.hpp"
#include "flutterid/error.hpp"
#include "flutterid/fixtures.hpp"
#include "flutterid/frf_io.hpp"
#include "flutterid/pk_flutter.hpp"
#include "flutterid/stabilization.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace flutterid {

enum class IdentifyMethod { frvf, lf, none };

inline std::string to_string(IdentifyMethod m)
{
    switch (m) {
    case IdentifyMethod::frvf: return "frvf";
    case IdentifyMethod::lf: return "lf";
    case IdentifyMethod::none: return "none";
    }
    return "none";
}

inline IdentifyMethod identify_method_from_string(const std::string& s)
{
    if (s == "frvf") return IdentifyMethod::frvf;
    if (s == "lf") return IdentifyMethod::lf;
    if (s == "none") return IdentifyMethod::none;
    throw ValidationError("unknown identification method '" + s + "' (expected frvf, lf or none)");
}

namespace config_detail {

inline std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> parts;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

template <class T>
T parse_number(const std::string& raw, const std::string& what)
{
    const std::string s = std::string(flutterid::detail::trim(raw));
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("cannot parse " + what + " from '" + raw + "'");
    }
    return value;
}

} // namespace config_detail

/// "lo:hi:step" integer orders.
inline std::vector<int> parse_orders(const std::string& text)
{
    const auto p = config_detail::split(text, ':');
    if (p.size() != 3) throw ValidationError("orders must be lo:hi:step, got '" + text + "'");
    return order_range(config_detail::parse_number<int>(p[0], "order"), config_detail::parse_number<int>(p[1], "order"),
                       config_detail::parse_number<int>(p[2], "order step"));
}

/// "lo:hi" in Hz.
inline std::pair<double, double> parse_band(const std::string& text)
{
    const auto p = config_detail::split(text, ':');
    if (p.size() != 2) throw ValidationError("band must be lo:hi, got '" + text + "'");
    const double lo = config_detail::parse_number<double>(p[0], "band");
    const double hi = config_detail::parse_number<double>(p[1], "band");
    require(std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && hi > lo, "band must satisfy 0 < lo < hi");
    return {lo, hi};
}

/// "lo:hi:step" in m/s.
inline SpeedGrid parse_speeds(const std::string& text)
{
    const auto p = config_detail::split(text, ':');
    if (p.size() != 3) throw ValidationError("speeds must be lo:hi:step, got '" + text + "'");
    return SpeedGrid::range(config_detail::parse_number<double>(p[0], "speed"),
                            config_detail::parse_number<double>(p[1], "speed"),
                            config_detail::parse_number<double>(p[2], "speed step"));
}

struct PipelineConfig {
    /// FRF file, modes CSV (flutter only) or "fixture:<scenario>:<method>".
    std::string input;
    IdentifyMethod method = IdentifyMethod::frvf;
    std::vector<int> orders = order_range(6, 24, 2);
    std::optional<std::pair<double, double>> band;
    WingGeometry geometry;
    bool mass_given = false;  ///< total_mass_kg set explicitly (else fixture mass)
    SpeedGrid speeds = SpeedGrid::standard();
    double noise = 0.0;
    std::uint64_t seed = 1;
    int channels = 8;
    std::optional<double> zeta_override;
    std::filesystem::path out = "flutterid-out";

    std::optional<FixtureRef> fixture() const
    {
        const std::string prefix = "fixture:";
        if (input.rfind(prefix, 0) != 0) return std::nullopt;
        return parse_fixture_ref(input.substr(prefix.size()));
    }

    /// Geometry with the fixture scenario's mass unless one was given.
    WingGeometry effective_geometry() const
    {
        WingGeometry g = geometry;
        if (!mass_given) {
            if (const auto fx = fixture()) g.total_mass_kg = scenario_fixture(fx->scenario).mass_kg;
        }
        return g;
    }

    void validate() const
    {
        require(!input.empty(), "no input given (use --fixture <scenario>:<method> or --input <path>)");
        fixture();
        geometry.validate();
        speeds.validate();
        require(!orders.empty(), "order range is empty");
        require(std::isfinite(noise) && noise >= 0.0, "noise must be >= 0");
        require(channels >= 1, "channels must be >= 1");
        if (zeta_override) require(*zeta_override >= 0.0 && *zeta_override < 1.0, "zeta override must lie in [0, 1)");
        require(!out.empty(), "output directory must not be empty");
    }
};

/// Reads a config file; unknown sections or keys are rejected.
inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig cfg = {})
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("config: " + std::string(e.what()));
    }
    using config_detail::parse_number;
    const std::set<std::string> sections{"geometry", "identify", "flutter"};
    for (const auto& [name, node] : tree) {
        if (node.empty()) throw ValidationError("config: key '" + name + "' must live in a section");
        if (!sections.count(name)) throw ValidationError("config: unknown section [" + name + "]");
        for (const auto& [key, leaf] : node) {
            const std::string v = leaf.get_value<std::string>();
            const std::string where = "[" + name + "] " + key;
            if (name == "geometry") {
                WingGeometry& g = cfg.geometry;
                if (key == "chord_m") g.chord_m = parse_number<double>(v, where);
                else if (key == "span_m") g.span_m = parse_number<double>(v, where);
                else if (key == "flexural_axis_fraction") g.flexural_axis_fraction = parse_number<double>(v, where);
                else if (key == "lift_curve_slope") g.lift_curve_slope = parse_number<double>(v, where);
                else if (key == "eccentricity") g.eccentricity = parse_number<double>(v, where);
                else if (key == "air_density") g.air_density = parse_number<double>(v, where);
                else if (key == "total_mass_kg") {
                    g.total_mass_kg = parse_number<double>(v, where);
                    cfg.mass_given = true;
                } else {
                    throw ValidationError("config: unknown key " + where);
                }
            } else if (name == "identify") {
                if (key == "input") cfg.input = v;
                else if (key == "method") cfg.method = identify_method_from_string(v);
                else if (key == "orders") cfg.orders = parse_orders(v);
                else if (key == "band") cfg.band = parse_band(v);
                else if (key == "noise") cfg.noise = parse_number<double>(v, where);
                else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(v, where);
                else if (key == "channels") cfg.channels = parse_number<int>(v, where);
                else if (key == "out") cfg.out = v;
                else throw ValidationError("config: unknown key " + where);
            } else {
                if (key == "speeds") cfg.speeds = parse_speeds(v);
                else if (key == "zeta_override") cfg.zeta_override = parse_number<double>(v, where);
                else throw ValidationError("config: unknown key " + where);
            }
        }
    }
    return cfg;
}

} // namespace flutterid
