#pragma once

// Command implementations behind the CLI: synth, identify, flutter and the
// end-to-end pipeline. Every file goes into PipelineConfig::out.

#include "flutterid/config.hpp"
#include "flutterid/frf_io.hpp"
#include "flutterid/loewner.hpp"
#include "flutterid/vector_fitting.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace flutterid {

namespace artifact {
inline constexpr const char* frf = "frf.csv";
inline constexpr const char* modes = "modes.csv";
inline constexpr const char* diagram = "stabilization.csv";
inline constexpr const char* trajectories = "trajectories.csv";
inline constexpr const char* report_text = "report.txt";
inline constexpr const char* report_json = "report.json";
inline constexpr const char* manifest = "manifest.sha256";
} // namespace artifact

namespace pipeline_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::filesystem::path prepare_out(const PipelineConfig& cfg)
{
    std::filesystem::create_directories(cfg.out);
    return cfg.out;
}

inline std::string number(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

class Stopwatch {
public:
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

} // namespace pipeline_detail

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

// ---------------------------------------------------------------------------
// Modes CSV

struct ModeRow {
    int mode = 0;
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
    std::string method;
};

inline std::string modes_csv(const ModalParameterSet& modes, const std::string& method)
{
    std::string out = "mode, f_hz, zeta, method\n";
    for (std::size_t i = 0; i < modes.size(); ++i) {
        out += std::to_string(i + 1) + ", " + pipeline_detail::number(modes[i].frequency_hz) + ", " +
               pipeline_detail::number(modes[i].damping_ratio) + ", " + method + "\n";
    }
    return out;
}

inline std::vector<ModeRow> parse_modes_csv(const std::string& text)
{
    std::vector<ModeRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row(flutterid::detail::trim(line));
        if (row.empty() || row[0] == '#') continue;
        if (!header) {
            if (row.rfind("mode", 0) != 0) throw ValidationError("modes file: missing 'mode, f_hz, zeta, method' header");
            header = true;
            continue;
        }
        const auto cells = config_detail::split(row, ',');
        if (cells.size() != 4) throw ValidationError("modes file line " + std::to_string(line_no) + ": expected 4 fields");
        const std::string where = "modes file line " + std::to_string(line_no);
        rows.push_back({config_detail::parse_number<int>(cells[0], where), flutterid::detail::parse_double(cells[1], line_no),
                        flutterid::detail::parse_double(cells[2], line_no), std::string(flutterid::detail::trim(cells[3]))});
    }
    require(header, "modes file is empty");
    return rows;
}

inline ModalParameterSet modal_set_from_rows(const std::vector<ModeRow>& rows)
{
    std::vector<Mode> modes;
    for (const ModeRow& r : rows) modes.push_back(Mode::from_modal(r.frequency_hz, r.damping_ratio));
    return {std::move(modes), SourceMethod::external};
}

// ---------------------------------------------------------------------------
// Report

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunReport {
    std::string input;
    std::string method;  ///< identification method, or the fixture column used
    ModalParameterSet modes;
    ModalTargets targets;
    std::optional<double> zeta_override;
    Calibration calibration;
    std::pair<double, double> speed_range{0.0, 0.0};
    OnsetReport onset;
    std::optional<double> flutter_speed_ms;
    std::optional<double> divergence_speed_ms;
    std::vector<StageTiming> timings;
    std::vector<std::string> warnings;

    /// Every speed lies inside the swept range.
    void check() const
    {
        auto inside = [&](const std::optional<double>& v) {
            return !v || (*v >= speed_range.first && *v <= speed_range.second);
        };
        if (!inside(flutter_speed_ms) || !inside(divergence_speed_ms) || !inside(onset.flutter_speed_ms) ||
            !inside(onset.divergence_speed_ms)) {
            throw NumericalError("reported speed outside the swept range");
        }
    }

    nlohmann::ordered_json to_json() const
    {
        using nlohmann::ordered_json;
        auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
        ordered_json j;
        j["input"] = input;
        j["method"] = method;
        ordered_json mj = ordered_json::array();
        for (std::size_t i = 0; i < modes.size(); ++i) {
            mj.push_back({{"mode", i + 1}, {"f_hz", modes[i].frequency_hz}, {"zeta", modes[i].damping_ratio}});
        }
        j["modes"] = mj;
        j["targets"] = {{"bending_hz", targets.bending_hz},
                        {"torsion_hz", targets.torsion_hz},
                        {"bending_zeta", targets.bending_zeta},
                        {"torsion_zeta", targets.torsion_zeta}};
        j["zeta_override"] = opt(zeta_override);
        j["stiffness"] = {{"EI", calibration.stiffness.EI},
                          {"GJ", calibration.stiffness.GJ},
                          {"residual", calibration.residual},
                          {"iterations", calibration.iterations}};
        j["speed_range_ms"] = {speed_range.first, speed_range.second};
        j["flutter_speed_ms"] = opt(flutter_speed_ms);
        j["divergence_speed_ms"] = opt(divergence_speed_ms);
        j["grid_flutter_speed_ms"] = opt(onset.flutter_speed_ms);
        j["grid_divergence_speed_ms"] = opt(onset.divergence_speed_ms);
        j["critical_mode"] = onset.critical_mode_index >= 0 ? ordered_json(onset.critical_mode_index + 1)
                                                            : ordered_json(nullptr);
        j["degenerate"] = onset.degenerate;
        ordered_json tj = ordered_json::object();
        for (const StageTiming& t : timings) tj[t.stage] = t.seconds;
        j["timings_s"] = tj;
        j["warnings"] = warnings;
        j["notes"] = onset.notes;
        return j;
    }

    /// Same content as to_json(), one `key: value` line per leaf.
    std::string to_text() const
    {
        std::ostringstream out;
        std::function<void(const std::string&, const nlohmann::ordered_json&)> emit =
            [&](const std::string& key, const nlohmann::ordered_json& v) {
                if (v.is_object()) {
                    for (const auto& [k, child] : v.items()) emit(key.empty() ? k : key + "." + k, child);
                } else if (v.is_array() && !v.empty() && v.front().is_structured()) {
                    for (std::size_t i = 0; i < v.size(); ++i) emit(key + "[" + std::to_string(i) + "]", v[i]);
                } else if (v.is_string()) {
                    out << key << ": " << v.get<std::string>() << "\n";
                } else {
                    out << key << ": " << v.dump() << "\n";
                }
            };
        emit("", to_json());
        return out.str();
    }
};

// ---------------------------------------------------------------------------
// Commands

/// FRF for the configured input: synthesized for a fixture, loaded otherwise.
inline FrfDataset resolve_frf(const PipelineConfig& cfg)
{
    if (const auto fx = cfg.fixture()) {
        const ScenarioFixture& f = scenario_fixture(fx->scenario);
        return synthesize_frf(fixture_modal_set(f.modes(fx->method), cfg.channels), default_synthetic_grid(), cfg.noise,
                              cfg.seed);
    }
    return load_frf(cfg.input);
}

/// Writes frf.csv for a fixture's modal values.
inline std::filesystem::path cmd_synth(const PipelineConfig& cfg)
{
    cfg.validate();
    if (!cfg.fixture()) throw ValidationError("synth needs a fixture input (--fixture <scenario>:<method>)");
    const FrfDataset frf = resolve_frf(cfg);
    const auto path = pipeline_detail::prepare_out(cfg) / artifact::frf;
    store_frf(frf, path);
    return path;
}

struct IdentifyResult {
    ModalParameterSet modes;
    StabilizationDiagram diagram;
    std::vector<std::string> warnings;
};

inline IdentifyResult identify_modes(const FrfDataset& full, const PipelineConfig& cfg)
{
    FrfDataset frf = full;
    if (cfg.band) {
        require(cfg.band->first >= full.grid.lo() && cfg.band->second <= full.grid.hi(),
                "band must lie within the FRF grid range");
        frf = full.restricted(cfg.band->first, cfg.band->second);
    }
    IdentifyResult r;
    if (cfg.method == IdentifyMethod::frvf) {
        int reflected = 0;
        const OrderIdentifier at = [&](int k) {
            VfConfig vc;
            vc.order = k;
            vc.allow_rank_deficient = true;
            FrvfOutcome o = frvf_identify(frf, vc);
            reflected += o.fit.reflected_poles;
            return o.modes;
        };
        r.diagram = build_diagram(at, cfg.orders);
        r.modes = consolidate_modes(r.diagram, 3, SourceMethod::frvf);
        if (reflected > 0) r.warnings.push_back(std::to_string(reflected) + " unstable poles reflected during fitting");
    } else if (cfg.method == IdentifyMethod::lf) {
        LfConfig lc;
        lc.sweep_orders = cfg.orders;
        lc.direction_seed = cfg.seed;
        LfOutcome o = lf_identify(frf, lc);
        r.modes = std::move(o.modes);
        r.diagram = std::move(*o.diagram);
        r.warnings = std::move(o.warnings);
    } else {
        throw ValidationError("identification needs method frvf or lf");
    }
    for (const DiagramOrder& e : r.diagram.entries) {
        if (e.error) r.warnings.push_back("order " + std::to_string(e.order) + " failed: " + *e.error);
    }
    if (r.modes.size() < 2) throw NumericalError("identification found fewer than two stable modes");
    return r;
}

/// Writes modes.csv and stabilization.csv.
inline IdentifyResult cmd_identify(const PipelineConfig& cfg)
{
    cfg.validate();
    IdentifyResult r = identify_modes(resolve_frf(cfg), cfg);
    const auto dir = pipeline_detail::prepare_out(cfg);
    pipeline_detail::write_text(dir / artifact::modes, modes_csv(r.modes, to_string(cfg.method)));
    pipeline_detail::write_text(dir / artifact::diagram, diagram_csv(r.diagram));
    return r;
}

struct FlutterRun {
    FlutterAnalysis analysis;
    RunReport report;
};

/// Calibrate, sweep, detect and refine from a mode set; writes trajectories
/// and both report files.
inline FlutterRun run_flutter(const ModalParameterSet& modes, const std::string& method, const PipelineConfig& cfg,
                              std::vector<StageTiming> timings = {}, std::vector<std::string> warnings = {})
{
    pipeline_detail::Stopwatch clock;
    ModalTargets targets = modal_targets(modes);
    if (cfg.zeta_override) targets.bending_zeta = targets.torsion_zeta = *cfg.zeta_override;
    FlutterRun run;
    run.analysis = analyse_flutter(targets, cfg.effective_geometry(), cfg.speeds);
    timings.push_back({"flutter", clock.lap()});

    RunReport& rep = run.report;
    rep.input = cfg.input;
    rep.method = method;
    rep.modes = modes;
    rep.targets = targets;
    rep.zeta_override = cfg.zeta_override;
    rep.calibration = run.analysis.calibration;
    rep.speed_range = {cfg.speeds.speeds.front(), cfg.speeds.speeds.back()};
    rep.onset = run.analysis.onset;
    rep.flutter_speed_ms = run.analysis.flutter_speed_ms;
    rep.divergence_speed_ms = run.analysis.divergence_speed_ms;
    rep.warnings = std::move(warnings);
    rep.warnings.insert(rep.warnings.end(), run.analysis.solution.warnings.begin(), run.analysis.solution.warnings.end());
    rep.check();

    const auto dir = pipeline_detail::prepare_out(cfg);
    pipeline_detail::write_text(dir / artifact::trajectories, trajectory_csv(run.analysis.solution));
    timings.push_back({"write", clock.lap()});
    rep.timings = std::move(timings);
    pipeline_detail::write_text(dir / artifact::report_json, rep.to_json().dump(2) + "\n");
    pipeline_detail::write_text(dir / artifact::report_text, rep.to_text());
    return run;
}

/// Flutter from a fixture's tabulated modes or from a modes CSV.
inline FlutterRun cmd_flutter(const PipelineConfig& cfg)
{
    cfg.validate();
    if (const auto fx = cfg.fixture()) {
        const ScenarioFixture& f = scenario_fixture(fx->scenario);
        return run_flutter(fixture_modal_set(f.modes(fx->method), cfg.channels), to_string(fx->method), cfg);
    }
    const std::vector<ModeRow> rows = parse_modes_csv(pipeline_detail::read_text(cfg.input));
    return run_flutter(modal_set_from_rows(rows), rows.empty() ? "external" : rows.front().method, cfg);
}

struct PipelineRun {
    std::optional<IdentifyResult> identification;
    FlutterRun flutter;
    std::vector<std::pair<std::string, std::string>> manifest;  ///< (file, sha256)
};

/// Identify then flutter; method `none` takes a fixture's tabulated modes.
/// Ends with manifest.sha256 over the deterministic artifacts (the report
/// files carry timings and are left out).
inline PipelineRun cmd_pipeline(const PipelineConfig& cfg)
{
    cfg.validate();
    const auto dir = pipeline_detail::prepare_out(cfg);
    pipeline_detail::Stopwatch clock;
    PipelineRun run;
    std::vector<StageTiming> timings;
    std::vector<std::string> files;

    if (cfg.method == IdentifyMethod::none) {
        const auto fx = cfg.fixture();
        if (!fx) throw ValidationError("method 'none' needs a fixture input");
        run.flutter = run_flutter(fixture_modal_set(scenario_fixture(fx->scenario).modes(fx->method), cfg.channels),
                                  to_string(fx->method), cfg);
    } else {
        const FrfDataset frf = resolve_frf(cfg);
        if (cfg.fixture()) {
            store_frf(frf, dir / artifact::frf);
            files.push_back(artifact::frf);
        }
        timings.push_back({"load", clock.lap()});
        run.identification = identify_modes(frf, cfg);
        timings.push_back({"identify", clock.lap()});
        const std::string method = to_string(cfg.method);
        pipeline_detail::write_text(dir / artifact::modes, modes_csv(run.identification->modes, method));
        pipeline_detail::write_text(dir / artifact::diagram, diagram_csv(run.identification->diagram));
        files.push_back(artifact::modes);
        files.push_back(artifact::diagram);
        run.flutter = run_flutter(run.identification->modes, method, cfg, timings, run.identification->warnings);
    }
    files.push_back(artifact::trajectories);

    std::string manifest;
    for (const std::string& name : files) {
        const std::string digest = sha256_hex(pipeline_detail::read_text(dir / name));
        run.manifest.emplace_back(name, digest);
        manifest += digest + "  " + name + "\n";
    }
    pipeline_detail::write_text(dir / artifact::manifest, manifest);
    return run;
}

} // namespace flutterid
