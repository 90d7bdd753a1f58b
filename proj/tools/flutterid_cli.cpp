// flutterid: identification and flutter-onset pipeline.
//
//   flutterid synth    --fixture 1:n4sid --noise 0.01 --seed 3 --out run
//   flutterid identify --input run/frf.csv --method lf --out run
//   flutterid flutter  --fixture 1:lf --out run
//   flutterid pipeline --config samples/scenario1.ini
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure.

#include "flutterid/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace flutterid;

struct Overrides {
    std::string config;
    std::string fixture;
    std::string input;
    std::string method;
    std::string orders;
    std::string band;
    std::string speeds;
    std::optional<double> noise;
    std::optional<std::uint64_t> seed;
    std::optional<double> zeta_override;
    std::string out;
};

void add_options(CLI::App& cmd, Overrides& o)
{
    cmd.add_option("--config", o.config, "config file ([geometry], [identify], [flutter])");
    cmd.add_option("--fixture", o.fixture, "bundled modal values, <scenario>:<method>, e.g. 1:n4sid");
    cmd.add_option("--input", o.input, "FRF file (synth/identify/pipeline) or modes CSV (flutter)");
    cmd.add_option("--method", o.method, "identification method: frvf, lf or none");
    cmd.add_option("--orders", o.orders, "model orders lo:hi:step");
    cmd.add_option("--band", o.band, "frequency band lo:hi in Hz");
    cmd.add_option("--speeds", o.speeds, "airspeed grid lo:hi:step in m/s");
    cmd.add_option("--noise", o.noise, "synthetic noise, fraction of channel RMS");
    cmd.add_option("--seed", o.seed, "noise and tangential-direction seed");
    cmd.add_option("--zeta-override", o.zeta_override, "replace both modal damping ratios");
    cmd.add_option("--out", o.out, "output directory");
}

PipelineConfig resolve(const Overrides& o)
{
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    if (!o.fixture.empty() && !o.input.empty()) throw ValidationError("--fixture and --input are mutually exclusive");
    if (!o.fixture.empty()) cfg.input = "fixture:" + o.fixture;
    if (!o.input.empty()) cfg.input = o.input;
    if (!o.method.empty()) cfg.method = identify_method_from_string(o.method);
    if (!o.orders.empty()) cfg.orders = parse_orders(o.orders);
    if (!o.band.empty()) cfg.band = parse_band(o.band);
    if (!o.speeds.empty()) cfg.speeds = parse_speeds(o.speeds);
    if (o.noise) cfg.noise = *o.noise;
    if (o.seed) cfg.seed = *o.seed;
    if (o.zeta_override) cfg.zeta_override = *o.zeta_override;
    if (!o.out.empty()) cfg.out = o.out;
    return cfg;
}

std::string speed_text(const std::optional<double>& v)
{
    if (!v) return "none in range";
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << *v << " m/s";
    return s.str();
}

void summarize(const FlutterRun& run, const std::filesystem::path& out)
{
    std::cout << "EI = " << run.report.calibration.stiffness.EI << " N m^2, GJ = " << run.report.calibration.stiffness.GJ
              << " N m^2\n"
              << "flutter:    " << speed_text(run.report.flutter_speed_ms) << "\n"
              << "divergence: " << speed_text(run.report.divergence_speed_ms) << "\n";
    for (const std::string& w : run.report.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "report: " << (out / artifact::report_text).string() << "\n";
}

void print_modes(const ModalParameterSet& modes)
{
    for (std::size_t i = 0; i < modes.size(); ++i) {
        std::cout << "mode " << i + 1 << ": " << std::fixed << std::setprecision(4) << modes[i].frequency_hz
                  << " Hz, zeta " << modes[i].damping_ratio << "\n";
    }
    std::cout.unsetf(std::ios::floatfield);
    std::cout.precision(6);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Modal identification and flutter-onset estimation"};
    app.require_subcommand(1);
    Overrides o;
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic FRF from bundled modal values");
    CLI::App* identify = app.add_subcommand("identify", "identify modes from an FRF");
    CLI::App* flutter = app.add_subcommand("flutter", "flutter onset from modal values");
    CLI::App* pipeline = app.add_subcommand("pipeline", "identify, then flutter, with a hash manifest");
    for (CLI::App* cmd : {synth, identify, flutter, pipeline}) add_options(*cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const PipelineConfig cfg = resolve(o);
        if (synth->parsed()) {
            const auto path = cmd_synth(cfg);
            std::cout << "wrote " << path.string() << "\n";
        } else if (identify->parsed()) {
            const IdentifyResult r = cmd_identify(cfg);
            print_modes(r.modes);
            for (const std::string& w : r.warnings) std::cout << "warning: " << w << "\n";
        } else if (flutter->parsed()) {
            summarize(cmd_flutter(cfg), cfg.out);
        } else {
            const PipelineRun r = cmd_pipeline(cfg);
            if (r.identification) print_modes(r.identification->modes);
            summarize(r.flutter, cfg.out);
            std::cout << "manifest: " << (cfg.out / artifact::manifest).string() << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
