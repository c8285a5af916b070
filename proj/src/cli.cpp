#include "irca/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "irca/errors.hpp"
#include "irca/io.hpp"
#include "irca/metrics.hpp"

namespace irca::cli
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

Eigen::VectorXd vector_from(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

WaveRegime regime_from(const std::string& text)
{
    try {
        return WaveRegime::parse(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

Initializer initializer_from(const std::string& text)
{
    if (text == "ml")
        return Initializer::MaximumLikelihood;
    if (text == "es")
        return Initializer::ExhaustiveSearch;
    throw ConfigError("initializer must be 'ml' or 'es'");
}

PixelSelector::Mode pixels_from(const std::string& text)
{
    if (text == "central")
        return PixelSelector::Mode::Central;
    if (text == "all")
        return PixelSelector::Mode::All;
    throw ConfigError("pixels must be 'central' or 'all'");
}

const char* pixels_label(PixelSelector::Mode mode)
{
    switch (mode) {
    case PixelSelector::Mode::Central: return "central";
    case PixelSelector::Mode::All: return "all";
    case PixelSelector::Mode::Explicit: return "explicit";
    }
    return "";
}

void parse_characterize_section(const json& j, RunConfig& cfg)
{
    check_keys(j,
               {"degree", "regime", "initializer", "oversampling", "kernel", "percentile", "flat_field_scope",
                "pixels", "fixed_gain", "paper_reflectivity_inversion", "nominal_margin", "use_nominal_opd",
                "opd_interval_cm", "guard_bins", "max_iterations", "es_reflectivity_steps",
                "es_reflectivity_max", "es_phase_steps"},
               "characterize");
    auto& irca = cfg.irca;
    auto& ex = cfg.extraction;
    irca.degree = j.value("degree", irca.degree);
    if (j.contains("regime"))
        irca.regime = regime_from(j.at("regime").get<std::string>());
    if (j.contains("initializer"))
        irca.initializer = initializer_from(j.at("initializer").get<std::string>());
    irca.oversampling = j.value("oversampling", irca.oversampling);
    irca.fixed_gain = j.value("fixed_gain", irca.fixed_gain);
    if (j.value("paper_reflectivity_inversion", false))
        irca.inversion = ReflectivityInversion::Compatibility;
    irca.nominal_margin = j.value("nominal_margin", irca.nominal_margin);
    irca.guard_bins = j.value("guard_bins", irca.guard_bins);
    if (j.contains("opd_interval_cm")) {
        const auto iv = j.at("opd_interval_cm").get<std::array<double, 2>>();
        irca.opd_interval = OpdInterval{iv[0], iv[1]};
    }
    if (j.contains("max_iterations")) {
        irca.gain_lm.max_iterations = j.at("max_iterations").get<int>();
        irca.refine_lm.max_iterations = irca.gain_lm.max_iterations;
    }
    irca.es_reflectivity_steps = j.value("es_reflectivity_steps", irca.es_reflectivity_steps);
    irca.es_reflectivity_max = j.value("es_reflectivity_max", irca.es_reflectivity_max);
    irca.es_phase_steps = j.value("es_phase_steps", irca.es_phase_steps);
    ex.kernel = j.value("kernel", ex.kernel);
    ex.percentile = j.value("percentile", ex.percentile);
    ex.use_nominal_opd = j.value("use_nominal_opd", ex.use_nominal_opd);
    if (j.contains("flat_field_scope")) {
        const auto scope = j.at("flat_field_scope").get<std::string>();
        if (scope == "global")
            ex.scope = FlatFieldScope::Global;
        else if (scope == "subimage")
            ex.scope = FlatFieldScope::Subimage;
        else
            throw ConfigError("flat_field_scope must be 'global' or 'subimage'");
    }
    if (j.contains("pixels"))
        cfg.pixels = pixels_from(j.at("pixels").get<std::string>());
}

void validate_extraction(const ExtractionConfig& ex)
{
    if (ex.kernel < 1 || ex.kernel % 2 == 0)
        throw ConfigError("kernel must be an odd integer >= 1");
    if (!(ex.percentile > 0.0 && ex.percentile <= 100.0))
        throw ConfigError("percentile must lie in (0, 100]");
}

RunConfig load_config(const std::string& path)
{
    if (path.empty())
        return {};
    return parse_run_config(io::read_json_file(path));
}

/// Layout from a file holding either a bare layout object or a run config.
LayoutConfig load_layout(const fs::path& path)
{
    const json j = io::read_json_file(path);
    return io::layout_from_json(j.contains("layout") ? j.at("layout") : j);
}

std::string method_label(const IrcaConfig& c)
{
    std::string label = c.initializer == Initializer::MaximumLikelihood ? "ml+lm" : "es+lm";
    if (c.fixed_gain)
        label += "/fixed-gain";
    return label;
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

/*=============================================================================*/

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (!cfg.layout)
        throw ConfigError("simulate: configuration needs a 'layout' section");
    if (!cfg.grid)
        throw ConfigError("simulate: configuration needs a 'grid' section");
    DeviceLayout layout = [&] {
        try {
            return DeviceLayout::build(*cfg.layout);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();
    const WavenumberGrid& grid = *cfg.grid;
    std::vector<TransmittanceParams> truth;
    try {
        truth = staircase_truth(layout, cfg.truth.gain, cfg.truth.reflectivity, cfg.truth.phase_shift,
                                cfg.truth.tilt);
        for (const auto& t : truth)
            if (auto violation = t.check_on(grid))
                throw ConfigError("truth: " + *violation);
        if (const auto* g = std::get_if<AdditiveGaussian>(&cfg.noise); g && !(g->relative_std >= 0.0))
            throw ConfigError("noise: relative_std must be >= 0");
        (void)incident_power(cfg.power, grid);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const auto nyquist = nyquist_check(layout, grid);
    if (!nyquist.pass)
        err << "warning: Nyquist condition violated (step " << grid.mean_step() << " cm-1 >= bound "
            << nyquist.step_bound_cm1 << " cm-1)\n";

    SimulationOptions options{cfg.noise, cfg.power, cfg.seed};
    const Datacube cube = simulate_datacube(layout, grid, truth, cfg.truth.regime, options);
    io::write_datacube(cfg.out, cube);
    json truth_json = io::truth_to_json(truth, grid, cfg.truth.regime);
    truth_json["nyquist"] = {{"pass", nyquist.pass},
                             {"margin", nyquist.margin},
                             {"opd_max_cm", nyquist.opd_max_cm},
                             {"step_bound_cm1", nyquist.step_bound_cm1}};
    io::write_json_file(cfg.out / "truth.json", truth_json);
    io::write_json_file(cfg.out / "layout.json", io::layout_to_json(*cfg.layout));
    out << "simulated " << cube.n_acq() << " frames of " << cube.height() << "x" << cube.width() << " into "
        << cfg.out.string() << '\n';
    return 0;
}

int cmd_characterize(const RunConfig& cfg, const fs::path& cube_path, const std::string& layout_path,
                     std::ostream& out)
{
    validate_extraction(cfg.extraction);
    if (!fs::exists(cube_path))
        throw IoError("datacube not found: " + cube_path.string());
    LayoutConfig layout_config;
    if (!layout_path.empty())
        layout_config = load_layout(layout_path);
    else if (cfg.layout)
        layout_config = *cfg.layout;
    else {
        const fs::path dir = fs::is_directory(cube_path) ? cube_path : cube_path.parent_path();
        if (!fs::exists(dir / "layout.json"))
            throw ConfigError("characterize: no layout given (use --layout, a config 'layout' section, or "
                              "layout.json beside the datacube)");
        layout_config = load_layout(dir / "layout.json");
    }
    const DeviceLayout layout = [&] {
        try {
            return DeviceLayout::build(layout_config);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();

    const Datacube cube = io::read_datacube(cube_path);
    try {
        cfg.irca.validate(cube.grid());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const PixelSelector selector{cfg.pixels, {}};
    auto results = characterize_device(cube, layout, cfg.irca, selector, cfg.extraction, cfg.jobs);

    io::ResultsFile file{pixels_label(cfg.pixels), method_label(cfg.irca), cfg.irca.regime.label(),
                         cfg.irca.degree, cube.grid(), layout_config, std::move(results)};
    ensure_directory(cfg.out);
    io::write_json_file(cfg.out / "results.json", io::results_to_json(file));
    io::write_results_csv(cfg.out / "results.csv", file.pixels, cfg.irca.degree);

    const auto report = fit_report(file.pixels, file.method, file.regime);
    out << "characterized " << file.pixels.size() << " pixels (" << report.converged_count << " converged); RMSE "
        << report.mean_rmse << " +- " << report.std_rmse << '\n';
    return 0;
}

void check_results_against_layout(const io::ResultsFile& results, const DeviceLayout& layout)
{
    for (const auto& p : results.pixels) {
        if (p.interferometer < 0 || p.interferometer >= layout.n_interferometers())
            throw DataMismatchError("results reference interferometer " + std::to_string(p.interferometer)
                                    + " absent from the layout");
        if (layout.interferometer_at(p.pixel) != p.interferometer)
            throw DataMismatchError("result pixel (" + std::to_string(p.pixel.row) + "," + std::to_string(p.pixel.col)
                                    + ") is not inside subimage " + std::to_string(p.interferometer));
    }
}

int cmd_report(const fs::path& results_path, const std::string& kind, const std::string& layout_path,
               const RunConfig& cfg, std::ostream& out)
{
    const io::ResultsFile results = io::results_from_json(io::read_json_file(results_path));
    LayoutConfig layout_config = results.layout;
    if (!layout_path.empty())
        layout_config = load_layout(layout_path);
    else if (cfg.layout)
        layout_config = *cfg.layout;
    const DeviceLayout layout = [&] {
        try {
            return DeviceLayout::build(layout_config);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();
    check_results_against_layout(results, layout);
    ensure_directory(cfg.out);

    if (kind == "rmse") {
        const auto report = fit_report(results.pixels, results.method, results.regime);
        io::write_json_file(cfg.out / "fit_report.json", io::fit_report_to_json(report));
        io::write_fit_report_csv(cfg.out / "fit_report.csv", report);
        out << std::setprecision(4) << std::fixed << results.method << " " << results.regime << ": "
            << report.mean_rmse << " +- " << report.std_rmse << " (converged " << report.converged_count
            << ", non-converged " << report.non_converged_count << ")\n";
    } else if (kind == "opd-steps") {
        const auto report = opd_step_report(results.pixels, layout);
        io::write_json_file(cfg.out / "opd_steps.json", io::opd_steps_to_json(report));
        io::write_opd_steps_csv(cfg.out / "opd_steps.csv", report);
        out << report.steps.size() << " OPD steps, " << report.missing.size() << " interferometers missing\n";
    } else {
        if (results.mode != "all")
            throw DataMismatchError("report maps: full-plane results required (characterize with --pixels all)");
        const auto maps = parameter_maps(results.pixels, layout, results.grid);
        io::write_json_file(cfg.out / "maps.json", io::maps_summary_json(maps));
        io::write_maps_csv(cfg.out / "maps.csv", maps);
        for (const auto& w : maps.warnings)
            out << "warning: " << w << '\n';
        out << maps.entries.size() << " map pixels, " << maps.masked_count << " masked\n";
    }
    return 0;
}

int cmd_regimes(std::vector<int> waves, double threshold, int phase_samples, const std::string& out_path,
                std::ostream& out)
{
    if (!(threshold > 0.0))
        throw ConfigError("regimes: threshold must be positive");
    if (phase_samples < 1)
        throw ConfigError("regimes: phase samples must be positive");
    if (waves.empty())
        throw ConfigError("regimes: at least one wave count required");
    for (int w : waves)
        if (w < 1)
            throw ConfigError("regimes: wave counts must be >= 1");
    std::sort(waves.begin(), waves.end());
    waves.erase(std::unique(waves.begin(), waves.end()), waves.end());

    std::ostringstream csv;
    csv << std::setprecision(10) << "waves,max_reflectivity\n";
    for (int w : waves)
        csv << w << ',' << regime_max_reflectivity(WaveRegime::finite(w), threshold, phase_samples) << '\n';
    if (out_path.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(out_path);
        if (!f || !(f << csv.str()))
            throw IoError("cannot write " + out_path);
    }
    return 0;
}

} // namespace

/*=============================================================================*/

RunConfig parse_run_config(const json& j)
{
    RunConfig cfg;
    try {
        check_keys(j, {"layout", "grid", "truth", "noise", "power", "characterize", "out", "seed", "jobs"}, "config");
        if (j.contains("layout"))
            cfg.layout = io::layout_from_json(j.at("layout"));
        if (j.contains("grid"))
            cfg.grid = io::grid_from_json(j.at("grid"));
        if (j.contains("truth")) {
            const auto& t = j.at("truth");
            check_keys(t, {"gain", "reflectivity", "phase_shift_rad", "regime", "tilt"}, "truth");
            if (t.contains("gain"))
                cfg.truth.gain = vector_from(t.at("gain"));
            if (t.contains("reflectivity"))
                cfg.truth.reflectivity = vector_from(t.at("reflectivity"));
            cfg.truth.phase_shift = t.value("phase_shift_rad", 0.0);
            if (t.contains("regime"))
                cfg.truth.regime = regime_from(t.at("regime").get<std::string>());
            if (t.contains("tilt")) {
                check_keys(t.at("tilt"), {"per_row_cm", "per_col_cm"}, "truth.tilt");
                cfg.truth.tilt.per_row_cm = t.at("tilt").value("per_row_cm", 0.0);
                cfg.truth.tilt.per_col_cm = t.at("tilt").value("per_col_cm", 0.0);
            }
        }
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            check_keys(n, {"kind", "relative_std"}, "noise");
            const auto kind = n.at("kind").get<std::string>();
            if (kind == "none")
                cfg.noise = NoNoise{};
            else if (kind == "gaussian")
                cfg.noise = AdditiveGaussian{n.at("relative_std").get<double>()};
            else
                throw ConfigError("noise.kind must be 'none' or 'gaussian'");
        }
        if (j.contains("power")) {
            const auto& p = j.at("power");
            check_keys(p, {"kind", "level", "amplitude", "center_cm1", "width_cm1"}, "power");
            const auto kind = p.at("kind").get<std::string>();
            if (kind == "constant")
                cfg.power = ConstantPower{p.value("level", 1.0)};
            else if (kind == "lamp")
                cfg.power = LampPower{p.at("amplitude").get<double>(), p.at("center_cm1").get<double>(),
                                      p.at("width_cm1").get<double>()};
            else
                throw ConfigError("power.kind must be 'constant' or 'lamp'");
        }
        if (j.contains("characterize"))
            parse_characterize_section(j.at("characterize"), cfg);
        validate_extraction(cfg.extraction);
        if (cfg.irca.degree < 0)
            throw ConfigError("characterize.degree must be >= 0");
        if (cfg.grid) {
            try {
                cfg.irca.validate(*cfg.grid);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        if (j.contains("out"))
            cfg.out = j.at("out").get<std::string>();
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.jobs = j.value("jobs", 0u);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fabry-Perot multi-aperture spectrometer simulation and response characterization"};
    app.require_subcommand(1);

    std::string config_path, out_dir, layout_path;
    std::uint64_t seed = 0;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic flat-field datacube");
    sim->add_option("--config", config_path, "run configuration (JSON)")->required();
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--seed", seed, "noise seed");

    std::string cube_path, regime_text, initializer_text, pixels_text;
    int degree = 0, kernel = 0;
    unsigned jobs = 0;
    double percentile = 0.0;
    auto regime_check = CLI::Validator(
        [](std::string& s) -> std::string {
            try {
                WaveRegime::parse(s);
                return {};
            } catch (const std::invalid_argument& e) {
                return e.what();
            }
        },
        "two|finite:W|infinite");
    auto* chz = app.add_subcommand("characterize", "estimate per-pixel transmittance parameters");
    chz->add_option("datacube", cube_path, "datacube directory or manifest.json")->required();
    chz->add_option("--config", config_path, "run configuration (JSON)");
    chz->add_option("--layout", layout_path, "layout JSON (overrides the config)");
    chz->add_option("--out", out_dir, "output directory");
    chz->add_option("--regime", regime_text, "two|finite:W|infinite")->check(regime_check);
    chz->add_option("--initializer", initializer_text, "ml|es")->check(CLI::IsMember({"ml", "es"}));
    chz->add_option("--degree", degree, "polynomial degree of gain and reflectivity (default 5)")
        ->check(CLI::NonNegativeNumber);
    chz->add_option("--kernel", kernel, "neighborhood window size (default 11)");
    chz->add_option("--percentile", percentile, "flat-field percentile (default 90)");
    chz->add_option("--pixels", pixels_text, "central|all")->check(CLI::IsMember({"central", "all"}));
    chz->add_option("--jobs", jobs, "worker threads (default: hardware concurrency)");
    auto* fixed_gain = chz->add_flag("--fixed-gain", "fit only a scale of the step-1 gain");
    auto* paper_inv = chz->add_flag("--paper-reflectivity-inversion", "r = 1 - sqrt(1 - alpha^2)");

    std::vector<int> waves{2, 3, 5, 10};
    double threshold = 0.01;
    int phase_samples = 10000;
    std::string regimes_out;
    auto* reg = app.add_subcommand("regimes", "maximum reflectivity per wave count for an RMSE threshold");
    reg->add_option("--waves", waves, "wave counts, comma separated")->delimiter(',');
    reg->add_option("--threshold", threshold, "RMSE threshold between W-wave and Airy responses");
    reg->add_option("--phase-samples", phase_samples, "uniform phase samples per RMSE evaluation");
    reg->add_option("--out", regimes_out, "CSV output file (default: stdout)");

    std::string results_path, kind;
    auto* rep = app.add_subcommand("report", "RMSE summary, OPD-step deviations or parameter maps");
    rep->add_option("results", results_path, "results.json from characterize")->required();
    rep->add_option("--kind", kind, "rmse|opd-steps|maps")->required()->check(CLI::IsMember({"rmse", "opd-steps", "maps"}));
    rep->add_option("--layout", layout_path, "layout JSON (default: the layout stored in the results)");
    rep->add_option("--config", config_path, "run configuration providing the layout");
    rep->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty())
            cfg.out = out_dir;
        if (*sim) {
            if (sim->count("--seed"))
                cfg.seed = seed;
            return cmd_simulate(cfg, out, err);
        }
        if (*chz) {
            if (!regime_text.empty())
                cfg.irca.regime = WaveRegime::parse(regime_text);
            if (!initializer_text.empty())
                cfg.irca.initializer = initializer_from(initializer_text);
            if (chz->count("--degree"))
                cfg.irca.degree = degree;
            if (chz->count("--kernel"))
                cfg.extraction.kernel = kernel;
            if (chz->count("--percentile"))
                cfg.extraction.percentile = percentile;
            if (!pixels_text.empty())
                cfg.pixels = pixels_from(pixels_text);
            if (chz->count("--jobs"))
                cfg.jobs = jobs;
            if (fixed_gain->count())
                cfg.irca.fixed_gain = true;
            if (paper_inv->count())
                cfg.irca.inversion = ReflectivityInversion::Compatibility;
            return cmd_characterize(cfg, cube_path, layout_path, out);
        }
        if (*reg)
            return cmd_regimes(waves, threshold, phase_samples, regimes_out, out);
        return cmd_report(results_path, kind, layout_path, cfg, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const DataMismatchError& e) {
        err << "data mismatch: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace irca::cli
