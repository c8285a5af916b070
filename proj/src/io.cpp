#include "irca/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>

#include "irca/errors.hpp"

namespace irca::io
{

namespace
{
std::uint64_t byteswap64(std::uint64_t v)
{
    std::uint64_t out = 0;
    for (int b = 0; b < 8; ++b)
        out |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return out;
}

std::vector<double> to_vector(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

/// Serializes non-finite values as null.
json number(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

double number_from(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out)
{
    std::ofstream out(path, mode);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << std::setprecision(17);
    return out;
}
} // namespace

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j)
{
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

/*=============================================================================*/
/* Datacube */

void write_datacube(const fs::path& dir, const Datacube& cube)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    json manifest = {
        {"format_version", kManifestVersion},
        {"n_acq", cube.n_acq()},
        {"height", cube.height()},
        {"width", cube.width()},
        {"wavenumbers_cm1", to_vector(cube.grid().sigma())},
        {"incident_power", to_vector(cube.incident_power())},
        {"dtype", "f64le"},
        {"payload", "frames.bin"},
    };
    write_json_file(dir / "manifest.json", manifest);

    auto out = open_for_write(dir / "frames.bin", std::ios::out | std::ios::binary);
    std::vector<char> buffer(cube.data().size() * 8);
    for (std::size_t i = 0; i < cube.data().size(); ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(cube.data()[i]);
        if constexpr (std::endian::native == std::endian::big)
            bits = byteswap64(bits);
        std::memcpy(buffer.data() + 8 * i, &bits, 8);
    }
    out.write(buffer.data(), std::streamsize(buffer.size()));
    if (!out)
        throw IoError("failed writing " + (dir / "frames.bin").string());
}

Datacube read_datacube(const fs::path& path)
{
    const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
    const json manifest = read_json_file(manifest_path);

    std::vector<double> sigma, power;
    int height = 0, width = 0;
    long n_acq = 0;
    std::string payload;
    try {
        const int version = manifest.at("format_version").get<int>();
        if (version != kManifestVersion)
            throw IoError("unsupported datacube format_version " + std::to_string(version) + " in "
                          + manifest_path.string());
        if (manifest.at("dtype").get<std::string>() != "f64le")
            throw IoError("unsupported datacube dtype in " + manifest_path.string());
        n_acq = manifest.at("n_acq").get<long>();
        height = manifest.at("height").get<int>();
        width = manifest.at("width").get<int>();
        sigma = manifest.at("wavenumbers_cm1").get<std::vector<double>>();
        power = manifest.at("incident_power").get<std::vector<double>>();
        payload = manifest.at("payload").get<std::string>();
    } catch (const json::exception& e) {
        throw IoError("invalid manifest " + manifest_path.string() + ": " + e.what());
    }
    if (long(sigma.size()) != n_acq || long(power.size()) != n_acq)
        throw DataMismatchError("manifest n_acq disagrees with its wavenumber/power lists");
    if (height <= 0 || width <= 0)
        throw DataMismatchError("manifest frame dimensions must be positive");

    const fs::path payload_path = manifest_path.parent_path() / payload;
    std::ifstream in(payload_path, std::ios::binary | std::ios::ate);
    if (!in)
        throw IoError("cannot open payload " + payload_path.string());
    const auto bytes = std::size_t(in.tellg());
    const std::size_t expected = std::size_t(n_acq) * std::size_t(height) * std::size_t(width);
    if (bytes != expected * 8)
        throw DataMismatchError("payload " + payload_path.string() + " holds " + std::to_string(bytes)
                                + " bytes, manifest implies " + std::to_string(expected * 8));
    in.seekg(0);
    std::vector<char> buffer(bytes);
    in.read(buffer.data(), std::streamsize(bytes));
    if (!in)
        throw IoError("failed reading payload " + payload_path.string());
    std::vector<double> data(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, buffer.data() + 8 * i, 8);
        if constexpr (std::endian::native == std::endian::big)
            bits = byteswap64(bits);
        data[i] = std::bit_cast<double>(bits);
    }
    try {
        return Datacube(WavenumberGrid(to_eigen(sigma)), height, width, to_eigen(power), std::move(data));
    } catch (const std::invalid_argument& e) {
        throw DataMismatchError(std::string("invalid datacube: ") + e.what());
    }
}

/*=============================================================================*/
/* Layout, grid, parameters */

json layout_to_json(const LayoutConfig& c)
{
    json j = {
        {"n_interferometers", c.n_interferometers},
        {"thickness_step_nm", c.thickness_step_nm},
        {"base_thickness_nm", c.base_thickness_nm},
        {"refractive_index", c.refractive_index},
        {"focal_plane", {c.focal_height, c.focal_width}},
        {"subimage", {c.subimage_height, c.subimage_width}},
        {"angular_scale_rad_per_px", c.angular_scale},
    };
    if (!c.axis_offsets.empty())
        j["axis_offsets"] = c.axis_offsets;
    return j;
}

LayoutConfig layout_from_json(const json& j)
{
    try {
        LayoutConfig c;
        c.n_interferometers = j.at("n_interferometers").get<int>();
        c.thickness_step_nm = j.at("thickness_step_nm").get<double>();
        c.base_thickness_nm = j.value("base_thickness_nm", 0.0);
        c.refractive_index = j.value("refractive_index", 1.0);
        const auto focal = j.at("focal_plane").get<std::array<int, 2>>();
        const auto sub = j.at("subimage").get<std::array<int, 2>>();
        c.focal_height = focal[0];
        c.focal_width = focal[1];
        c.subimage_height = sub[0];
        c.subimage_width = sub[1];
        c.angular_scale = j.value("angular_scale_rad_per_px", 0.0);
        if (j.contains("axis_offsets"))
            c.axis_offsets = j.at("axis_offsets").get<std::vector<std::array<double, 2>>>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid layout: ") + e.what());
    }
}

WavenumberGrid grid_from_json(const json& j)
{
    try {
        if (j.contains("wavenumbers_cm1"))
            return WavenumberGrid(to_eigen(j.at("wavenumbers_cm1").get<std::vector<double>>()));
        const double lo = j.at("min_cm1").get<double>();
        const double hi = j.at("max_cm1").get<double>();
        if (j.contains("count"))
            return WavenumberGrid::linspace(lo, hi, j.at("count").get<long>());
        const double step = j.at("step_cm1").get<double>();
        if (!(step > 0.0) || !(hi > lo))
            throw ConfigError("grid: need max_cm1 > min_cm1 and step_cm1 > 0");
        const long count = std::lround((hi - lo) / step) + 1;
        if (std::abs(lo + double(count - 1) * step - hi) > 1e-6 * step)
            throw ConfigError("grid: (max_cm1 - min_cm1) is not a multiple of step_cm1");
        return WavenumberGrid::linspace(lo, hi, count);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid grid: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid grid: ") + e.what());
    }
}

json sigma_map_json(const WavenumberGrid& grid)
{
    return {{"sigma_min_cm1", grid.sigma_min()},
            {"sigma_max_cm1", grid.sigma_max()},
            {"coordinate", "2*(sigma - sigma_min)/(sigma_max - sigma_min) - 1"}};
}

json params_to_json(const TransmittanceParams& p)
{
    return {{"gain", to_vector(p.gain())},
            {"reflectivity", to_vector(p.reflectivity())},
            {"opd_cm", p.opd()},
            {"phase_shift_rad", p.phase_shift()}};
}

TransmittanceParams params_from_json(const json& j)
{
    return TransmittanceParams(to_eigen(j.at("gain").get<std::vector<double>>()),
                               to_eigen(j.at("reflectivity").get<std::vector<double>>()),
                               j.at("opd_cm").get<double>(), j.at("phase_shift_rad").get<double>());
}

json truth_to_json(const std::vector<TransmittanceParams>& truth, const WavenumberGrid& grid,
                   const WaveRegime& regime)
{
    json list = json::array();
    for (std::size_t k = 0; k < truth.size(); ++k) {
        json entry = params_to_json(truth[k]);
        entry["interferometer"] = k;
        entry["beta"] = to_vector(truth[k].to_vector());
        list.push_back(entry);
    }
    return {{"regime", regime.label()}, {"sigma_map", sigma_map_json(grid)}, {"interferometers", list}};
}

/*=============================================================================*/
/* Results */

json results_to_json(const ResultsFile& results)
{
    json pixels = json::array();
    for (const auto& p : results.pixels) {
        json e = {{"interferometer", p.interferometer},
                  {"row", p.pixel.row},
                  {"col", p.pixel.col},
                  {"central", p.central}};
        if (p.error) {
            e["error"] = *p.error;
            e["converged"] = false;
            pixels.push_back(e);
            continue;
        }
        const auto& r = p.result;
        e["error"] = nullptr;
        e["converged"] = r.converged();
        e["termination"] = to_string(r.refine_report.termination);
        e["iterations"] = r.refine_report.iterations;
        e["rmse"] = number(r.rmse);
        e["initial_rmse"] = number(r.initial_rmse);
        e["params"] = params_to_json(r.params);
        e["violation"] = r.violation ? json(*r.violation) : json(nullptr);
        e["init"] = {{"gain", to_vector(r.gain_estimate)},
                     {"opd_cm", r.opd_estimate},
                     {"amplitude", r.amplitude_estimate},
                     {"reflectivity", r.reflectivity_estimate},
                     {"phase_shift_rad", r.phase_estimate},
                     {"opd_interval_cm", {r.opd_interval.lo, r.opd_interval.hi}}};
        e["flags"] = {{"periodogram_degenerate", r.periodogram_degenerate},
                      {"periodogram_tied", r.periodogram_tied},
                      {"phase_degenerate", r.phase_degenerate},
                      {"amplitude_clamped", r.amplitude_clamped}};
        pixels.push_back(e);
    }
    return {{"format_version", kResultsVersion},
            {"mode", results.mode},
            {"method", results.method},
            {"regime", results.regime},
            {"degree", results.degree},
            {"sigma_map", sigma_map_json(results.grid)},
            {"wavenumbers_cm1", to_vector(results.grid.sigma())},
            {"layout", layout_to_json(results.layout)},
            {"pixels", pixels}};
}

ResultsFile results_from_json(const json& j)
{
    try {
        if (j.at("format_version").get<int>() != kResultsVersion)
            throw IoError("unsupported results format_version");
        ResultsFile out;
        out.mode = j.at("mode").get<std::string>();
        out.method = j.at("method").get<std::string>();
        out.regime = j.at("regime").get<std::string>();
        out.degree = j.at("degree").get<int>();
        out.grid = WavenumberGrid(to_eigen(j.at("wavenumbers_cm1").get<std::vector<double>>()));
        out.layout = layout_from_json(j.at("layout"));
        for (const auto& e : j.at("pixels")) {
            PixelResult p;
            p.interferometer = e.at("interferometer").get<int>();
            p.pixel = {e.at("row").get<int>(), e.at("col").get<int>()};
            p.central = e.at("central").get<bool>();
            if (!e.at("error").is_null()) {
                p.error = e.at("error").get<std::string>();
                out.pixels.push_back(std::move(p));
                continue;
            }
            auto& r = p.result;
            r.refine_report.converged = e.at("converged").get<bool>();
            r.refine_report.iterations = e.at("iterations").get<int>();
            r.rmse = number_from(e.at("rmse"));
            r.initial_rmse = number_from(e.at("initial_rmse"));
            r.params = params_from_json(e.at("params"));
            if (!e.at("violation").is_null())
                r.violation = e.at("violation").get<std::string>();
            const auto& init = e.at("init");
            r.gain_estimate = to_eigen(init.at("gain").get<std::vector<double>>());
            r.opd_estimate = init.at("opd_cm").get<double>();
            r.amplitude_estimate = init.at("amplitude").get<double>();
            r.reflectivity_estimate = init.at("reflectivity").get<double>();
            r.phase_estimate = init.at("phase_shift_rad").get<double>();
            const auto iv = init.at("opd_interval_cm").get<std::array<double, 2>>();
            r.opd_interval = {iv[0], iv[1]};
            out.pixels.push_back(std::move(p));
        }
        return out;
    } catch (const json::exception& e) {
        throw IoError(std::string("invalid results file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("invalid results file: ") + e.what());
    }
}

void write_results_csv(const fs::path& path, const std::vector<PixelResult>& results, int degree)
{
    auto out = open_for_write(path);
    out << "interferometer,row,col,central,converged,rmse,initial_rmse,opd_cm,phase_shift_rad";
    for (int m = 0; m <= degree; ++m)
        out << ",a" << m;
    for (int m = 0; m <= degree; ++m)
        out << ",r" << m;
    out << ",init_opd_cm,init_amplitude,init_reflectivity,init_phase_shift_rad,iterations,termination,error\n";
    for (const auto& p : results) {
        out << p.interferometer << ',' << p.pixel.row << ',' << p.pixel.col << ',' << int(p.central) << ',';
        if (p.error) {
            out << "0,,,,";
            for (int m = 0; m < 2 * (degree + 1); ++m)
                out << ',';
            std::string msg = *p.error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            out << ",,,,,,\"" << msg << "\"\n";
            continue;
        }
        const auto& r = p.result;
        out << int(r.converged()) << ',' << r.rmse << ',' << r.initial_rmse << ',' << r.params.opd() << ','
            << r.params.phase_shift();
        for (Eigen::Index m = 0; m < r.params.gain().size(); ++m)
            out << ',' << r.params.gain()[m];
        for (Eigen::Index m = 0; m < r.params.reflectivity().size(); ++m)
            out << ',' << r.params.reflectivity()[m];
        out << ',' << r.opd_estimate << ',' << r.amplitude_estimate << ',' << r.reflectivity_estimate << ','
            << r.phase_estimate << ',' << r.refine_report.iterations << ','
            << to_string(r.refine_report.termination) << ",\n";
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

/*=============================================================================*/
/* Reports */

json fit_report_to_json(const FitReport& report)
{
    json entries = json::array();
    for (const auto& e : report.entries)
        entries.push_back({{"interferometer", e.interferometer},
                           {"row", e.row},
                           {"col", e.col},
                           {"rmse", number(e.rmse)},
                           {"converged", e.converged}});
    return {{"method", report.method},
            {"regime", report.regime},
            {"mean_rmse", report.mean_rmse},
            {"std_rmse", report.std_rmse},
            {"converged", report.converged_count},
            {"non_converged", report.non_converged_count},
            {"entries", entries}};
}

void write_fit_report_csv(const fs::path& path, const FitReport& report)
{
    auto out = open_for_write(path);
    out << "interferometer,row,col,rmse,converged\n";
    for (const auto& e : report.entries)
        out << e.interferometer << ',' << e.row << ',' << e.col << ',' << e.rmse << ',' << int(e.converged) << '\n';
}

json opd_steps_to_json(const OpdStepReport& report)
{
    json steps = json::array();
    for (const auto& s : report.steps)
        steps.push_back({{"from", s.from},
                         {"to", s.from + 1},
                         {"difference_cm", s.difference ? json(*s.difference) : json(nullptr)},
                         {"deviation_cm", s.deviation ? json(*s.deviation) : json(nullptr)}});
    json opds = json::array();
    for (const auto& i : report.interferometers)
        opds.push_back({{"index", i.index},
                        {"tile_row", i.tile_row},
                        {"tile_col", i.tile_col},
                        {"opd_cm", i.opd ? json(*i.opd) : json(nullptr)}});
    return {{"nominal_step_cm", report.nominal_step},
            {"missing", report.missing},
            {"interferometers", opds},
            {"steps", steps}};
}

void write_opd_steps_csv(const fs::path& path, const OpdStepReport& report)
{
    auto out = open_for_write(path);
    out << "from,to,tile_row,tile_col,difference_cm,deviation_cm\n";
    for (const auto& s : report.steps) {
        const auto& to = report.interferometers[std::size_t(s.from + 1)];
        out << s.from << ',' << s.from + 1 << ',' << to.tile_row << ',' << to.tile_col << ',';
        if (s.difference)
            out << *s.difference << ',' << *s.deviation;
        else
            out << ',';
        out << '\n';
    }
}

json maps_summary_json(const ParameterMaps& maps)
{
    return {{"pixels", maps.entries.size()},
            {"masked", maps.masked_count},
            {"skipped_subimages", maps.skipped_subimages},
            {"warnings", maps.warnings}};
}

void write_maps_csv(const fs::path& path, const ParameterMaps& maps)
{
    auto out = open_for_write(path);
    out << "row,col,interferometer,relative_opd,mean_reflectivity,masked\n";
    for (const auto& e : maps.entries) {
        out << e.row << ',' << e.col << ',' << e.interferometer << ',';
        if (e.masked)
            out << ",," << 1;
        else
            out << e.relative_opd << ',' << e.mean_reflectivity << ',' << 0;
        out << '\n';
    }
}

} // namespace irca::io
