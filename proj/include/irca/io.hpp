#pragma once

// On-disk formats: datacube (manifest.json + raw f64le payload), ground truth,
// layouts, characterization results and reports.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "irca/datacube.hpp"
#include "irca/estimator.hpp"
#include "irca/metrics.hpp"
#include "irca/simulator.hpp"

namespace irca::io
{

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;
inline constexpr int kResultsVersion = 1;

/// Writes `dir/manifest.json` and `dir/frames.bin`.
void write_datacube(const fs::path& dir, const Datacube& cube);
/// Accepts the cube directory or the manifest path itself.
Datacube read_datacube(const fs::path& path);

json layout_to_json(const LayoutConfig& config);
LayoutConfig layout_from_json(const json& j);

/// {"min_cm1","max_cm1","count"}, {"min_cm1","max_cm1","step_cm1"} or {"wavenumbers_cm1":[…]}.
WavenumberGrid grid_from_json(const json& j);

json sigma_map_json(const WavenumberGrid& grid);
json params_to_json(const TransmittanceParams& params);
TransmittanceParams params_from_json(const json& j);

/// Ground-truth parameters per interferometer, with the normalized-coordinate map.
json truth_to_json(const std::vector<TransmittanceParams>& truth, const WavenumberGrid& grid,
                   const WaveRegime& regime);

struct ResultsFile
{
    std::string mode;   // "central", "all" or "explicit"
    std::string method; // e.g. "ml+lm"
    std::string regime;
    int degree = 0;
    WavenumberGrid grid;
    LayoutConfig layout;
    std::vector<PixelResult> pixels;
};

json results_to_json(const ResultsFile& results);
ResultsFile results_from_json(const json& j);
void write_results_csv(const fs::path& path, const std::vector<PixelResult>& results, int degree);

json fit_report_to_json(const FitReport& report);
void write_fit_report_csv(const fs::path& path, const FitReport& report);
json opd_steps_to_json(const OpdStepReport& report);
void write_opd_steps_csv(const fs::path& path, const OpdStepReport& report);
json maps_summary_json(const ParameterMaps& maps);
void write_maps_csv(const fs::path& path, const ParameterMaps& maps);

json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const json& j);

} // namespace irca::io
