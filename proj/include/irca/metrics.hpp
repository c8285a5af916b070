#pragma once

// Fit quality and device-level analysis products computed from characterization results.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irca/core_model.hpp"

namespace irca
{

struct PixelResult;
class DeviceLayout;

/// sqrt(mean(((t_i − y_i)/ȳ)²)).
double fit_rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, double y_mean);
inline double fit_rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted)
{
    return fit_rmse(y, fitted, y.mean());
}

struct FitReportEntry
{
    int interferometer = -1;
    int row = 0;
    int col = 0;
    double rmse = 0.0;
    bool converged = false;
};

struct FitReport
{
    std::string method;
    std::string regime;
    std::vector<FitReportEntry> entries;
    // Aggregates over converged fits only.
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    int converged_count = 0;
    int non_converged_count = 0;
};

FitReport fit_report(const std::vector<PixelResult>& results, std::string method, std::string regime);

struct OpdStepReport
{
    struct Interferometer
    {
        int index = 0;
        int tile_row = 0;
        int tile_col = 0;
        std::optional<double> opd;
    };
    struct Step
    {
        int from = 0; // step from `from` to `from + 1`
        std::optional<double> difference;
        std::optional<double> deviation; // difference − 2nΔd
    };
    double nominal_step = 0.0;
    std::vector<Interferometer> interferometers; // N_i entries
    std::vector<Step> steps;                     // N_i − 1 entries
    std::vector<int> missing;
};

/// Uses the central-pixel result of every interferometer.
OpdStepReport opd_step_report(const std::vector<PixelResult>& results, const DeviceLayout& layout);

struct MapEntry
{
    int row = 0;
    int col = 0;
    int interferometer = -1;
    double relative_opd = 0.0;      // (δ̂(p) − δ̂(center)) / δ̂(center)
    double mean_reflectivity = 0.0; // R̂(σ) averaged over the grid
    bool masked = false;
};

struct ParameterMaps
{
    std::vector<MapEntry> entries;
    std::vector<int> skipped_subimages;
    std::vector<std::string> warnings;
    int masked_count = 0;
};

/// Per-pixel maps from full-plane results; pixels whose fit failed or did not
/// converge are masked.
ParameterMaps parameter_maps(const std::vector<PixelResult>& results, const DeviceLayout& layout,
                             const WavenumberGrid& grid);

} // namespace irca
