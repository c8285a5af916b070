#pragma once

// Per-pixel sufficient statistics extracted from a characterization datacube.

#include <optional>

#include "irca/datacube.hpp"
#include "irca/simulator.hpp"

namespace irca
{

struct PixelStatistics
{
    Eigen::VectorXd y; // raw series
    Eigen::VectorXd u; // neighborhood mean
    Eigen::VectorXd w; // flat-field statistic
    Pixel pixel;
    int interferometer = -1;
};

/// Divides frame i by incident_power_i; the result has unit power.
Datacube equalize_power(const Datacube& cube);

Eigen::VectorXd raw_series(const Datacube& cube, Pixel pixel);

/// Mean over a kernel × kernel window centred on `pixel`, clipped to the frame
/// and, when given, to `bounds`.
Eigen::VectorXd neighborhood_mean(const Datacube& cube, Pixel pixel, int kernel,
                                  const std::optional<SubimageRect>& bounds = std::nullopt);

/// Nearest-rank percentile of each frame over the whole focal plane.
Eigen::VectorXd flat_field_statistic(const Datacube& cube, double percentile);

/// Same, restricted to one subimage.
Eigen::VectorXd flat_field_statistic(const Datacube& cube, double percentile, const SubimageRect& region);

/// Nearest-rank percentile of a sample (p ∈ (0, 100]).
double nearest_rank_percentile(std::vector<double> values, double percentile);

/// Statistics for a lone series: u = y, w = mean(y).
PixelStatistics degenerate_statistics(const Eigen::VectorXd& y);

} // namespace irca
