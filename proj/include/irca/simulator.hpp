#pragma once

// Synthetic monochromatic flat-field sweeps of a multi-aperture Fabry-Perot
// device: one frame per wavenumber, every subimage filtered by its own cavity.

#include <array>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "irca/core_model.hpp"
#include "irca/datacube.hpp"

namespace irca
{

inline constexpr double kCmPerNm = 1e-7;

struct LayoutConfig
{
    int n_interferometers = 1;
    double thickness_step_nm = 0.0;
    double base_thickness_nm = 0.0;
    double refractive_index = 1.0;
    int focal_height = 0;
    int focal_width = 0;
    int subimage_height = 0;
    int subimage_width = 0;
    /// Inner incidence angle per pixel of distance from the optical axis (rad/px).
    double angular_scale = 0.0;
    /// Optional per-subimage shift of the optical axis from the central pixel (rows, cols).
    std::vector<std::array<double, 2>> axis_offsets;
};

/// Axis-aligned block of the focal plane.
struct SubimageRect
{
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;

    bool contains(Pixel p) const
    {
        return p.row >= top && p.row < top + height && p.col >= left && p.col < left + width;
    }
};

/// Staircase device: interferometer k has thickness d₀ + k·Δd and occupies the
/// k-th subimage of the focal-plane tiling in row-major order.
class DeviceLayout
{
public:
    /// Validates the configuration and computes the subimage tiling.
    static DeviceLayout build(const LayoutConfig& config);

    const LayoutConfig& config() const { return config_; }
    int n_interferometers() const { return config_.n_interferometers; }
    int tile_rows() const { return tile_rows_; }
    int tile_cols() const { return tile_cols_; }
    int height() const { return config_.focal_height; }
    int width() const { return config_.focal_width; }

    /// Tiling position (row, col) of interferometer k.
    std::array<int, 2> tile_of(int k) const { return {k / tile_cols_, k % tile_cols_}; }
    SubimageRect subimage(int k) const;
    Pixel central_pixel(int k) const;
    /// Optical axis in absolute focal-plane coordinates (fractional px).
    std::array<double, 2> optical_axis(int k) const;
    /// Interferometer whose subimage holds p, if any.
    std::optional<int> interferometer_at(Pixel p) const;

    double thickness_cm(int k) const
    {
        return (config_.base_thickness_nm + double(k) * config_.thickness_step_nm) * kCmPerNm;
    }
    /// 2·n·d_k at normal incidence (cm).
    double nominal_opd(int k) const { return 2.0 * config_.refractive_index * thickness_cm(k); }
    /// Nominal OPD increase between consecutive interferometers, 2·n·Δd (cm).
    double nominal_opd_step() const { return 2.0 * config_.refractive_index * config_.thickness_step_nm * kCmPerNm; }

    /// Inner angle of pixel p of subimage k.
    double incidence_angle(int k, Pixel p) const;

private:
    explicit DeviceLayout(LayoutConfig config);
    LayoutConfig config_;
    int tile_rows_ = 0;
    int tile_cols_ = 0;
};

/// δ = 2·n·d_k·cos θ with θ = angular_scale · |offset| from the optical axis.
double pixel_opd(const DeviceLayout& layout, int interferometer, double row_offset, double col_offset);

struct NoNoise
{
};
/// Zero-mean Gaussian noise with std = relative_std · mean noiseless signal.
struct AdditiveGaussian
{
    double relative_std = 0.0;
};
using NoiseModel = std::variant<NoNoise, AdditiveGaussian>;

struct ConstantPower
{
    double level = 1.0;
};
/// 1 + amplitude·exp(−½((σ − center)/width)²).
struct LampPower
{
    double amplitude = 1.0;
    double center_cm1 = 0.0;
    double width_cm1 = 1.0;
};
using PowerProfile = std::variant<ConstantPower, LampPower>;

Eigen::VectorXd incident_power(const PowerProfile& profile, const WavenumberGrid& grid);

/// Plate tilt expressed as OPD added per tiling row and per tiling column (cm).
struct StaircaseTilt
{
    double per_row_cm = 0.0;
    double per_col_cm = 0.0;
};

/// Ground truth for every interferometer of the layout: shared gain and
/// reflectivity polynomials, δ_k = nominal_opd(k) plus the tilt contribution.
std::vector<TransmittanceParams> staircase_truth(const DeviceLayout& layout, const Eigen::VectorXd& gain,
                                                 const Eigen::VectorXd& reflectivity, double phase_shift,
                                                 const StaircaseTilt& tilt = {});

struct SimulationOptions
{
    NoiseModel noise = NoNoise{};
    PowerProfile power = ConstantPower{};
    std::uint64_t seed = 0;
};

struct NyquistReport
{
    bool pass = false;
    /// (1/(2δ_max)) / Δσ.
    double margin = 0.0;
    double opd_max_cm = 0.0;
    double step_bound_cm1 = 0.0;
};

NyquistReport nyquist_check(const DeviceLayout& layout, const WavenumberGrid& grid);

/// Frame i, pixel p of subimage k holds T_β(σ_i)·power_i + noise, where β is
/// truth[k] with its OPD scaled by cos θ(p). Pixels outside every subimage are zero
/// before noise.
Datacube simulate_datacube(const DeviceLayout& layout, const WavenumberGrid& grid,
                           const std::vector<TransmittanceParams>& truth, const WaveRegime& regime,
                           const SimulationOptions& options = {});

} // namespace irca
