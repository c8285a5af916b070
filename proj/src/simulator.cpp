#include "irca/simulator.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace irca
{

DeviceLayout::DeviceLayout(LayoutConfig config) : config_(std::move(config)) {}

DeviceLayout DeviceLayout::build(const LayoutConfig& config)
{
    if (config.n_interferometers < 1)
        throw std::invalid_argument("layout: n_interferometers must be >= 1");
    if (config.focal_height <= 0 || config.focal_width <= 0)
        throw std::invalid_argument("layout: focal plane dimensions must be positive");
    if (config.subimage_height <= 0 || config.subimage_width <= 0)
        throw std::invalid_argument("layout: subimage dimensions must be positive");
    if (!(config.refractive_index >= 1.0))
        throw std::invalid_argument("layout: refractive_index must be >= 1");
    if (!(config.base_thickness_nm >= 0.0) || !(config.thickness_step_nm >= 0.0))
        throw std::invalid_argument("layout: thicknesses must be >= 0");
    if (!(config.angular_scale >= 0.0))
        throw std::invalid_argument("layout: angular_scale must be >= 0");
    if (!config.axis_offsets.empty() && int(config.axis_offsets.size()) != config.n_interferometers)
        throw std::invalid_argument("layout: axis_offsets needs one entry per interferometer");

    DeviceLayout layout(config);
    layout.tile_rows_ = config.focal_height / config.subimage_height;
    layout.tile_cols_ = config.focal_width / config.subimage_width;
    const int capacity = layout.tile_rows_ * layout.tile_cols_;
    if (capacity < config.n_interferometers)
        throw std::invalid_argument("layout: tiling overflow, " + std::to_string(config.n_interferometers)
                                    + " subimages of " + std::to_string(config.subimage_height) + "x"
                                    + std::to_string(config.subimage_width) + " do not fit a "
                                    + std::to_string(config.focal_height) + "x"
                                    + std::to_string(config.focal_width) + " focal plane");

    // Largest angle must stay below π/2 for the cos θ model.
    const double max_radius = std::hypot(double(config.subimage_height), double(config.subimage_width));
    if (config.angular_scale * max_radius >= std::numbers::pi / 2)
        throw std::invalid_argument("layout: angular_scale reaches grazing incidence inside a subimage");
    return layout;
}

SubimageRect DeviceLayout::subimage(int k) const
{
    if (k < 0 || k >= n_interferometers())
        throw std::out_of_range("layout: interferometer index out of range");
    const auto [tr, tc] = tile_of(k);
    return {tr * config_.subimage_height, tc * config_.subimage_width, config_.subimage_height,
            config_.subimage_width};
}

Pixel DeviceLayout::central_pixel(int k) const
{
    const auto r = subimage(k);
    return {r.top + r.height / 2, r.left + r.width / 2};
}

std::array<double, 2> DeviceLayout::optical_axis(int k) const
{
    const Pixel c = central_pixel(k);
    std::array<double, 2> axis{double(c.row), double(c.col)};
    if (!config_.axis_offsets.empty()) {
        axis[0] += config_.axis_offsets[k][0];
        axis[1] += config_.axis_offsets[k][1];
    }
    return axis;
}

std::optional<int> DeviceLayout::interferometer_at(Pixel p) const
{
    if (p.row < 0 || p.col < 0 || p.row >= config_.focal_height || p.col >= config_.focal_width)
        return std::nullopt;
    const int tr = p.row / config_.subimage_height;
    const int tc = p.col / config_.subimage_width;
    if (tr >= tile_rows_ || tc >= tile_cols_)
        return std::nullopt;
    const int k = tr * tile_cols_ + tc;
    if (k >= n_interferometers())
        return std::nullopt;
    return k;
}

double DeviceLayout::incidence_angle(int k, Pixel p) const
{
    const auto axis = optical_axis(k);
    return config_.angular_scale * std::hypot(double(p.row) - axis[0], double(p.col) - axis[1]);
}

double pixel_opd(const DeviceLayout& layout, int interferometer, double row_offset, double col_offset)
{
    const double theta = layout.config().angular_scale * std::hypot(row_offset, col_offset);
    return opd_from_geometry(layout.config().refractive_index, layout.thickness_cm(interferometer), theta);
}

Eigen::VectorXd incident_power(const PowerProfile& profile, const WavenumberGrid& grid)
{
    Eigen::VectorXd power(grid.size());
    if (const auto* c = std::get_if<ConstantPower>(&profile)) {
        if (!(c->level > 0.0))
            throw std::invalid_argument("power: constant level must be positive");
        power.setConstant(c->level);
        return power;
    }
    const auto& lamp = std::get<LampPower>(profile);
    if (!(lamp.amplitude > -1.0) || !(lamp.width_cm1 > 0.0))
        throw std::invalid_argument("power: lamp amplitude must exceed -1 and width must be positive");
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double z = (grid[i] - lamp.center_cm1) / lamp.width_cm1;
        power[i] = 1.0 + lamp.amplitude * std::exp(-0.5 * z * z);
    }
    return power;
}

std::vector<TransmittanceParams> staircase_truth(const DeviceLayout& layout, const Eigen::VectorXd& gain,
                                                 const Eigen::VectorXd& reflectivity, double phase_shift,
                                                 const StaircaseTilt& tilt)
{
    std::vector<TransmittanceParams> truth;
    truth.reserve(std::size_t(layout.n_interferometers()));
    for (int k = 0; k < layout.n_interferometers(); ++k) {
        const auto [tr, tc] = layout.tile_of(k);
        const double opd = layout.nominal_opd(k) + double(tr) * tilt.per_row_cm + double(tc) * tilt.per_col_cm;
        truth.emplace_back(gain, reflectivity, opd, phase_shift);
    }
    return truth;
}

NyquistReport nyquist_check(const DeviceLayout& layout, const WavenumberGrid& grid)
{
    NyquistReport report;
    report.opd_max_cm = layout.nominal_opd(layout.n_interferometers() - 1);
    const double step = grid.mean_step();
    if (report.opd_max_cm <= 0.0) {
        report.step_bound_cm1 = std::numeric_limits<double>::infinity();
        report.margin = std::numeric_limits<double>::infinity();
        report.pass = true;
        return report;
    }
    report.step_bound_cm1 = 1.0 / (2.0 * report.opd_max_cm);
    report.margin = report.step_bound_cm1 / step;
    report.pass = step < report.step_bound_cm1;
    return report;
}

Datacube simulate_datacube(const DeviceLayout& layout, const WavenumberGrid& grid,
                           const std::vector<TransmittanceParams>& truth, const WaveRegime& regime,
                           const SimulationOptions& options)
{
    const int Ni = layout.n_interferometers();
    if (int(truth.size()) != Ni)
        throw std::invalid_argument("simulate: one truth parameter set per interferometer required");
    const Eigen::Index Na = grid.size();

    Datacube cube(grid, layout.height(), layout.width(), incident_power(options.power, grid));

    for (int k = 0; k < Ni; ++k) {
        const auto& params = truth[std::size_t(k)];
        const Eigen::MatrixXd V = normalized_vandermonde(grid, params.degree());
        const Eigen::VectorXd A = V * params.gain();
        const Eigen::VectorXd R = V * params.reflectivity();
        for (Eigen::Index i = 0; i < Na; ++i)
            if (!(R[i] >= 0.0 && R[i] < 1.0))
                throw std::domain_error("simulate: truth reflectivity outside [0, 1) for interferometer "
                                        + std::to_string(k));

        const auto rect = layout.subimage(k);
        for (int row = rect.top; row < rect.top + rect.height; ++row) {
            for (int col = rect.left; col < rect.left + rect.width; ++col) {
                const double opd = params.opd() * std::cos(layout.incidence_angle(k, {row, col}));
                for (Eigen::Index i = 0; i < Na; ++i) {
                    const double phi = phase(grid[i], opd, params.phase_shift());
                    cube.frame(i)(row, col) = A[i] * mean_scaled_transmittance(R[i], phi, regime)
                                              * cube.incident_power()[i];
                }
            }
        }
    }

    if (const auto* gaussian = std::get_if<AdditiveGaussian>(&options.noise)) {
        if (!(gaussian->relative_std >= 0.0))
            throw std::invalid_argument("simulate: noise std must be >= 0");
        double signal = 0.0;
        long count = 0;
        for (int k = 0; k < Ni; ++k) {
            const auto rect = layout.subimage(k);
            for (Eigen::Index i = 0; i < Na; ++i) {
                signal += cube.frame(i).block(rect.top, rect.left, rect.height, rect.width).sum();
                count += long(rect.height) * rect.width;
            }
        }
        const double std_dev = gaussian->relative_std * signal / double(count);
        if (std_dev > 0.0) {
            // One independent stream per frame keeps the output independent of evaluation order.
            for (Eigen::Index i = 0; i < Na; ++i) {
                std::seed_seq seq{std::uint64_t(options.seed), std::uint64_t(i)};
                std::mt19937_64 engine(seq);
                std::normal_distribution<double> normal(0.0, std_dev);
                auto frame = cube.frame(i);
                for (Eigen::Index p = 0; p < frame.size(); ++p)
                    frame.data()[p] += normal(engine);
            }
        }
    }
    return cube;
}

} // namespace irca
