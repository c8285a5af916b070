#include "irca/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irca
{

Datacube equalize_power(const Datacube& cube)
{
    cube.validate();
    std::vector<double> data = cube.data();
    const Eigen::Index fs = cube.frame_size();
    for (Eigen::Index i = 0; i < cube.n_acq(); ++i) {
        const double p = cube.incident_power()[i];
        for (Eigen::Index j = 0; j < fs; ++j)
            data[std::size_t(i * fs + j)] /= p;
    }
    return Datacube(cube.grid(), cube.height(), cube.width(), Eigen::VectorXd::Ones(cube.n_acq()),
                    std::move(data));
}

Eigen::VectorXd raw_series(const Datacube& cube, Pixel pixel)
{
    if (!cube.contains(pixel))
        throw std::out_of_range("raw_series: pixel outside the focal plane");
    Eigen::VectorXd y(cube.n_acq());
    for (Eigen::Index i = 0; i < cube.n_acq(); ++i)
        y[i] = cube.at(i, pixel.row, pixel.col);
    return y;
}

Eigen::VectorXd neighborhood_mean(const Datacube& cube, Pixel pixel, int kernel,
                                  const std::optional<SubimageRect>& bounds)
{
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("neighborhood_mean: kernel must be an odd integer >= 1");
    if (!cube.contains(pixel))
        throw std::out_of_range("neighborhood_mean: pixel outside the focal plane");
    const int half = kernel / 2;
    int top = std::max(pixel.row - half, 0);
    int left = std::max(pixel.col - half, 0);
    int bottom = std::min(pixel.row + half + 1, cube.height());
    int right = std::min(pixel.col + half + 1, cube.width());
    if (bounds) {
        if (!bounds->contains(pixel))
            throw std::invalid_argument("neighborhood_mean: pixel outside its subimage bounds");
        top = std::max(top, bounds->top);
        left = std::max(left, bounds->left);
        bottom = std::min(bottom, bounds->top + bounds->height);
        right = std::min(right, bounds->left + bounds->width);
    }
    Eigen::VectorXd u(cube.n_acq());
    for (Eigen::Index i = 0; i < cube.n_acq(); ++i)
        u[i] = cube.frame(i).block(top, left, bottom - top, right - left).mean();
    return u;
}

double nearest_rank_percentile(std::vector<double> values, double percentile)
{
    if (values.empty())
        throw std::invalid_argument("percentile: empty sample");
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw std::invalid_argument("percentile: must lie in (0, 100]");
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * double(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    auto nth = values.begin() + std::ptrdiff_t(rank - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

Eigen::VectorXd flat_field_statistic(const Datacube& cube, double percentile)
{
    return flat_field_statistic(cube, percentile, SubimageRect{0, 0, cube.height(), cube.width()});
}

Eigen::VectorXd flat_field_statistic(const Datacube& cube, double percentile, const SubimageRect& region)
{
    if (region.height <= 0 || region.width <= 0)
        throw std::invalid_argument("flat_field_statistic: empty frame region");
    if (region.top < 0 || region.left < 0 || region.top + region.height > cube.height()
        || region.left + region.width > cube.width())
        throw std::out_of_range("flat_field_statistic: region outside the focal plane");
    Eigen::VectorXd w(cube.n_acq());
    std::vector<double> buffer(std::size_t(region.height) * std::size_t(region.width));
    for (Eigen::Index i = 0; i < cube.n_acq(); ++i) {
        Eigen::Map<RowMajorMatrixXd>(buffer.data(), region.height, region.width)
            = cube.frame(i).block(region.top, region.left, region.height, region.width);
        w[i] = nearest_rank_percentile(buffer, percentile);
    }
    return w;
}

PixelStatistics degenerate_statistics(const Eigen::VectorXd& y)
{
    if (y.size() == 0)
        throw std::invalid_argument("degenerate_statistics: empty series");
    PixelStatistics stats;
    stats.y = y;
    stats.u = y;
    stats.w = Eigen::VectorXd::Constant(y.size(), y.mean());
    return stats;
}

} // namespace irca
