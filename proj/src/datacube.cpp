#include "irca/datacube.hpp"

#include <cmath>
#include <stdexcept>

namespace irca
{

Datacube::Datacube(WavenumberGrid grid, int height, int width, Eigen::VectorXd incident_power)
    : Datacube(std::move(grid), height, width, std::move(incident_power), {})
{
}

Datacube::Datacube(WavenumberGrid grid, int height, int width, Eigen::VectorXd incident_power,
                   std::vector<double> data)
    : grid_(std::move(grid)), height_(height), width_(width), incident_power_(std::move(incident_power)),
      data_(std::move(data))
{
    if (height_ <= 0 || width_ <= 0)
        throw std::invalid_argument("Datacube: frame dimensions must be positive");
    if (incident_power_.size() != grid_.size())
        throw std::invalid_argument("Datacube: one incident power value per wavenumber required");
    const auto expected = std::size_t(grid_.size()) * std::size_t(frame_size());
    if (data_.empty())
        data_.assign(expected, 0.0);
    else if (data_.size() != expected)
        throw std::invalid_argument("Datacube: payload size does not match n_acq x height x width");
}

void Datacube::validate() const
{
    for (double v : data_)
        if (!std::isfinite(v))
            throw std::domain_error("Datacube: non-finite sample");
    for (Eigen::Index i = 0; i < incident_power_.size(); ++i)
        if (!(incident_power_[i] > 0.0) || !std::isfinite(incident_power_[i]))
            throw std::domain_error("Datacube: incident power must be positive");
}

} // namespace irca
