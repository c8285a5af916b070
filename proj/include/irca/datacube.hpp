#pragma once

#include <vector>

#include <Eigen/Core>

#include "irca/core_model.hpp"

namespace irca
{

using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pixel position on the focal plane.
struct Pixel
{
    int row = 0;
    int col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// N_a flat-field frames of height × width pixels, one per grid wavenumber,
/// stored acquisition-major then row-major.
class Datacube
{
public:
    using FrameMap = Eigen::Map<RowMajorMatrixXd>;
    using ConstFrameMap = Eigen::Map<const RowMajorMatrixXd>;

    Datacube() = default;
    Datacube(WavenumberGrid grid, int height, int width, Eigen::VectorXd incident_power);
    Datacube(WavenumberGrid grid, int height, int width, Eigen::VectorXd incident_power, std::vector<double> data);

    const WavenumberGrid& grid() const { return grid_; }
    Eigen::Index n_acq() const { return grid_.size(); }
    int height() const { return height_; }
    int width() const { return width_; }
    const Eigen::VectorXd& incident_power() const { return incident_power_; }

    FrameMap frame(Eigen::Index i) { return {data_.data() + i * frame_size(), height_, width_}; }
    ConstFrameMap frame(Eigen::Index i) const { return {data_.data() + i * frame_size(), height_, width_}; }

    double at(Eigen::Index i, int row, int col) const { return data_[i * frame_size() + row * width_ + col]; }

    bool contains(Pixel p) const { return p.row >= 0 && p.row < height_ && p.col >= 0 && p.col < width_; }

    const std::vector<double>& data() const { return data_; }
    Eigen::Index frame_size() const { return Eigen::Index(height_) * width_; }

    /// Throws unless every sample is finite and every power is positive.
    void validate() const;

private:
    WavenumberGrid grid_;
    int height_ = 0;
    int width_ = 0;
    Eigen::VectorXd incident_power_;
    std::vector<double> data_;
};

} // namespace irca
