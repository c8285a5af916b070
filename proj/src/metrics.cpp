#include "irca/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "irca/errors.hpp"
#include "irca/estimator.hpp"

namespace irca
{

double fit_rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, double y_mean)
{
    if (y.size() != fitted.size() || y.size() == 0)
        throw std::invalid_argument("fit_rmse: series must be non-empty and of equal length");
    if (y_mean == 0.0)
        throw std::domain_error("fit_rmse: zero mean signal");
    return std::sqrt(((fitted - y) / y_mean).squaredNorm() / double(y.size()));
}

FitReport fit_report(const std::vector<PixelResult>& results, std::string method, std::string regime)
{
    FitReport report;
    report.method = std::move(method);
    report.regime = std::move(regime);
    std::vector<double> converged;
    for (const auto& r : results) {
        FitReportEntry e{r.interferometer, r.pixel.row, r.pixel.col, r.error ? 0.0 : r.result.rmse, r.usable()};
        report.entries.push_back(e);
        if (!e.converged) {
            ++report.non_converged_count;
            continue;
        }
        ++report.converged_count;
        converged.push_back(e.rmse);
    }
    if (converged.empty())
        return report;
    const Eigen::Map<const Eigen::ArrayXd> values(converged.data(), Eigen::Index(converged.size()));
    report.mean_rmse = values.mean();
    if (values.size() > 1)
        report.std_rmse = std::sqrt((values - report.mean_rmse).square().sum() / double(values.size() - 1));
    return report;
}

OpdStepReport opd_step_report(const std::vector<PixelResult>& results, const DeviceLayout& layout)
{
    const int Ni = layout.n_interferometers();
    OpdStepReport report;
    report.nominal_step = layout.nominal_opd_step();
    report.interferometers.resize(std::size_t(Ni));
    for (int k = 0; k < Ni; ++k) {
        const auto [tr, tc] = layout.tile_of(k);
        report.interferometers[std::size_t(k)] = {k, tr, tc, std::nullopt};
    }
    for (const auto& r : results) {
        if (r.interferometer < 0 || r.interferometer >= Ni)
            throw DataMismatchError("opd_step_report: result for interferometer " + std::to_string(r.interferometer)
                                    + " but the layout has " + std::to_string(Ni));
        if (!r.central || !r.usable())
            continue;
        report.interferometers[std::size_t(r.interferometer)].opd = r.result.params.opd();
    }
    for (const auto& entry : report.interferometers)
        if (!entry.opd)
            report.missing.push_back(entry.index);
    for (int k = 0; k + 1 < Ni; ++k) {
        OpdStepReport::Step step{k, std::nullopt, std::nullopt};
        const auto& a = report.interferometers[std::size_t(k)].opd;
        const auto& b = report.interferometers[std::size_t(k + 1)].opd;
        if (a && b) {
            step.difference = *b - *a;
            step.deviation = *step.difference - report.nominal_step;
        }
        report.steps.push_back(step);
    }
    return report;
}

ParameterMaps parameter_maps(const std::vector<PixelResult>& results, const DeviceLayout& layout,
                             const WavenumberGrid& grid)
{
    ParameterMaps maps;
    std::map<int, const PixelResult*> centers;
    for (const auto& r : results) {
        if (layout.interferometer_at(r.pixel) != r.interferometer)
            throw DataMismatchError("parameter_maps: result pixel does not belong to its interferometer's subimage");
        if (r.central)
            centers[r.interferometer] = &r;
    }

    std::map<int, bool> skipped;
    for (const auto& r : results) {
        const auto c = centers.find(r.interferometer);
        if (c == centers.end() || !c->second->usable() || !(c->second->result.params.opd() > 0.0)) {
            if (!skipped[r.interferometer]) {
                skipped[r.interferometer] = true;
                maps.skipped_subimages.push_back(r.interferometer);
                maps.warnings.push_back("subimage " + std::to_string(r.interferometer)
                                        + ": no usable center pixel result, skipped");
            }
            continue;
        }
        MapEntry e;
        e.row = r.pixel.row;
        e.col = r.pixel.col;
        e.interferometer = r.interferometer;
        e.masked = !r.usable();
        if (e.masked) {
            ++maps.masked_count;
        } else {
            const double center = c->second->result.params.opd();
            e.relative_opd = (r.result.params.opd() - center) / center;
            const Eigen::MatrixXd V = normalized_vandermonde(grid, r.result.params.degree());
            e.mean_reflectivity = (V * r.result.params.reflectivity()).mean();
        }
        maps.entries.push_back(e);
    }
    return maps;
}

} // namespace irca
