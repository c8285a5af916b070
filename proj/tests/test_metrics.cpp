#include "doctest.h"

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "irca/errors.hpp"
#include "irca/estimator.hpp"
#include "irca/metrics.hpp"
#include "test_support.hpp"

using namespace irca;
using irca::testing::Draws;
using Vec = Eigen::VectorXd;

namespace
{

LayoutConfig tiled_layout(int n, int tiles_per_row, double angular_scale = 0.0)
{
    LayoutConfig c;
    c.n_interferometers = n;
    c.thickness_step_nm = 200.0;
    c.base_thickness_nm = 2000.0;
    c.subimage_height = c.subimage_width = 13;
    c.focal_width = 13 * tiles_per_row;
    c.focal_height = 13 * ((n + tiles_per_row - 1) / tiles_per_row);
    c.angular_scale = angular_scale;
    return c;
}

PixelResult synthetic_result(int k, Pixel p, bool central, double opd, double rmse, bool converged = true)
{
    PixelResult r;
    r.interferometer = k;
    r.pixel = p;
    r.central = central;
    r.result.params = TransmittanceParams(Vec::Ones(1), Vec::Constant(1, 0.13), opd, 0.0);
    r.result.rmse = rmse;
    r.result.refine_report.converged = converged;
    return r;
}

std::vector<PixelResult> central_results(const DeviceLayout& layout, const std::vector<double>& opds)
{
    std::vector<PixelResult> out;
    for (int k = 0; k < int(opds.size()); ++k)
        out.push_back(synthetic_result(k, layout.central_pixel(k), true, opds[std::size_t(k)], 0.01));
    return out;
}

std::vector<PixelResult> full_plane(const DeviceLayout& layout, const WavenumberGrid& grid, double angular_scale_used,
                                    unsigned jobs = 1)
{
    (void)angular_scale_used;
    const auto truth = staircase_truth(layout, Eigen::Vector2d(1.0, 0.05), Eigen::Vector2d(0.13, 0.01), 0.0);
    const auto cube = simulate_datacube(layout, grid, truth, WaveRegime::infinite());
    IrcaConfig cfg;
    cfg.degree = 1;
    return characterize_device(cube, layout, cfg, PixelSelector::all(), {}, jobs);
}

} // namespace

TEST_SUITE("fit rmse")
{
    TEST_CASE("examples")
    {
        Draws d(1);
        const Vec y = (d.normal_vector(50).array() * 0.1 + 2.0).matrix();
        CHECK(fit_rmse(y, y) == 0.0);
        const Vec shifted = (y.array() + y.mean()).matrix();
        CHECK(fit_rmse(y, shifted) == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("joint positive scaling leaves the value unchanged")
    {
        Draws d(2);
        for (int t = 0; t < 50; ++t) {
            const Vec y = (d.normal_vector(40).array() * 0.2 + 1.0).matrix();
            const Vec fit = y + d.normal_vector(40, 0.05);
            const double c = d.uniform(1e-3, 1e3);
            CHECK(fit_rmse(Vec(c * y), Vec(c * fit)) == doctest::Approx(fit_rmse(y, fit)).epsilon(1e-12));
        }
    }

    TEST_CASE("definition against a direct sum")
    {
        const Vec y = Eigen::Vector4d(1.0, 2.0, 3.0, 4.0);
        const Vec t = Eigen::Vector4d(1.5, 2.0, 2.0, 4.5);
        // ȳ = 2.5; squared scaled errors 0.04, 0, 0.16, 0.04.
        CHECK(fit_rmse(y, t) == doctest::Approx(std::sqrt(0.24 / 4.0)).epsilon(1e-15));
    }

    TEST_CASE("errors")
    {
        CHECK_THROWS_AS(fit_rmse(Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(1.0, 1.0)), std::domain_error);
        CHECK_THROWS_AS(fit_rmse(Eigen::Vector2d(1.0, 1.0), Eigen::Vector3d(1.0, 1.0, 1.0)), std::invalid_argument);
    }
}

TEST_SUITE("fit report")
{
    TEST_CASE("aggregates over converged fits only")
    {
        const auto layout = DeviceLayout::build(tiled_layout(5, 5));
        auto results = central_results(layout, {4e-4, 4.4e-4, 4.8e-4, 5.2e-4, 5.6e-4});
        const double rmse[] = {0.01, 0.03, 0.5, 0.02, 0.9};
        for (std::size_t i = 0; i < results.size(); ++i)
            results[i].result.rmse = rmse[i];
        results[2].result.refine_report.converged = false;
        results[4].error = "boom";
        const auto report = fit_report(results, "ml+lm", "inf-wave");
        CHECK(report.method == "ml+lm");
        CHECK(report.regime == "inf-wave");
        CHECK(report.entries.size() == 5);
        CHECK(report.converged_count == 3);
        CHECK(report.non_converged_count == 2);
        CHECK(report.mean_rmse == doctest::Approx(0.02));
        CHECK(report.std_rmse == doctest::Approx(0.01)); // sample std of {0.01, 0.03, 0.02}
        CHECK_FALSE(report.entries[2].converged);
    }

    TEST_CASE("std is never negative")
    {
        const auto layout = DeviceLayout::build(tiled_layout(3, 3));
        auto results = central_results(layout, {4e-4, 4.4e-4, 4.8e-4});
        for (auto& r : results)
            r.result.rmse = 0.1 + 1e-17;
        const auto report = fit_report(results, "m", "r");
        CHECK(report.std_rmse >= 0.0);
        CHECK(report.std_rmse < 1e-15);
        CHECK(fit_report({}, "m", "r").mean_rmse == 0.0);
    }
}

TEST_SUITE("opd step report")
{
    TEST_CASE("perfect staircase has zero deviations")
    {
        const auto layout = DeviceLayout::build(tiled_layout(6, 3));
        std::vector<double> opds;
        for (int k = 0; k < 6; ++k)
            opds.push_back(layout.nominal_opd(k));
        const auto report = opd_step_report(central_results(layout, opds), layout);
        REQUIRE(report.interferometers.size() == 6);
        REQUIRE(report.steps.size() == 5);
        CHECK(report.missing.empty());
        for (const auto& s : report.steps)
            CHECK(std::abs(*s.deviation) < 1e-15);
        CHECK(report.interferometers[4].tile_row == 1);
        CHECK(report.interferometers[4].tile_col == 1);
    }

    TEST_CASE("step sum telescopes exactly")
    {
        const auto layout = DeviceLayout::build(tiled_layout(10, 5));
        Draws d(3);
        std::vector<double> opds;
        for (int k = 0; k < 10; ++k)
            opds.push_back(layout.nominal_opd(k) * (1.0 + d.normal(0.0, 1e-3)));
        const auto report = opd_step_report(central_results(layout, opds), layout);
        double sum = 0.0;
        for (const auto& s : report.steps)
            sum += *s.difference;
        CHECK(sum == doctest::Approx(opds.back() - opds.front()).epsilon(1e-12));
    }

    TEST_CASE("two interferometers give a single step")
    {
        const auto layout = DeviceLayout::build(tiled_layout(2, 2));
        const auto report = opd_step_report(central_results(layout, {4e-4, 4.5e-4}), layout);
        REQUIRE(report.steps.size() == 1);
        CHECK(*report.steps[0].difference == doctest::Approx(5e-5));
        CHECK(*report.steps[0].deviation == doctest::Approx(5e-5 - layout.nominal_opd_step()));
    }

    TEST_CASE("missing interferometers are flagged as gaps")
    {
        const auto layout = DeviceLayout::build(tiled_layout(4, 4));
        auto results = central_results(layout, {4e-4, 4.4e-4, 4.8e-4, 5.2e-4});
        results[2].result.refine_report.converged = false;
        results.erase(results.begin() + 3);
        const auto report = opd_step_report(results, layout);
        CHECK(report.missing == std::vector<int>{2, 3});
        CHECK(report.steps[0].difference);
        CHECK_FALSE(report.steps[1].difference);
        CHECK_FALSE(report.steps[2].deviation);
        CHECK_THROWS_AS(opd_step_report(central_results(DeviceLayout::build(tiled_layout(5, 5)), {1, 2, 3, 4, 5}), layout),
                        DataMismatchError);
    }

    TEST_CASE("injected tilt is reproduced by the estimated deviations")
    {
        const auto layout = DeviceLayout::build(tiled_layout(6, 3));
        const auto grid = WavenumberGrid::linspace(6250.0, 10000.0, 343);
        const StaircaseTilt tilt{5e-6, 1e-6};
        const auto truth = staircase_truth(layout, Eigen::Vector2d(1.0, 0.05), Eigen::Vector2d(0.13, 0.0), 0.0, tilt);
        const auto cube = simulate_datacube(layout, grid, truth, WaveRegime::infinite());
        IrcaConfig cfg;
        cfg.degree = 1;
        const auto results = characterize_device(cube, layout, cfg, PixelSelector::central(), {}, 1);
        const auto report = opd_step_report(results, layout);
        REQUIRE(report.missing.empty());
        for (int k = 0; k < 5; ++k) {
            const double expected = truth[std::size_t(k + 1)].opd() - truth[std::size_t(k)].opd() - layout.nominal_opd_step();
            CHECK(std::abs(*report.steps[std::size_t(k)].deviation - expected) < 1e-5 * layout.nominal_opd(5));
        }
        // Within a tile row the deviation is the column tilt; across the row break it jumps.
        CHECK(*report.steps[0].deviation > 0.0);
        CHECK(std::abs(*report.steps[2].deviation - *report.steps[0].deviation) > 1e-6);
    }
}

TEST_SUITE("parameter maps")
{
    TEST_CASE("uniform angle gives a zero relative map, exactly zero at centers")
    {
        const auto layout = DeviceLayout::build(tiled_layout(2, 2, 0.0));
        const auto grid = WavenumberGrid::linspace(6250.0, 10000.0, 200);
        const auto results = full_plane(layout, grid, 0.0);
        const auto maps = parameter_maps(results, layout, grid);
        REQUIRE(maps.entries.size() == 2 * 169);
        CHECK(maps.masked_count == 0);
        CHECK(maps.skipped_subimages.empty());
        for (const auto& e : maps.entries) {
            CHECK(std::abs(e.relative_opd) < 1e-8);
            CHECK(e.mean_reflectivity == doctest::Approx(0.13).epsilon(1e-4));
            if (Pixel{e.row, e.col} == layout.central_pixel(e.interferometer))
                CHECK(e.relative_opd == 0.0);
        }
    }

    TEST_CASE("radial angle gives a map decreasing from the axis")
    {
        const auto layout = DeviceLayout::build(tiled_layout(1, 1, 0.02));
        const auto grid = WavenumberGrid::linspace(6250.0, 10000.0, 200);
        const auto maps = parameter_maps(full_plane(layout, grid, 0.02), layout, grid);
        const Pixel c = layout.central_pixel(0);
        std::map<int, std::vector<double>> rings;
        for (const auto& e : maps.entries) {
            const double radius = std::hypot(e.row - c.row, e.col - c.col);
            rings[int(std::floor(radius))].push_back(e.relative_opd);
            // cos θ oracle: δ(p)/δ(center) − 1 = cos θ(p)/cos θ(center) − 1.
            const double oracle = std::cos(layout.incidence_angle(0, Pixel{e.row, e.col}))
                                      / std::cos(layout.incidence_angle(0, c))
                                  - 1.0;
            CHECK(e.relative_opd == doctest::Approx(oracle).epsilon(1e-4).scale(1e-8));
        }
        double previous = 1.0;
        for (const auto& [ring, values] : rings) {
            const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
            CHECK(mean < previous);
            previous = mean;
        }
    }

    TEST_CASE("masked count equals the number of injected failures")
    {
        const auto layout = DeviceLayout::build(tiled_layout(1, 1, 0.01));
        const auto grid = WavenumberGrid::linspace(6250.0, 10000.0, 120);
        auto results = full_plane(layout, grid, 0.01);
        Draws d(4);
        int injected = 0;
        for (auto& r : results) {
            if (r.central || d.uniform(0.0, 1.0) > 0.1)
                continue;
            if (injected % 2 == 0)
                r.result.refine_report.converged = false;
            else
                r.error = "injected failure";
            ++injected;
        }
        REQUIRE(injected > 0);
        const auto maps = parameter_maps(results, layout, grid);
        CHECK(maps.masked_count == injected);
        CHECK(maps.entries.size() == results.size());
    }

    TEST_CASE("a subimage without its center is skipped with a warning")
    {
        const auto layout = DeviceLayout::build(tiled_layout(2, 2, 0.0));
        const auto grid = WavenumberGrid::linspace(6250.0, 10000.0, 120);
        auto results = full_plane(layout, grid, 0.0);
        std::erase_if(results, [&](const PixelResult& r) { return r.interferometer == 1 && r.central; });
        const auto maps = parameter_maps(results, layout, grid);
        CHECK(maps.skipped_subimages == std::vector<int>{1});
        CHECK(maps.warnings.size() == 1);
        CHECK(maps.entries.size() == 169);
    }
}
