#include "doctest.h"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "irca/statistics.hpp"
#include "test_support.hpp"

using namespace irca;
using irca::testing::Draws;
using irca::testing::kPi;

namespace
{

WavenumberGrid sweep(Eigen::Index n)
{
    return WavenumberGrid::linspace(6250.0, 10000.0, n);
}

/// Cube whose every sample is drawn by `value(i, row, col)`.
template <typename F>
Datacube make_cube(Eigen::Index n_acq, int height, int width, F value, Eigen::VectorXd power = {})
{
    if (power.size() == 0)
        power = Eigen::VectorXd::Ones(n_acq);
    Datacube cube(sweep(n_acq), height, width, power);
    for (Eigen::Index i = 0; i < n_acq; ++i) {
        auto f = cube.frame(i);
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                f(r, c) = value(i, r, c);
    }
    return cube;
}

} // namespace

TEST_SUITE("power equalization")
{
    TEST_CASE("unit power is the identity")
    {
        Draws d(1);
        const auto cube = make_cube(5, 4, 6, [&](auto, int, int) { return d.uniform(0.0, 3.0); });
        const auto eq = equalize_power(cube);
        CHECK(eq.data() == cube.data());
        CHECK(eq.incident_power() == Eigen::VectorXd::Ones(5));
    }

    TEST_CASE("power two halves every frame and equalization is idempotent")
    {
        Draws d(2);
        const auto cube = make_cube(5, 4, 6, [&](auto, int, int) { return d.uniform(0.0, 3.0); },
                                    Eigen::VectorXd::Constant(5, 2.0));
        const auto eq = equalize_power(cube);
        for (std::size_t j = 0; j < cube.data().size(); ++j)
            CHECK(eq.data()[j] == cube.data()[j] / 2.0);
        CHECK(equalize_power(eq).data() == eq.data());
    }

    TEST_CASE("ratios within a frame are preserved")
    {
        Draws d(3);
        Eigen::VectorXd power(4);
        power << 0.5, 1.5, 3.0, 0.1;
        const auto cube = make_cube(4, 3, 3, [&](auto, int, int) { return d.uniform(0.1, 3.0); }, power);
        const auto eq = equalize_power(cube);
        for (Eigen::Index i = 0; i < 4; ++i)
            CHECK(eq.at(i, 1, 2) / eq.at(i, 0, 0) == doctest::Approx(cube.at(i, 1, 2) / cube.at(i, 0, 0)).epsilon(1e-14));
    }

    TEST_CASE("non-positive or non-finite power is rejected")
    {
        Eigen::VectorXd power = Eigen::VectorXd::Ones(3);
        power[1] = 0.0;
        CHECK_THROWS_AS(equalize_power(make_cube(3, 2, 2, [](auto, int, int) { return 1.0; }, power)), std::domain_error);
        power[1] = -1.0;
        CHECK_THROWS_AS(equalize_power(make_cube(3, 2, 2, [](auto, int, int) { return 1.0; }, power)), std::domain_error);
        CHECK_THROWS_AS(equalize_power(make_cube(3, 2, 2, [](auto, int, int) { return std::nan(""); })), std::domain_error);
    }
}

TEST_SUITE("raw series")
{
    TEST_CASE("uniform frames give a constant series")
    {
        const auto cube = make_cube(7, 3, 4, [](auto, int, int) { return 4.25; });
        CHECK(raw_series(cube, {2, 3}) == Eigen::VectorXd::Constant(7, 4.25));
    }

    TEST_CASE("series follows the frame index")
    {
        const auto cube = make_cube(6, 3, 4, [](Eigen::Index i, int r, int c) { return 100.0 * i + 10.0 * r + c; });
        const Eigen::VectorXd y = raw_series(cube, {1, 2});
        for (Eigen::Index i = 0; i < 6; ++i)
            CHECK(y[i] == 100.0 * i + 12.0);
    }

    TEST_CASE("simulated noiseless cube reproduces the model curve")
    {
        LayoutConfig c;
        c.n_interferometers = 2;
        c.thickness_step_nm = 200.0;
        c.base_thickness_nm = 2000.0;
        c.focal_height = 9;
        c.focal_width = 18;
        c.subimage_height = c.subimage_width = 9;
        const auto layout = DeviceLayout::build(c);
        const auto grid = sweep(80);
        const auto truth = staircase_truth(layout, Eigen::Vector2d(1.0, 0.2), Eigen::Vector2d(0.2, 0.0), 0.4);
        const auto cube = simulate_datacube(layout, grid, truth, WaveRegime::two());
        const Eigen::VectorXd model = transmittance_response(truth[1], WaveRegime::two(), grid);
        CHECK((raw_series(cube, layout.central_pixel(1)) - model).cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("out-of-bounds pixels are rejected")
    {
        const auto cube = make_cube(3, 3, 4, [](auto, int, int) { return 1.0; });
        CHECK_THROWS_AS(raw_series(cube, {3, 0}), std::out_of_range);
        CHECK_THROWS_AS(raw_series(cube, {0, -1}), std::out_of_range);
    }
}

TEST_SUITE("neighborhood mean")
{
    TEST_CASE("kernel one equals the raw series")
    {
        Draws d(4);
        const auto cube = make_cube(6, 8, 8, [&](auto, int, int) { return d.uniform(0.0, 1.0); });
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c)
                CHECK(neighborhood_mean(cube, {r, c}, 1) == raw_series(cube, {r, c}));
    }

    TEST_CASE("uniform frames are preserved for any kernel and clipping")
    {
        const auto cube = make_cube(4, 12, 12, [](Eigen::Index i, int, int) { return 1.0 + double(i); });
        for (int k : {1, 3, 5, 11, 25})
            for (Pixel p : {Pixel{0, 0}, Pixel{5, 6}, Pixel{5, 11}}) {
                const Eigen::VectorXd u = neighborhood_mean(cube, p, k, SubimageRect{0, 0, 6, 12});
                for (Eigen::Index i = 0; i < 4; ++i)
                    CHECK(u[i] == doctest::Approx(1.0 + double(i)).epsilon(1e-15));
            }
    }

    TEST_CASE("window is clipped to the subimage and renormalized")
    {
        // Left half 1, right half 9; a window straddling the boundary but bounded
        // by the left subimage must only see ones.
        const auto cube = make_cube(2, 10, 10, [](auto, int, int c) { return c < 5 ? 1.0 : 9.0; });
        const SubimageRect left{0, 0, 10, 5};
        CHECK(neighborhood_mean(cube, {5, 4}, 5, left) == Eigen::VectorXd::Ones(2));
        const Eigen::VectorXd unbounded = neighborhood_mean(cube, {5, 4}, 5);
        CHECK(unbounded[0] == doctest::Approx((3.0 * 1.0 + 2.0 * 9.0) / 5.0));
        CHECK_THROWS_AS(neighborhood_mean(cube, {5, 7}, 5, left), std::invalid_argument);
    }

    TEST_CASE("corner window averages only the in-frame pixels")
    {
        const auto cube = make_cube(2, 6, 6, [](auto, int r, int c) { return double(r * 6 + c); });
        // 3×3 window at (0,0) clipped to rows/cols {0,1}: values 0, 1, 6, 7.
        CHECK(neighborhood_mean(cube, {0, 0}, 3)[0] == doctest::Approx(3.5));
    }

    TEST_CASE("even or non-positive kernels are rejected")
    {
        const auto cube = make_cube(2, 4, 4, [](auto, int, int) { return 1.0; });
        for (int k : {0, 2, 4, -1})
            CHECK_THROWS_AS(neighborhood_mean(cube, {1, 1}, k), std::invalid_argument);
        CHECK_THROWS_AS(neighborhood_mean(cube, {4, 1}, 3), std::out_of_range);
    }

    TEST_CASE("11 x 11 window reduces i.i.d. noise by a factor 11")
    {
        Draws d(5);
        const auto cube = make_cube(200, 66, 66, [&](auto, int, int) { return 5.0 + d.normal(); });
        double sum_y = 0.0, sum_u = 0.0;
        long n = 0;
        for (int r = 5; r < 61; r += 11)
            for (int c = 5; c < 61; c += 11) {
                const Eigen::VectorXd y = raw_series(cube, {r, c}).array() - 5.0;
                const Eigen::VectorXd u = neighborhood_mean(cube, {r, c}, 11).array() - 5.0;
                sum_y += y.squaredNorm();
                sum_u += u.squaredNorm();
                n += y.size();
            }
        const double ratio = std::sqrt(sum_y / double(n)) / std::sqrt(sum_u / double(n));
        CHECK(ratio == doctest::Approx(11.0).epsilon(0.05));
    }
}

TEST_SUITE("flat-field statistic")
{
    TEST_CASE("nearest-rank arithmetic")
    {
        std::vector<double> v(100);
        std::iota(v.begin(), v.end(), 1.0);
        CHECK(nearest_rank_percentile(v, 90.0) == 90.0);
        CHECK(nearest_rank_percentile(v, 100.0) == 100.0);
        CHECK(nearest_rank_percentile(v, 0.5) == 1.0);
        CHECK(nearest_rank_percentile(v, 90.5) == 91.0);
        CHECK(nearest_rank_percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
        CHECK_THROWS_AS(nearest_rank_percentile({}, 50.0), std::invalid_argument);
        CHECK_THROWS_AS(nearest_rank_percentile(v, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(nearest_rank_percentile(v, 100.5), std::invalid_argument);
    }

    TEST_CASE("frame holding 1..100 gives 90 at the 90th percentile")
    {
        const auto cube = make_cube(2, 10, 10, [](auto, int r, int c) { return double(99 - (r * 10 + c)) + 1.0; });
        CHECK(flat_field_statistic(cube, 90.0) == Eigen::VectorXd::Constant(2, 90.0));
    }

    TEST_CASE("uniform frame gives its value at any percentile")
    {
        const auto cube = make_cube(3, 5, 5, [](Eigen::Index i, int, int) { return 2.0 + double(i); });
        for (double p : {1.0, 50.0, 90.0, 100.0})
            CHECK(flat_field_statistic(cube, p) == Eigen::Vector3d(2.0, 3.0, 4.0));
    }

    TEST_CASE("monotone in the percentile")
    {
        Draws d(6);
        const auto cube = make_cube(3, 9, 9, [&](auto, int, int) { return d.normal(); });
        Eigen::VectorXd previous = flat_field_statistic(cube, 1.0);
        for (double p = 2.0; p <= 100.0; p += 1.0) {
            const Eigen::VectorXd w = flat_field_statistic(cube, p);
            CHECK((w.array() >= previous.array()).all());
            previous = w;
        }
    }

    TEST_CASE("two-wave fringes over a full cycle: 90th percentile is A(1 + alpha cos(0.1 pi))")
    {
        const double A = 1.7, alpha = 0.3;
        const int n = 200 * 200;
        const auto cube = make_cube(2, 200, 200, [&](auto, int r, int c) {
            return A * (1.0 + alpha * std::cos(2.0 * kPi * double(r * 200 + c) / n));
        });
        const double w = flat_field_statistic(cube, 90.0)[0];
        CHECK(w == doctest::Approx(A * (1.0 + alpha * std::cos(0.1 * kPi))).epsilon(1e-4));
        CHECK(w <= A * (1.0 + alpha));
        CHECK(w > A);
    }

    TEST_CASE("subimage scope only looks inside the region")
    {
        const auto cube = make_cube(2, 4, 8, [](auto, int, int c) { return c < 4 ? 1.0 : 5.0; });
        CHECK(flat_field_statistic(cube, 100.0, SubimageRect{0, 0, 4, 4})[0] == 1.0);
        CHECK(flat_field_statistic(cube, 100.0)[0] == 5.0);
        CHECK_THROWS_AS(flat_field_statistic(cube, 50.0, SubimageRect{0, 6, 4, 4}), std::out_of_range);
        CHECK_THROWS_AS(flat_field_statistic(cube, 50.0, SubimageRect{0, 0, 0, 4}), std::invalid_argument);
    }
}

TEST_SUITE("degenerate statistics")
{
    TEST_CASE("u = y and w = mean(y)")
    {
        const auto s = degenerate_statistics(Eigen::Vector2d(2.0, 4.0));
        CHECK(s.y == Eigen::Vector2d(2.0, 4.0));
        CHECK(s.u == Eigen::Vector2d(2.0, 4.0));
        CHECK(s.w == Eigen::Vector2d(3.0, 3.0));
    }

    TEST_CASE("constant series")
    {
        const auto s = degenerate_statistics(Eigen::VectorXd::Constant(5, 1.25));
        CHECK(s.y == s.u);
        CHECK(s.u == s.w);
    }

    TEST_CASE("mean of w equals mean of y")
    {
        Draws d(7);
        for (int t = 0; t < 50; ++t) {
            const Eigen::VectorXd y = d.normal_vector(d.integer(1, 40));
            const auto s = degenerate_statistics(y);
            CHECK(s.w.mean() == doctest::Approx(y.mean()).epsilon(1e-14).scale(1.0));
        }
        CHECK_THROWS_AS(degenerate_statistics(Eigen::VectorXd()), std::invalid_argument);
    }
}
