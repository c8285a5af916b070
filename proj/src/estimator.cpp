#include "irca/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "irca/errors.hpp"
#include "irca/metrics.hpp"

namespace irca
{

namespace
{
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_length(const Eigen::VectorXd& v, const WavenumberGrid& grid, const char* what)
{
    if (v.size() != grid.size())
        throw std::invalid_argument(std::string(what) + ": length does not match the wavenumber grid");
}
} // namespace

void IrcaConfig::validate(const WavenumberGrid& grid) const
{
    if (degree < 0)
        throw std::invalid_argument("IrcaConfig: polynomial degree must be >= 0");
    if (grid.size() < degree + 1)
        throw std::invalid_argument("IrcaConfig: need at least degree + 1 wavenumbers");
    if (oversampling < 1)
        throw std::invalid_argument("IrcaConfig: oversampling must be >= 1");
    if (!(nominal_margin >= 0.0))
        throw std::invalid_argument("IrcaConfig: nominal margin must be >= 0");
    if (guard_bins < 0)
        throw std::invalid_argument("IrcaConfig: guard_bins must be >= 0");
    if (opd_interval) {
        if (!(opd_interval->lo >= 0.0 && opd_interval->lo < opd_interval->hi
              && opd_interval->hi <= opd_nyquist(grid) * (1.0 + 1e-12)))
            throw std::invalid_argument("IrcaConfig: OPD interval must satisfy 0 <= lo < hi <= 1/(2 dsigma)");
    }
    if (es_reflectivity_steps < 1 || es_phase_steps < 1)
        throw std::invalid_argument("IrcaConfig: exhaustive-search grids need at least one point");
    if (!(es_reflectivity_max >= 0.0 && es_reflectivity_max < 1.0))
        throw std::invalid_argument("IrcaConfig: exhaustive-search reflectivity bound must lie in [0, 1)");
    gain_lm.validate();
    refine_lm.validate();
}

/*=============================================================================*/

GainEstimate estimate_gain(const Eigen::VectorXd& w, const WavenumberGrid& grid, int degree, const LmConfig& lm)
{
    require_length(w, grid, "estimate_gain");
    if (!w.allFinite())
        throw std::invalid_argument("estimate_gain: non-finite flat-field statistic");
    if (degree < 0 || grid.size() < degree + 1)
        throw std::invalid_argument("estimate_gain: need at least degree + 1 samples");

    const Eigen::MatrixXd V = normalized_vandermonde(grid, degree);
    LmProblem<double> problem;
    problem.parameter_count = degree + 1;
    problem.residual = [&](const Eigen::VectorXd& a) -> Eigen::VectorXd { return V * a - w; };
    problem.jacobian = [&](const Eigen::VectorXd&) -> Eigen::MatrixXd { return V; };

    Eigen::VectorXd a0 = Eigen::VectorXd::Zero(degree + 1);
    a0[0] = w.mean();
    GainEstimate out;
    out.report = lm_solve(problem, a0, lm);
    out.coeffs = out.report.parameters;
    return out;
}

Eigen::VectorXd fringe_contrast_series(const Eigen::VectorXd& u, const Eigen::VectorXd& gain,
                                       const WavenumberGrid& grid)
{
    require_length(u, grid, "fringe_contrast_series");
    const Eigen::VectorXd A = normalized_vandermonde(grid, int(gain.size()) - 1) * gain;
    if (!(A.array() > 0.0).all())
        throw std::domain_error("fringe_contrast_series: estimated gain is not positive on the grid");
    return ((u.array() - A.array()) / A.array()).matrix();
}

double opd_resolution(const WavenumberGrid& grid)
{
    return 1.0 / (2.0 * double(grid.size()) * grid.mean_step());
}

double opd_nyquist(const WavenumberGrid& grid)
{
    return 1.0 / (2.0 * grid.mean_step());
}

OpdInterval default_opd_interval(const WavenumberGrid& grid, const IrcaConfig& config,
                                 std::optional<double> nominal_opd)
{
    if (config.opd_interval)
        return *config.opd_interval;
    const double top = opd_nyquist(grid);
    if (nominal_opd) {
        const double lo = std::clamp(*nominal_opd * (1.0 - config.nominal_margin), 0.0, top);
        const double hi = std::clamp(*nominal_opd * (1.0 + config.nominal_margin), 0.0, top);
        return {lo, hi};
    }
    const double guard = double(config.guard_bins) * opd_resolution(grid);
    if (2.0 * guard >= top)
        return {0.0, top};
    return {guard, top - guard};
}

double periodogram(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd)
{
    double re = 0.0, im = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double theta = kTwoPi * opd * grid[i];
        re += v[i] * std::cos(theta);
        im -= v[i] * std::sin(theta);
    }
    return std::hypot(re, im);
}

Eigen::VectorXd periodogram_grid(const WavenumberGrid& grid, const OpdInterval& interval, int oversampling)
{
    if (oversampling < 1)
        throw std::invalid_argument("periodogram: oversampling must be >= 1");
    if (!(interval.lo <= interval.hi) || !(interval.lo >= 0.0))
        throw std::invalid_argument("periodogram: empty OPD interval");
    const double step = opd_resolution(grid) / double(oversampling);
    const auto count = static_cast<Eigen::Index>(std::floor((interval.hi - interval.lo) / step + 1e-9)) + 1;
    return Eigen::VectorXd::LinSpaced(count, interval.lo, interval.lo + double(count - 1) * step);
}

PeriodogramPeak periodogram_opd(const Eigen::VectorXd& v, const WavenumberGrid& grid, const OpdInterval& interval,
                                int oversampling)
{
    require_length(v, grid, "periodogram_opd");
    const Eigen::VectorXd candidates = periodogram_grid(grid, interval, oversampling);
    PeriodogramPeak peak;
    peak.opd = candidates[0];
    peak.power = -1.0;
    for (Eigen::Index k = 0; k < candidates.size(); ++k) {
        const double p = periodogram(v, grid, candidates[k]);
        if (p > peak.power) {
            peak.power = p;
            peak.opd = candidates[k];
            peak.tied = false;
        } else if (p == peak.power) {
            peak.tied = true;
        }
    }
    peak.degenerate = peak.power == 0.0;
    return peak;
}

double ml_amplitude(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd)
{
    require_length(v, grid, "ml_amplitude");
    return 2.0 / double(v.size()) * periodogram(v, grid, opd);
}

double ml_reflectivity(double alpha, ReflectivityInversion mode)
{
    constexpr double tolerance = 1e-9;
    if (!(alpha >= -tolerance && alpha <= 1.0 + tolerance))
        throw std::domain_error("ml_reflectivity: amplitude outside [0, 1], inconsistent fringe contrast");
    alpha = std::clamp(alpha, 0.0, 1.0);
    const double root = std::sqrt((1.0 - alpha) * (1.0 + alpha));
    if (mode == ReflectivityInversion::Compatibility)
        return 1.0 - std::sqrt(1.0 - alpha * alpha);
    // Smaller root of α r² − 2r + α = 0, written without cancellation.
    return alpha / (1.0 + root);
}

PhaseEstimate ml_phase(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd)
{
    require_length(v, grid, "ml_phase");
    double s = 0.0, c = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double theta = kTwoPi * opd * grid[i];
        s += v[i] * std::sin(theta);
        c += v[i] * std::cos(theta);
    }
    if (s == 0.0 && c == 0.0)
        return {0.0, true};
    return {wrap_phase(std::atan2(s, c)), false};
}

InitialEstimate es_initialize(const Eigen::VectorXd& v, const WavenumberGrid& grid, const Eigen::VectorXd& opd_grid,
                              const Eigen::VectorXd& reflectivity_grid, const Eigen::VectorXd& phase_grid,
                              const WaveRegime& regime)
{
    require_length(v, grid, "es_initialize");
    if (opd_grid.size() == 0 || reflectivity_grid.size() == 0 || phase_grid.size() == 0)
        throw std::invalid_argument("es_initialize: search grids must be non-empty");

    const Eigen::Index Na = grid.size();
    InitialEstimate best{opd_grid[0], reflectivity_grid[0], phase_grid[0]};
    double best_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd phases(Na);
    for (Eigen::Index a = 0; a < opd_grid.size(); ++a) {
        for (Eigen::Index b = 0; b < reflectivity_grid.size(); ++b) {
            const double r = reflectivity_grid[b];
            for (Eigen::Index c = 0; c < phase_grid.size(); ++c) {
                double cost = 0.0;
                for (Eigen::Index i = 0; i < Na && cost < best_cost; ++i) {
                    const double phi = phase(grid[i], opd_grid[a], phase_grid[c]);
                    const double d = mean_scaled_transmittance(r, phi, regime) - 1.0 - v[i];
                    cost += d * d;
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best = {opd_grid[a], r, phase_grid[c]};
                }
            }
        }
    }
    return best;
}

/*=============================================================================*/

Eigen::VectorXd RefineProblem::to_solver(const TransmittanceParams& params) const
{
    const Eigen::Index n = degree + 1;
    const Eigen::Index gain_block = fixed_gain_shape ? 1 : n;
    Eigen::VectorXd z(gain_block + n + 2);
    if (fixed_gain_shape)
        z[0] = 1.0;
    else
        z.head(n) = params.gain();
    z.segment(gain_block, n) = params.reflectivity();
    z[gain_block + n] = params.opd() / opd_scale;
    z[gain_block + n + 1] = params.phase_shift();
    return z;
}

namespace
{
Eigen::VectorXd solver_to_beta(const RefineProblem& rp, const Eigen::VectorXd& z)
{
    const Eigen::Index n = rp.degree + 1;
    const Eigen::Index gain_block = rp.fixed_gain_shape ? 1 : n;
    Eigen::VectorXd beta(2 * n + 2);
    if (rp.fixed_gain_shape)
        beta.head(n) = z[0] * *rp.fixed_gain_shape;
    else
        beta.head(n) = z.head(n);
    beta.segment(n, n) = z.segment(gain_block, n);
    beta[2 * n] = z[gain_block + n] * rp.opd_scale;
    beta[2 * n + 1] = z[gain_block + n + 1];
    return beta;
}
} // namespace

TransmittanceParams RefineProblem::from_solver(const Eigen::VectorXd& z) const
{
    Eigen::VectorXd beta = solver_to_beta(*this, z);
    const Eigen::Index n = degree + 1;
    // The response is even in φ, so (δ, φ0) and (−δ, −φ0) are the same model.
    if (beta[2 * n] < 0.0) {
        beta[2 * n] = -beta[2 * n];
        beta[2 * n + 1] = -beta[2 * n + 1];
    }
    return TransmittanceParams::from_vector(beta, degree);
}

RefineProblem make_refine_problem(const Eigen::VectorXd& y, const WavenumberGrid& grid, int degree,
                                  const WaveRegime& regime, std::optional<Eigen::VectorXd> fixed_gain_shape)
{
    require_length(y, grid, "refine");
    if (fixed_gain_shape && fixed_gain_shape->size() != degree + 1)
        throw std::invalid_argument("refine: fixed gain shape has wrong length");

    RefineProblem rp;
    rp.degree = degree;
    rp.opd_scale = 1.0 / (kTwoPi * grid.sigma_max());
    rp.fixed_gain_shape = std::move(fixed_gain_shape);

    const Eigen::Index n = degree + 1;
    const Eigen::Index gain_block = rp.fixed_gain_shape ? 1 : n;
    rp.problem.parameter_count = gain_block + n + 2;

    // Captured by value: the problem outlives this frame.
    const RefineProblem shape = rp;
    rp.problem.residual = [shape, y, grid, regime](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return response_from_vector(solver_to_beta(shape, z), shape.degree, regime, grid) - y;
    };
    rp.problem.jacobian = [shape, grid, regime, n, gain_block](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
        Eigen::MatrixXd Jb;
        response_from_vector(solver_to_beta(shape, z), shape.degree, regime, grid, &Jb);
        Eigen::MatrixXd Jz(Jb.rows(), gain_block + n + 2);
        if (shape.fixed_gain_shape)
            Jz.col(0) = Jb.leftCols(n) * *shape.fixed_gain_shape;
        else
            Jz.leftCols(n) = Jb.leftCols(n);
        Jz.middleCols(gain_block, n) = Jb.middleCols(n, n);
        Jz.col(gain_block + n) = Jb.col(2 * n) * shape.opd_scale;
        Jz.col(gain_block + n + 1) = Jb.col(2 * n + 1);
        return Jz;
    };
    return rp;
}

RefineResult refine(const Eigen::VectorXd& y, const WavenumberGrid& grid, const TransmittanceParams& initial,
                    const WaveRegime& regime, const LmConfig& lm, bool fixed_gain)
{
    const int degree = initial.degree();
    std::optional<Eigen::VectorXd> shape;
    if (fixed_gain)
        shape = initial.gain();
    const RefineProblem rp = make_refine_problem(y, grid, degree, regime, shape);
    const Eigen::VectorXd z0 = rp.to_solver(initial);

    RefineResult out;
    out.report = lm_solve(rp.problem, z0, lm);
    out.initial_cost = out.report.cost_history.front();
    out.params = rp.from_solver(out.report.parameters);
    out.violation = out.params.check_on(grid);
    return out;
}

/*=============================================================================*/

CharacterizationResult characterize_pixel(const PixelStatistics& stats, const WavenumberGrid& grid,
                                          const IrcaConfig& config, std::optional<double> nominal_opd)
{
    config.validate(grid);
    require_length(stats.y, grid, "characterize_pixel (y)");
    require_length(stats.u, grid, "characterize_pixel (u)");
    require_length(stats.w, grid, "characterize_pixel (w)");

    CharacterizationResult out;

    // Step 1: gain from the flat-field statistic.
    auto gain = estimate_gain(stats.w, grid, config.degree, config.gain_lm);
    out.gain_estimate = gain.coeffs;
    out.gain_report = std::move(gain.report);

    // Step 2: initialization from the neighborhood mean.
    const Eigen::VectorXd v = fringe_contrast_series(stats.u, out.gain_estimate, grid);
    out.opd_interval = default_opd_interval(grid, config, nominal_opd);
    if (config.initializer == Initializer::MaximumLikelihood) {
        const auto peak = periodogram_opd(v, grid, out.opd_interval, config.oversampling);
        out.opd_estimate = peak.opd;
        out.periodogram_degenerate = peak.degenerate;
        out.periodogram_tied = peak.tied;
        out.amplitude_estimate = ml_amplitude(v, grid, peak.opd);
        double alpha = out.amplitude_estimate;
        constexpr double alpha_max = 1.0 - 1e-6;
        if (alpha > alpha_max) {
            alpha = alpha_max;
            out.amplitude_clamped = true;
        }
        out.reflectivity_estimate = ml_reflectivity(alpha, config.inversion);
        const auto ph = ml_phase(v, grid, peak.opd);
        out.phase_estimate = ph.phase_shift;
        out.phase_degenerate = ph.degenerate;
    } else {
        const Eigen::VectorXd opds = periodogram_grid(grid, out.opd_interval, config.oversampling);
        const Eigen::VectorXd refl
            = Eigen::VectorXd::LinSpaced(config.es_reflectivity_steps, 0.0, config.es_reflectivity_max);
        Eigen::VectorXd phases(config.es_phase_steps);
        for (int j = 0; j < config.es_phase_steps; ++j)
            phases[j] = -std::numbers::pi + kTwoPi * double(j) / double(config.es_phase_steps);
        const auto init = es_initialize(v, grid, opds, refl, phases, config.regime);
        out.opd_estimate = init.opd;
        out.reflectivity_estimate = init.reflectivity;
        out.phase_estimate = init.phase_shift;
        out.amplitude_estimate = 2.0 * init.reflectivity / (1.0 + init.reflectivity * init.reflectivity);
    }

    // Step 3: refinement on the raw series.
    const Eigen::Index n = config.degree + 1;
    Eigen::VectorXd refl0 = Eigen::VectorXd::Zero(n);
    refl0[0] = out.reflectivity_estimate;
    const TransmittanceParams initial(out.gain_estimate, refl0, out.opd_estimate, out.phase_estimate);
    const double y_mean = stats.y.mean();
    out.initial_rmse = fit_rmse(
        stats.y, transmittance_response(initial, config.regime, grid, ReflectivityPolicy::Clamp), y_mean);

    auto refined = refine(stats.y, grid, initial, config.regime, config.refine_lm, config.fixed_gain);
    out.params = std::move(refined.params);
    out.refine_report = std::move(refined.report);
    out.violation = std::move(refined.violation);
    out.rmse = fit_rmse(stats.y, transmittance_response(out.params, config.regime, grid, ReflectivityPolicy::Clamp),
                        y_mean);
    return out;
}

std::vector<PixelResult> characterize_device(const Datacube& raw_cube, const DeviceLayout& layout,
                                             const IrcaConfig& config, const PixelSelector& selector,
                                             const ExtractionConfig& extraction, unsigned jobs)
{
    if (raw_cube.height() != layout.height() || raw_cube.width() != layout.width())
        throw DataMismatchError("characterize: datacube is " + std::to_string(raw_cube.height()) + "x"
                                + std::to_string(raw_cube.width()) + " but the layout focal plane is "
                                + std::to_string(layout.height()) + "x" + std::to_string(layout.width()));
    config.validate(raw_cube.grid());
    if (extraction.kernel < 1 || extraction.kernel % 2 == 0)
        throw std::invalid_argument("characterize: kernel must be an odd integer >= 1");

    struct Task
    {
        int k;
        Pixel p;
    };
    std::vector<Task> tasks;
    switch (selector.mode) {
    case PixelSelector::Mode::Central:
        for (int k = 0; k < layout.n_interferometers(); ++k)
            tasks.push_back({k, layout.central_pixel(k)});
        break;
    case PixelSelector::Mode::All:
        for (int k = 0; k < layout.n_interferometers(); ++k) {
            const auto r = layout.subimage(k);
            for (int row = r.top; row < r.top + r.height; ++row)
                for (int col = r.left; col < r.left + r.width; ++col)
                    tasks.push_back({k, {row, col}});
        }
        break;
    case PixelSelector::Mode::Explicit:
        for (const Pixel& p : selector.pixels) {
            const auto k = layout.interferometer_at(p);
            if (!k)
                throw DataMismatchError("characterize: selected pixel is outside every subimage");
            tasks.push_back({*k, p});
        }
        break;
    }
    std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
        return std::tie(a.k, a.p.row, a.p.col) < std::tie(b.k, b.p.row, b.p.col);
    });
    if (tasks.empty())
        return {};

    const Datacube cube = equalize_power(raw_cube);
    const auto& grid = cube.grid();
    std::optional<Eigen::VectorXd> global_w;
    if (extraction.scope == FlatFieldScope::Global)
        global_w = flat_field_statistic(cube, extraction.percentile);

    std::vector<PixelResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const Task& task = tasks[t];
            PixelResult& out = results[t];
            out.interferometer = task.k;
            out.pixel = task.p;
            out.central = task.p == layout.central_pixel(task.k);
            try {
                const auto rect = layout.subimage(task.k);
                PixelStatistics stats;
                stats.pixel = task.p;
                stats.interferometer = task.k;
                stats.y = raw_series(cube, task.p);
                stats.u = neighborhood_mean(cube, task.p, extraction.kernel, rect);
                stats.w = global_w ? *global_w : flat_field_statistic(cube, extraction.percentile, rect);
                std::optional<double> nominal;
                if (extraction.use_nominal_opd)
                    nominal = layout.nominal_opd(task.k);
                out.result = characterize_pixel(stats, grid, config, nominal);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };

    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = unsigned(std::min<std::size_t>(jobs, tasks.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
    }
    return results;
}

} // namespace irca
