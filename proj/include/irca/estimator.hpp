#pragma once

// Three-step response characterization of one pixel: polynomial gain fit on the
// flat-field statistic, sinusoid initialization on the neighborhood mean, and a
// Levenberg-Marquardt refinement of all parameters on the raw series.

#include <optional>
#include <string>
#include <vector>

#include "irca/core_model.hpp"
#include "irca/lm_solver.hpp"
#include "irca/simulator.hpp"
#include "irca/statistics.hpp"

namespace irca
{

enum class Initializer { MaximumLikelihood, ExhaustiveSearch };

enum class ReflectivityInversion {
    /// Solves α = 2r/(1+r²) for r.
    Exact,
    /// r = 1 − √(1 − α²).
    Compatibility,
};

struct OpdInterval
{
    double lo = 0.0;
    double hi = 0.0;
};

struct IrcaConfig
{
    int degree = 5;
    WaveRegime regime = WaveRegime::infinite();
    /// Explicit periodogram search interval; when unset see default_opd_interval.
    std::optional<OpdInterval> opd_interval;
    /// Relative half-width of the interval around a nominal OPD.
    double nominal_margin = 0.1;
    /// Base bins excluded at each edge of the full interval when no nominal OPD is known.
    int guard_bins = 5;
    int oversampling = 8;
    Initializer initializer = Initializer::MaximumLikelihood;
    ReflectivityInversion inversion = ReflectivityInversion::Exact;
    /// Keep the gain shape from the first step and fit only a scale factor.
    bool fixed_gain = false;
    LmConfig gain_lm;
    LmConfig refine_lm;
    // Exhaustive-search grids: r ∈ [0, es_reflectivity_max], φ ∈ [−π, π).
    int es_reflectivity_steps = 46;
    double es_reflectivity_max = 0.9;
    int es_phase_steps = 36;

    void validate(const WavenumberGrid& grid) const;
};

/*=============================================================================*/
/* Step 1: gain */

struct GainEstimate
{
    Eigen::VectorXd coeffs;
    LmReport<double> report;
};

/// LM fit of a degree-N_d polynomial to w, started from [mean(w), 0, …, 0].
GainEstimate estimate_gain(const Eigen::VectorXd& w, const WavenumberGrid& grid, int degree,
                           const LmConfig& lm = {});

/*=============================================================================*/
/* Step 2: initialization */

/// v_i = (u_i − Â(σ_i)) / Â(σ_i).
Eigen::VectorXd fringe_contrast_series(const Eigen::VectorXd& u, const Eigen::VectorXd& gain,
                                       const WavenumberGrid& grid);

/// Base OPD resolution 1 / (2·N_a·Δσ).
double opd_resolution(const WavenumberGrid& grid);
/// Largest unaliased OPD 1 / (2Δσ).
double opd_nyquist(const WavenumberGrid& grid);

/// nominal·(1 ± margin) when a nominal OPD is known, otherwise the full
/// unaliased range minus guard_bins base bins at each edge. Always clipped to
/// [0, 1/(2Δσ)].
OpdInterval default_opd_interval(const WavenumberGrid& grid, const IrcaConfig& config,
                                 std::optional<double> nominal_opd = std::nullopt);

/// |Σ v_i exp(−j2πδσ_i)|.
double periodogram(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd);

/// OPDs searched by periodogram_opd: lo, lo + step, … ≤ hi with step
/// 1/(2·oversampling·N_a·Δσ).
Eigen::VectorXd periodogram_grid(const WavenumberGrid& grid, const OpdInterval& interval, int oversampling);

struct PeriodogramPeak
{
    double opd = 0.0;
    double power = 0.0;
    /// Periodogram identically zero.
    bool degenerate = false;
    /// Several grid points share the maximum; the lowest OPD is returned.
    bool tied = false;
};

PeriodogramPeak periodogram_opd(const Eigen::VectorXd& v, const WavenumberGrid& grid,
                                const OpdInterval& interval, int oversampling = 8);

/// α̂ = (2/N_a)·|Σ v_i exp(−j2πδ̂σ_i)|.
double ml_amplitude(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd);

/// Reflectivity from the fringe amplitude; α̂ is clamped to [0, 1] within a
/// 10⁻⁹ tolerance and rejected beyond it.
double ml_reflectivity(double alpha, ReflectivityInversion mode = ReflectivityInversion::Exact);

struct PhaseEstimate
{
    double phase_shift = 0.0;
    bool degenerate = false;
};

/// Four-quadrant φ̂0 = atan2(Σ v_i sin(2πδ̂σ_i), Σ v_i cos(2πδ̂σ_i)) in [−π, π).
PhaseEstimate ml_phase(const Eigen::VectorXd& v, const WavenumberGrid& grid, double opd);

struct InitialEstimate
{
    double opd = 0.0;
    double reflectivity = 0.0;
    double phase_shift = 0.0;
};

/// Grid search minimizing Σ(T̄(r, 2πδσ_i − φ) − 1 − v_i)²; ties keep the
/// lexicographically smallest (δ, r, φ).
InitialEstimate es_initialize(const Eigen::VectorXd& v, const WavenumberGrid& grid, const Eigen::VectorXd& opd_grid,
                              const Eigen::VectorXd& reflectivity_grid, const Eigen::VectorXd& phase_grid,
                              const WaveRegime& regime);

/*=============================================================================*/
/* Step 3: refinement */

/// Least-squares problem r(z) = T(β(z)) − y. The solver works on z, which equals
/// β except for the OPD entry, stored as δ·2πσ_max so every Jacobian column has
/// comparable scale. With `fixed_gain` the gain block is replaced by one scale s
/// applied to `fixed_gain_shape`.
struct RefineProblem
{
    LmProblem<double> problem;
    double opd_scale = 1.0; // δ = opd_scale · z_δ
    int degree = 0;
    std::optional<Eigen::VectorXd> fixed_gain_shape;

    Eigen::VectorXd to_solver(const TransmittanceParams& params) const;
    TransmittanceParams from_solver(const Eigen::VectorXd& z) const;
};

RefineProblem make_refine_problem(const Eigen::VectorXd& y, const WavenumberGrid& grid, int degree,
                                  const WaveRegime& regime,
                                  std::optional<Eigen::VectorXd> fixed_gain_shape = std::nullopt);

struct RefineResult
{
    TransmittanceParams params;
    LmReport<double> report; // parameters in solver coordinates
    double initial_cost = 0.0;
    /// First violated physical constraint of the final parameters, if any.
    std::optional<std::string> violation;
};

/// LM solution of Σ(T_β(σ_i) − y_i)² from `initial`. In fixed-gain mode the
/// gain shape of `initial` is frozen and only its scale is fitted.
RefineResult refine(const Eigen::VectorXd& y, const WavenumberGrid& grid, const TransmittanceParams& initial,
                    const WaveRegime& regime, const LmConfig& lm = {}, bool fixed_gain = false);

/*=============================================================================*/
/* Pipeline */

struct CharacterizationResult
{
    TransmittanceParams params;
    double rmse = 0.0;
    double initial_rmse = 0.0;
    // Intermediate estimates.
    Eigen::VectorXd gain_estimate;
    double opd_estimate = 0.0;
    double amplitude_estimate = 0.0;
    double reflectivity_estimate = 0.0;
    double phase_estimate = 0.0;
    OpdInterval opd_interval;
    bool periodogram_degenerate = false;
    bool periodogram_tied = false;
    bool phase_degenerate = false;
    bool amplitude_clamped = false;
    LmReport<double> gain_report;
    LmReport<double> refine_report;
    std::optional<std::string> violation;

    bool converged() const { return refine_report.converged; }
};

CharacterizationResult characterize_pixel(const PixelStatistics& stats, const WavenumberGrid& grid,
                                          const IrcaConfig& config,
                                          std::optional<double> nominal_opd = std::nullopt);

enum class FlatFieldScope { Global, Subimage };

struct ExtractionConfig
{
    int kernel = 11;
    double percentile = 90.0;
    FlatFieldScope scope = FlatFieldScope::Global;
    /// Use nominal_opd(k) ± margin as the OPD search interval.
    bool use_nominal_opd = true;
};

struct PixelSelector
{
    enum class Mode { Central, All, Explicit };
    Mode mode = Mode::Central;
    std::vector<Pixel> pixels; // Explicit mode only

    static PixelSelector central() { return {Mode::Central, {}}; }
    static PixelSelector all() { return {Mode::All, {}}; }
    static PixelSelector explicit_pixels(std::vector<Pixel> p) { return {Mode::Explicit, std::move(p)}; }
};

struct PixelResult
{
    int interferometer = -1;
    Pixel pixel;
    bool central = false;
    /// Set when the pipeline threw; `result` is then meaningless.
    std::optional<std::string> error;
    CharacterizationResult result;

    bool usable() const { return !error && result.converged(); }
};

/// Extracts statistics and characterizes every selected pixel independently on
/// `jobs` worker threads (0: hardware concurrency). Results are ordered by
/// (interferometer, row, col).
std::vector<PixelResult> characterize_device(const Datacube& cube, const DeviceLayout& layout,
                                             const IrcaConfig& config, const PixelSelector& selector,
                                             const ExtractionConfig& extraction = {}, unsigned jobs = 0);

} // namespace irca
