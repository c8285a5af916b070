#pragma once

// Fabry-Perot transmittance models, phase/OPD geometry and the polynomial
// gain/reflectivity parameterization of a single interferometer pixel.
//
// Scalar kernels are templated so they can be evaluated in float, double or
// long double; the grid-level helpers work on Eigen vectors of doubles.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace irca
{

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Largest reflectivity used when a model evaluation clamps R(σ).
inline constexpr double kReflectivityCeiling = 1.0 - 1e-6;

/*=============================================================================*/
/* Wave regime */

/// Number of emerging waves summed in the cavity model: 2, a finite W, or the
/// Airy limit W → ∞.
class WaveRegime
{
public:
    enum class Kind { Two, Finite, Infinite };

    static WaveRegime two() { return WaveRegime(Kind::Two, 2); }
    static WaveRegime infinite() { return WaveRegime(Kind::Infinite, 0); }
    static WaveRegime finite(int waves)
    {
        if (waves < 1)
            throw std::invalid_argument("WaveRegime: finite wave count must be >= 1");
        return WaveRegime(Kind::Finite, waves);
    }

    Kind kind() const { return kind_; }
    bool is_infinite() const { return kind_ == Kind::Infinite; }
    /// Wave count; meaningless for the infinite regime.
    int waves() const { return waves_; }

    /// "two", "finite:W" or "infinite".
    std::string label() const;
    static WaveRegime parse(std::string_view text);

    friend bool operator==(const WaveRegime&, const WaveRegime&) = default;

private:
    WaveRegime(Kind k, int w) : kind_(k), waves_(w) {}
    Kind kind_;
    int waves_;
};

/*=============================================================================*/
/* Geometry */

/// Round-trip phase 2πδσ − φ0.
template <typename Scalar>
inline Scalar phase(Scalar sigma, Scalar opd, Scalar phase_shift)
{
    return Scalar(2) * std::numbers::pi_v<Scalar> * opd * sigma - phase_shift;
}

/// δ = 2·n·d·cos θ, with θ the inner reflection angle.
template <typename Scalar>
inline Scalar opd_from_geometry(Scalar refractive_index, Scalar thickness, Scalar inner_angle)
{
    return Scalar(2) * refractive_index * thickness * std::cos(inner_angle);
}

/// Wraps an angle to [−π, π).
template <typename Scalar>
inline Scalar wrap_phase(Scalar angle)
{
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    Scalar wrapped = angle - Scalar(2) * pi * std::floor((angle + pi) / (Scalar(2) * pi));
    if (wrapped >= pi)
        wrapped -= Scalar(2) * pi;
    if (wrapped < -pi)
        wrapped = -pi;
    return wrapped;
}

/*=============================================================================*/
/* Cavity transmittance */

namespace detail
{
template <typename Scalar>
inline void require_reflectivity(Scalar reflectivity)
{
    if (!(reflectivity >= Scalar(0) && reflectivity < Scalar(1)))
        throw std::domain_error("reflectivity outside [0, 1): non-physical mirror");
}
} // namespace detail

/// Raw cavity transmittance T^[W](R, φ).
template <typename Scalar>
Scalar transmittance(Scalar reflectivity, Scalar phi, const WaveRegime& regime)
{
    detail::require_reflectivity(reflectivity);
    const Scalar R = reflectivity;
    const Scalar one_minus = (Scalar(1) - R) * (Scalar(1) - R);
    if (regime.is_infinite()) {
        const Scalar s = std::sin(phi / Scalar(2));
        return one_minus / (one_minus + Scalar(4) * R * s * s);
    }
    const int W = regime.waves();
    if (W == 2)
        return (Scalar(1) + R * R + Scalar(2) * R * std::cos(phi)) * one_minus;
    const Scalar RW = std::pow(R, Scalar(W));
    const Scalar num = Scalar(1) + RW * RW - Scalar(2) * RW * std::cos(Scalar(W) * phi);
    const Scalar den = Scalar(1) + R * R - Scalar(2) * R * std::cos(phi);
    return num / den * one_minus;
}

/// (1+R) / ((1−R^{2W})(1−R)); the Airy limit drops R^{2W}.
template <typename Scalar>
Scalar mean_scale_factor(Scalar reflectivity, const WaveRegime& regime)
{
    detail::require_reflectivity(reflectivity);
    const Scalar R = reflectivity;
    if (regime.is_infinite())
        return (Scalar(1) + R) / (Scalar(1) - R);
    const Scalar R2W = std::pow(R, Scalar(2 * regime.waves()));
    return (Scalar(1) + R) / ((Scalar(1) - R2W) * (Scalar(1) - R));
}

/// Transmittance normalized to unit mean over one phase period.
template <typename Scalar>
Scalar mean_scaled_transmittance(Scalar reflectivity, Scalar phi, const WaveRegime& regime)
{
    return mean_scale_factor(reflectivity, regime) * transmittance(reflectivity, phi, regime);
}

/// Mean-scaled transmittance with its partial derivatives in R and φ.
template <typename Scalar>
struct ScaledTransmittance
{
    Scalar value;
    Scalar d_reflectivity;
    Scalar d_phase;
};

/// Closed forms of the mean-scaled response and its gradient. Callers must
/// supply R ∈ [0, 1).
template <typename Scalar>
ScaledTransmittance<Scalar> mean_scaled_with_gradient(Scalar R, Scalar phi, const WaveRegime& regime)
{
    const Scalar c = std::cos(phi);
    const Scalar s = std::sin(phi);
    if (regime.is_infinite()) {
        // (1−R²) / ((1−R)² + 4R sin²(φ/2))
        const Scalar half = std::sin(phi / Scalar(2));
        const Scalar h2 = half * half;
        const Scalar D = (Scalar(1) - R) * (Scalar(1) - R) + Scalar(4) * R * h2;
        const Scalar num = Scalar(1) - R * R;
        const Scalar dD_dR = Scalar(-2) + Scalar(2) * R + Scalar(4) * h2;
        return {num / D,
                (Scalar(-2) * R * D - num * dD_dR) / (D * D),
                -num * Scalar(2) * R * s / (D * D)};
    }
    const int W = regime.waves();
    if (W == 2) {
        // 1 + α cos φ, α = 2R/(1+R²)
        const Scalar q = Scalar(1) + R * R;
        const Scalar alpha = Scalar(2) * R / q;
        const Scalar dalpha = Scalar(2) * (Scalar(1) - R * R) / (q * q);
        return {Scalar(1) + alpha * c, dalpha * c, -alpha * s};
    }
    // K(R)·N/D with K = (1−R²)/(1−R^{2W}), N = |1 − R^W e^{−jWφ}|², D = |1 − R e^{−jφ}|²
    const Scalar Wd = Scalar(W);
    const Scalar RWm1 = std::pow(R, Scalar(W - 1));
    const Scalar RW = RWm1 * R;
    const Scalar R2Wm1 = RW * RWm1;
    const Scalar R2W = RW * RW;
    const Scalar cW = std::cos(Wd * phi);
    const Scalar sW = std::sin(Wd * phi);

    const Scalar Kden = Scalar(1) - R2W;
    const Scalar K = (Scalar(1) - R * R) / Kden;
    const Scalar dK = (Scalar(-2) * R * Kden + (Scalar(1) - R * R) * Scalar(2) * Wd * R2Wm1) / (Kden * Kden);

    const Scalar N = Scalar(1) + R2W - Scalar(2) * RW * cW;
    const Scalar dN_dR = Scalar(2) * Wd * R2Wm1 - Scalar(2) * Wd * RWm1 * cW;
    const Scalar dN_dphi = Scalar(2) * Wd * RW * sW;

    const Scalar D = Scalar(1) + R * R - Scalar(2) * R * c;
    const Scalar dD_dR = Scalar(2) * R - Scalar(2) * c;
    const Scalar dD_dphi = Scalar(2) * R * s;

    const Scalar ratio = N / D;
    return {K * ratio,
            dK * ratio + K * (dN_dR * D - N * dD_dR) / (D * D),
            K * (dN_dphi * D - N * dD_dphi) / (D * D)};
}

/*=============================================================================*/
/* Wavenumber grid and polynomials */

/// Strictly increasing monochromator wavenumbers (cm⁻¹), N_a ≥ 2.
class WavenumberGrid
{
public:
    WavenumberGrid() = default;
    explicit WavenumberGrid(Eigen::VectorXd sigma);

    /// Regular grid with `count` samples spanning [min, max].
    static WavenumberGrid linspace(double sigma_min, double sigma_max, Eigen::Index count);

    const Eigen::VectorXd& sigma() const { return sigma_; }
    Eigen::Index size() const { return sigma_.size(); }
    double operator[](Eigen::Index i) const { return sigma_[i]; }
    double sigma_min() const { return sigma_[0]; }
    double sigma_max() const { return sigma_[sigma_.size() - 1]; }
    /// Average spacing between consecutive samples.
    double mean_step() const { return (sigma_max() - sigma_min()) / double(size() - 1); }

    /// Affine map to [−1, 1] used as the polynomial coordinate.
    double normalized(double sigma) const
    {
        return 2.0 * (sigma - sigma_min()) / (sigma_max() - sigma_min()) - 1.0;
    }
    Eigen::VectorXd normalized() const;

private:
    Eigen::VectorXd sigma_;
};

/// Σ c_m x^m (Horner).
template <typename Scalar, typename Derived>
Scalar horner(const Eigen::MatrixBase<Derived>& coeffs, Scalar x)
{
    Scalar acc(0);
    for (Eigen::Index m = coeffs.size() - 1; m >= 0; --m)
        acc = acc * x + Scalar(coeffs[m]);
    return acc;
}

/// Polynomial evaluated in the grid's normalized coordinate.
template <typename Derived>
double poly_eval(const Eigen::MatrixBase<Derived>& coeffs, double sigma, const WavenumberGrid& grid)
{
    return horner(coeffs, grid.normalized(sigma));
}

/// Vandermonde matrix [σ̃_i^m], N_a × (degree+1).
Eigen::MatrixXd normalized_vandermonde(const WavenumberGrid& grid, int degree);

/*=============================================================================*/
/* Parameters and instrument response */

/// Per-pixel parameter vector β = [a_0..a_Nd, r_0..r_Nd, δ, φ0]. Polynomial
/// coefficients are expressed in the grid's normalized coordinate.
class TransmittanceParams
{
public:
    TransmittanceParams() = default;
    TransmittanceParams(Eigen::VectorXd gain, Eigen::VectorXd reflectivity, double opd, double phase_shift);

    /// Builds from a flat β vector of length 2·N_d + 4.
    static TransmittanceParams from_vector(const Eigen::VectorXd& beta, int degree);
    Eigen::VectorXd to_vector() const;

    static Eigen::Index parameter_count(int degree) { return 2 * degree + 4; }

    int degree() const { return int(gain_.size()) - 1; }
    const Eigen::VectorXd& gain() const { return gain_; }
    const Eigen::VectorXd& reflectivity() const { return reflectivity_; }
    double opd() const { return opd_; }
    double phase_shift() const { return phase_shift_; }

    /// Checks A > 0 and R ∈ [0, 1) on every grid point; returns the first
    /// violation found.
    std::optional<std::string> check_on(const WavenumberGrid& grid) const;

private:
    Eigen::VectorXd gain_{Eigen::VectorXd::Ones(1)};
    Eigen::VectorXd reflectivity_{Eigen::VectorXd::Zero(1)};
    double opd_ = 0.0;
    double phase_shift_ = 0.0;
};

/// How an evaluation treats R(σ) outside [0, 1).
enum class ReflectivityPolicy { Strict, Clamp };

/// T_β(σ) = A(σ) · mean-scaled T^[W](R(σ), 2πδσ − φ0).
double transmittance_response(const TransmittanceParams& params, double sigma, const WaveRegime& regime,
                              const WavenumberGrid& grid,
                              ReflectivityPolicy policy = ReflectivityPolicy::Strict);

/// T_β sampled on every grid point.
Eigen::VectorXd transmittance_response(const TransmittanceParams& params, const WaveRegime& regime,
                                       const WavenumberGrid& grid,
                                       ReflectivityPolicy policy = ReflectivityPolicy::Strict);

/// Response on the grid for a raw β vector, R clamped to [0, kReflectivityCeiling].
/// When `jacobian` is non-null it receives ∂T/∂β (N_a × (2N_d+4)); derivatives
/// in r_m vanish where R is clamped.
Eigen::VectorXd response_from_vector(const Eigen::VectorXd& beta, int degree, const WaveRegime& regime,
                                     const WavenumberGrid& grid, Eigen::MatrixXd* jacobian = nullptr);

/*=============================================================================*/
/* Finesse regimes */

/// RMSE between the mean-scaled W-wave and Airy responses over `phase_samples`
/// uniform phases in [0, 2π).
double regime_rmse(double reflectivity, const WaveRegime& regime, int phase_samples);

/// Largest R on a grid of step `reflectivity_step` whose W-wave vs Airy RMSE
/// stays within `rmse_threshold`. Located by bisection, assuming the RMSE is
/// non-decreasing in R.
double regime_max_reflectivity(const WaveRegime& regime, double rmse_threshold, int phase_samples = 10000,
                               double reflectivity_step = 1e-4);

} // namespace irca
