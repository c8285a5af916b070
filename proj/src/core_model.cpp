#include "irca/core_model.hpp"

#include <algorithm>
#include <charconv>

namespace irca
{

std::string WaveRegime::label() const
{
    switch (kind_) {
    case Kind::Two: return "two";
    case Kind::Infinite: return "infinite";
    case Kind::Finite: return "finite:" + std::to_string(waves_);
    }
    return {};
}

WaveRegime WaveRegime::parse(std::string_view text)
{
    if (text == "two")
        return two();
    if (text == "infinite")
        return infinite();
    constexpr std::string_view prefix = "finite:";
    if (text.starts_with(prefix)) {
        const auto digits = text.substr(prefix.size());
        int w = 0;
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), w);
        if (ec == std::errc() && end == digits.data() + digits.size() && !digits.empty())
            return finite(w);
    }
    throw std::invalid_argument("unknown regime '" + std::string(text) + "' (expected two|finite:W|infinite)");
}

WavenumberGrid::WavenumberGrid(Eigen::VectorXd sigma) : sigma_(std::move(sigma))
{
    if (sigma_.size() < 2)
        throw std::invalid_argument("WavenumberGrid: at least two wavenumbers required");
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        if (!std::isfinite(sigma_[i]))
            throw std::invalid_argument("WavenumberGrid: non-finite wavenumber");
        if (i > 0 && !(sigma_[i] > sigma_[i - 1]))
            throw std::invalid_argument("WavenumberGrid: wavenumbers must be strictly increasing");
    }
}

WavenumberGrid WavenumberGrid::linspace(double sigma_min, double sigma_max, Eigen::Index count)
{
    if (count < 2)
        throw std::invalid_argument("WavenumberGrid: at least two wavenumbers required");
    return WavenumberGrid(Eigen::VectorXd::LinSpaced(count, sigma_min, sigma_max));
}

Eigen::VectorXd WavenumberGrid::normalized() const
{
    const double lo = sigma_min();
    const double span = sigma_max() - lo;
    return ((sigma_.array() - lo) * (2.0 / span) - 1.0).matrix();
}

Eigen::MatrixXd normalized_vandermonde(const WavenumberGrid& grid, int degree)
{
    const Eigen::VectorXd x = grid.normalized();
    Eigen::MatrixXd V(x.size(), degree + 1);
    V.col(0).setOnes();
    for (int m = 1; m <= degree; ++m)
        V.col(m) = V.col(m - 1).cwiseProduct(x);
    return V;
}

TransmittanceParams::TransmittanceParams(Eigen::VectorXd gain, Eigen::VectorXd reflectivity, double opd,
                                         double phase_shift)
    : gain_(std::move(gain)), reflectivity_(std::move(reflectivity)), opd_(opd),
      phase_shift_(wrap_phase(phase_shift))
{
    if (gain_.size() == 0 || gain_.size() != reflectivity_.size())
        throw std::invalid_argument("TransmittanceParams: gain and reflectivity need the same non-zero length");
    if (!(opd_ >= 0.0) || !std::isfinite(opd_))
        throw std::invalid_argument("TransmittanceParams: OPD must be finite and >= 0");
    if (!gain_.allFinite() || !reflectivity_.allFinite() || !std::isfinite(phase_shift))
        throw std::invalid_argument("TransmittanceParams: non-finite coefficient");
}

TransmittanceParams TransmittanceParams::from_vector(const Eigen::VectorXd& beta, int degree)
{
    const Eigen::Index n = degree + 1;
    if (beta.size() != parameter_count(degree))
        throw std::invalid_argument("TransmittanceParams: parameter vector has wrong length");
    return TransmittanceParams(beta.head(n), beta.segment(n, n), beta[2 * n], beta[2 * n + 1]);
}

Eigen::VectorXd TransmittanceParams::to_vector() const
{
    const Eigen::Index n = gain_.size();
    Eigen::VectorXd beta(2 * n + 2);
    beta << gain_, reflectivity_, opd_, phase_shift_;
    return beta;
}

std::optional<std::string> TransmittanceParams::check_on(const WavenumberGrid& grid) const
{
    const Eigen::MatrixXd V = normalized_vandermonde(grid, degree());
    const Eigen::VectorXd A = V * gain_;
    const Eigen::VectorXd R = V * reflectivity_;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        if (!(A[i] > 0.0))
            return "gain polynomial not positive at sigma=" + std::to_string(grid[i]);
        if (!(R[i] >= 0.0 && R[i] < 1.0))
            return "reflectivity polynomial outside [0,1) at sigma=" + std::to_string(grid[i]);
    }
    return std::nullopt;
}

namespace
{
double apply_policy(double R, ReflectivityPolicy policy)
{
    if (policy == ReflectivityPolicy::Clamp)
        return std::clamp(R, 0.0, kReflectivityCeiling);
    return R;
}
} // namespace

double transmittance_response(const TransmittanceParams& params, double sigma, const WaveRegime& regime,
                              const WavenumberGrid& grid, ReflectivityPolicy policy)
{
    const double A = poly_eval(params.gain(), sigma, grid);
    const double R = apply_policy(poly_eval(params.reflectivity(), sigma, grid), policy);
    return A * mean_scaled_transmittance(R, phase(sigma, params.opd(), params.phase_shift()), regime);
}

Eigen::VectorXd transmittance_response(const TransmittanceParams& params, const WaveRegime& regime,
                                       const WavenumberGrid& grid, ReflectivityPolicy policy)
{
    Eigen::VectorXd t(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        t[i] = transmittance_response(params, grid[i], regime, grid, policy);
    return t;
}

Eigen::VectorXd response_from_vector(const Eigen::VectorXd& beta, int degree, const WaveRegime& regime,
                                     const WavenumberGrid& grid, Eigen::MatrixXd* jacobian)
{
    const Eigen::Index n = degree + 1;
    const Eigen::Index Na = grid.size();
    if (beta.size() != TransmittanceParams::parameter_count(degree))
        throw std::invalid_argument("response_from_vector: parameter vector has wrong length");

    const Eigen::MatrixXd V = normalized_vandermonde(grid, degree);
    const Eigen::VectorXd A = V * beta.head(n);
    const Eigen::VectorXd R_raw = V * beta.segment(n, n);
    const double opd = beta[2 * n];
    const double phi0 = beta[2 * n + 1];
    constexpr double two_pi = 2.0 * std::numbers::pi;

    Eigen::VectorXd t(Na);
    if (jacobian)
        jacobian->resize(Na, 2 * n + 2);
    for (Eigen::Index i = 0; i < Na; ++i) {
        const double R = std::clamp(R_raw[i], 0.0, kReflectivityCeiling);
        const bool clamped = R != R_raw[i];
        const double sigma = grid[i];
        const auto g = mean_scaled_with_gradient(R, phase(sigma, opd, phi0), regime);
        t[i] = A[i] * g.value;
        if (!jacobian)
            continue;
        auto row = jacobian->row(i);
        row.head(n) = V.row(i) * g.value;
        if (clamped)
            row.segment(n, n).setZero();
        else
            row.segment(n, n) = V.row(i) * (A[i] * g.d_reflectivity);
        row[2 * n] = A[i] * g.d_phase * two_pi * sigma;
        row[2 * n + 1] = -A[i] * g.d_phase;
    }
    return t;
}

double regime_rmse(double reflectivity, const WaveRegime& regime, int phase_samples)
{
    if (phase_samples < 1)
        throw std::invalid_argument("regime_rmse: phase_samples must be positive");
    const auto airy = WaveRegime::infinite();
    double acc = 0.0;
    for (int j = 0; j < phase_samples; ++j) {
        const double phi = 2.0 * std::numbers::pi * double(j) / double(phase_samples);
        const double d = mean_scaled_transmittance(reflectivity, phi, regime)
                         - mean_scaled_transmittance(reflectivity, phi, airy);
        acc += d * d;
    }
    return std::sqrt(acc / double(phase_samples));
}

double regime_max_reflectivity(const WaveRegime& regime, double rmse_threshold, int phase_samples,
                               double reflectivity_step)
{
    if (regime.is_infinite())
        throw std::invalid_argument("regime_max_reflectivity: regime must be finite");
    if (!(rmse_threshold > 0.0))
        throw std::invalid_argument("regime_max_reflectivity: threshold must be positive");
    if (!(reflectivity_step > 0.0 && reflectivity_step < 1.0))
        throw std::invalid_argument("regime_max_reflectivity: reflectivity step must lie in (0, 1)");

    // Grid R_k = k·step, k ∈ [0, last] with R_last < 1.
    auto last = static_cast<long>(std::ceil(1.0 / reflectivity_step)) - 1;
    while (double(last) * reflectivity_step >= 1.0)
        --last;
    auto within = [&](long k) {
        return regime_rmse(double(k) * reflectivity_step, regime, phase_samples) <= rmse_threshold;
    };
    if (!within(0))
        throw std::domain_error("regime_max_reflectivity: threshold unattainable even at R=0");
    if (within(last))
        return double(last) * reflectivity_step;
    long lo = 0, hi = last; // within(lo) && !within(hi)
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        (within(mid) ? lo : hi) = mid;
    }
    return double(lo) * reflectivity_step;
}

} // namespace irca
