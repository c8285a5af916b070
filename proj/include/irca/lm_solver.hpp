#pragma once

// Levenberg-Marquardt solver for small dense nonlinear least-squares problems.
//
// The residual is r(β) = t(β) − y. Each iteration solves the damped normal
// equations (JᵀJ + λI) Δ = −Jᵀr by Cholesky and accepts β + Δ only if the sum
// of squared residuals decreases. λ follows Marquardt's schedule: divided on
// acceptance, multiplied on rejection.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace irca
{

template <typename Scalar = double>
struct LmProblem
{
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::function<Vector(const Vector&)> residual;
    /// Optional; central differences are used when empty.
    std::function<Matrix(const Vector&)> jacobian;
    Eigen::Index parameter_count = 0;
};

struct LmConfig
{
    /// λ₀; when unset, 10⁻³·mean(diag(JᵀJ)) at β₀.
    std::optional<double> initial_damping;
    double damping_increase = 10.0;
    double damping_decrease = 10.0;
    int max_iterations = 100;
    double step_tolerance = 1e-10;
    /// Relative decrease of the cost below which an accepted step ends the solve.
    double cost_tolerance = 1e-12;
    /// Largest cosine between r and a Jacobian column accepted as stationary.
    double gradient_tolerance = 1e-12;

    void validate() const
    {
        if (initial_damping && !(*initial_damping >= 0.0))
            throw std::invalid_argument("LmConfig: initial damping must be >= 0");
        if (!(damping_increase > 1.0) || !(damping_decrease > 1.0))
            throw std::invalid_argument("LmConfig: damping factors must be > 1");
        if (max_iterations < 0)
            throw std::invalid_argument("LmConfig: max_iterations must be >= 0");
        if (!(step_tolerance > 0.0) || !(cost_tolerance > 0.0) || !(gradient_tolerance > 0.0))
            throw std::invalid_argument("LmConfig: tolerances must be positive");
    }
};

enum class LmTermination {
    ZeroResidual,
    GradientTolerance,
    StepTolerance,
    CostTolerance,
    MaxIterations,
    DampingOverflow,
};

inline const char* to_string(LmTermination t)
{
    switch (t) {
    case LmTermination::ZeroResidual: return "zero-residual";
    case LmTermination::GradientTolerance: return "gradient-tolerance";
    case LmTermination::StepTolerance: return "step-tolerance";
    case LmTermination::CostTolerance: return "cost-tolerance";
    case LmTermination::MaxIterations: return "max-iterations";
    case LmTermination::DampingOverflow: return "damping-overflow";
    }
    return "unknown";
}

template <typename Scalar = double>
struct LmReport
{
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> parameters;
    Scalar cost = 0; // Σ r_i²
    int iterations = 0;
    bool converged = false;
    LmTermination termination = LmTermination::MaxIterations;
    /// Cost at β₀ followed by the cost after every accepted step.
    std::vector<Scalar> cost_history;
};

/*=============================================================================*/

/// Central-difference Jacobian with h_m = max(|β_m|, 1)·relative_step.
template <typename Scalar>
typename LmProblem<Scalar>::Matrix numeric_jacobian(const LmProblem<Scalar>& problem,
                                                    const typename LmProblem<Scalar>::Vector& beta,
                                                    Scalar relative_step = Scalar(1e-6))
{
    using Vector = typename LmProblem<Scalar>::Vector;
    using Matrix = typename LmProblem<Scalar>::Matrix;
    Vector probe = beta;
    Matrix J;
    for (Eigen::Index m = 0; m < beta.size(); ++m) {
        const Scalar h = std::max(std::abs(beta[m]), Scalar(1)) * relative_step;
        probe[m] = beta[m] + h;
        const Vector plus = problem.residual(probe);
        probe[m] = beta[m] - h;
        const Vector minus = problem.residual(probe);
        probe[m] = beta[m];
        if (!plus.allFinite() || !minus.allFinite())
            throw std::domain_error("numeric_jacobian: non-finite residual at probe point");
        if (m == 0)
            J.resize(plus.size(), beta.size());
        J.col(m) = (plus - minus) / (Scalar(2) * h);
    }
    return J;
}

/// Solves (JᵀJ + λI) Δ = −Jᵀr; empty when the damped system is not positive definite.
template <typename Scalar, typename DerivedJ, typename DerivedR>
std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> damped_step(const Eigen::MatrixBase<DerivedJ>& J,
                                                                    const Eigen::MatrixBase<DerivedR>& r,
                                                                    Scalar lambda)
{
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix normal = J.transpose() * J;
    normal.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success)
        return std::nullopt;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> step = llt.solve(-(J.transpose() * r));
    if (!step.allFinite())
        return std::nullopt;
    return step;
}

namespace detail
{
template <typename Scalar>
typename LmProblem<Scalar>::Matrix jacobian_at(const LmProblem<Scalar>& problem,
                                               const typename LmProblem<Scalar>::Vector& beta)
{
    return problem.jacobian ? problem.jacobian(beta) : numeric_jacobian(problem, beta);
}
} // namespace detail

/// One damped update β' = β + Δ at fixed λ.
template <typename Scalar>
typename LmProblem<Scalar>::Vector lm_step(const LmProblem<Scalar>& problem,
                                           const typename LmProblem<Scalar>::Vector& beta, Scalar lambda)
{
    const auto J = detail::jacobian_at(problem, beta);
    const auto r = problem.residual(beta);
    auto step = damped_step(J, r, lambda);
    if (!step)
        throw std::domain_error("lm_step: damped normal equations are singular, increase lambda");
    return beta + *step;
}

template <typename Scalar>
LmReport<Scalar> lm_solve(const LmProblem<Scalar>& problem, const typename LmProblem<Scalar>::Vector& beta0,
                          const LmConfig& config = {})
{
    using Vector = typename LmProblem<Scalar>::Vector;
    using Matrix = typename LmProblem<Scalar>::Matrix;
    config.validate();
    if (!beta0.allFinite())
        throw std::invalid_argument("lm_solve: initial parameters must be finite");

    LmReport<Scalar> report;
    Vector beta = beta0;
    Vector r = problem.residual(beta);
    if (!r.allFinite())
        throw std::domain_error("lm_solve: non-finite residual at the initial point");
    Scalar cost = r.squaredNorm();
    Matrix J = detail::jacobian_at(problem, beta);
    report.cost_history.push_back(cost);

    Scalar lambda = config.initial_damping
                        ? Scalar(*config.initial_damping)
                        : Scalar(1e-3) * J.colwise().squaredNorm().mean();
    const Scalar lambda_ceiling = Scalar(1e32) * std::max(Scalar(1), J.colwise().squaredNorm().maxCoeff());

    // Returns false once λ exceeds any useful magnitude.
    auto raise_damping = [&] {
        if (lambda > Scalar(0)) {
            lambda *= Scalar(config.damping_increase);
        } else {
            const Scalar base = Scalar(1e-3) * J.colwise().squaredNorm().mean();
            lambda = base > Scalar(0) ? base : Scalar(1e-3);
        }
        return lambda <= lambda_ceiling;
    };

    auto finish = [&](LmTermination why, bool converged) {
        report.parameters = beta;
        report.cost = cost;
        report.termination = why;
        report.converged = converged;
        return report;
    };

    for (;;) {
        if (cost == Scalar(0))
            return finish(LmTermination::ZeroResidual, true);

        // Scaled gradient: cosine between r and each Jacobian column.
        const Vector g = J.transpose() * r;
        const Scalar rnorm = std::sqrt(cost);
        Scalar cosine = 0;
        for (Eigen::Index m = 0; m < J.cols(); ++m) {
            const Scalar cn = J.col(m).norm();
            if (cn > Scalar(0))
                cosine = std::max(cosine, std::abs(g[m]) / (cn * rnorm));
        }
        if (cosine <= Scalar(config.gradient_tolerance))
            return finish(LmTermination::GradientTolerance, true);
        if (report.iterations >= config.max_iterations)
            return finish(LmTermination::MaxIterations, false);
        ++report.iterations;

        // Inner loop: raise λ until a step decreases the cost.
        for (;;) {
            auto step = damped_step(J, r, lambda);
            if (!step) {
                if (!raise_damping())
                    return finish(LmTermination::DampingOverflow, false);
                continue;
            }
            const Scalar xtol = Scalar(config.step_tolerance);
            if (step->norm() <= xtol * (beta.norm() + xtol))
                return finish(LmTermination::StepTolerance, true);

            const Vector trial = beta + *step;
            const Vector r_trial = problem.residual(trial);
            const Scalar cost_trial = r_trial.allFinite() ? r_trial.squaredNorm()
                                                          : std::numeric_limits<Scalar>::infinity();
            if (cost_trial < cost) {
                const Scalar relative_decrease = (cost - cost_trial) / cost;
                beta = trial;
                r = r_trial;
                cost = cost_trial;
                report.cost_history.push_back(cost);
                lambda /= Scalar(config.damping_decrease);
                J = detail::jacobian_at(problem, beta);
                if (relative_decrease <= Scalar(config.cost_tolerance))
                    return finish(LmTermination::CostTolerance, true);
                break;
            }
            if (!raise_damping())
                return finish(LmTermination::DampingOverflow, false);
        }
    }
}

} // namespace irca
