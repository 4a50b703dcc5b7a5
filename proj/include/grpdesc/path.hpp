#pragma once

#include <grpdesc/model_core.hpp>
#include <grpdesc/ortho.hpp>
#include <grpdesc/solver_linear.hpp>
#include <grpdesc/solver_logistic.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace grpdesc {

template <typename Scalar>
struct FitPath {
    LossKind loss = LossKind::Linear;
    PenaltyFamily family = PenaltyFamily::GroupLasso;
    Scalar gamma = Scalar(0);
    std::vector<Scalar> multipliers;
    std::vector<std::string> group_labels;
    std::vector<std::string> column_names;
    std::vector<int> group_of;

    std::vector<Scalar> lambdas;       // strictly decreasing
    std::vector<Scalar> intercepts;    // original covariate scale
    Matrix<Scalar> coefficients;       // p x L, original covariate scale
    std::vector<Scalar> loss_values;   // loss part of the objective per lambda
    std::vector<Index> df_groups;
    std::vector<int> iters;
    std::vector<bool> converged;
    std::optional<Index> saturated_at;
    Scalar null_deviance = Scalar(0);  // logistic only
    std::vector<std::string> warnings;

    Index size() const { return static_cast<Index>(lambdas.size()); }

    /// Linear predictor for new rows at path index k.
    Vector<Scalar> predict_link(const Matrix<Scalar>& X, Index k) const
    {
        return (X * coefficients.col(k)).array() + intercepts[static_cast<std::size_t>(k)];
    }

    Vector<Scalar> predict_response(const Matrix<Scalar>& X, Index k) const
    {
        Vector<Scalar> eta = predict_link(X, k);
        if (loss == LossKind::Logistic)
            for (Index i = 0; i < eta.size(); ++i) eta(i) = logistic(eta(i));
        return eta;
    }
};

struct PathControl {
    int n_lambda = 100;
    std::optional<double> min_ratio;
    // When non-empty, fit exactly this (decreasing) grid instead of building one.
    std::vector<double> lambdas;
    SolverControl solver;
    bool warm_start = true;
    double eigen_tolerance = 1e-10;
    MultiplierRule multiplier_rule = MultiplierRule::SqrtGroupSize;
};

/// Fit of the model containing only unpenalized groups (and the intercept).
template <typename Scalar>
struct BaseFit {
    Scalar beta0 = Scalar(0);
    Vector<Scalar> beta;
};

template <typename Scalar>
BaseFit<Scalar> fit_unpenalized(const OrthoDesign<Scalar>& design, const PenaltySpec<Scalar>& spec,
                                const SolverControl& control = {})
{
    BaseFit<Scalar> base;
    base.beta = Vector<Scalar>::Zero(design.cols());
    bool any_free = false;
    for (Scalar m : spec.multipliers) any_free = any_free || m == Scalar(0);
    const Scalar inf = std::numeric_limits<Scalar>::infinity();

    SolverControl tight = control;
    tight.tol = std::min(control.tol, 1e-10);
    tight.record_objective = false;
    if (spec.loss == LossKind::Linear) {
        if (any_free) base.beta = fit_linear(design, inf, spec, base.beta, tight).beta;
        return base;
    }
    const Scalar ybar = design.y.mean();
    if (!(ybar > Scalar(0) && ybar < Scalar(1)))
        throw DataError("logistic response must contain both classes");
    base.beta0 = std::log(ybar / (Scalar(1) - ybar));
    if (any_free) {
        auto state = fit_logistic(design, inf, spec, base.beta0, base.beta, tight);
        base.beta0 = state.beta0;
        base.beta = state.beta;
    }
    return base;
}

/// Smallest lambda at which every penalized group is exactly zero, measured
/// against the fit of the unpenalized part of the model.
template <typename Scalar>
Scalar lambda_max(const OrthoDesign<Scalar>& design, const PenaltySpec<Scalar>& spec, const BaseFit<Scalar>& base)
{
    const auto nn = static_cast<Scalar>(design.n());
    Vector<Scalar> residuals;
    Scalar scale = Scalar(1);
    if (spec.loss == LossKind::Linear) {
        residuals = design.y - design.X * base.beta;
    } else {
        const Vector<Scalar> eta = (design.X * base.beta).array() + base.beta0;
        residuals.resize(eta.size());
        for (Index i = 0; i < eta.size(); ++i) residuals(i) = design.y(i) - logistic(eta(i));
        residuals.array() -= residuals.mean();
        scale = logistic_curvature<Scalar>;
        residuals /= scale;
    }

    bool any_penalized = false;
    Scalar lam = 0;
    std::vector<Scalar> norms(static_cast<std::size_t>(design.J()), Scalar(0));
    for (Index j = 0; j < design.J(); ++j) {
        const Scalar m = spec.multipliers[static_cast<std::size_t>(j)];
        if (m == Scalar(0)) continue;
        any_penalized = true;
        const Vector<Scalar> z = (design.block(j).transpose() * residuals) / nn;
        const Scalar norm = (scale * z).norm();
        norms[static_cast<std::size_t>(j)] = norm;
        lam = std::max(lam, norm / m);
    }
    if (!any_penalized) throw ConfigError("lambda_max: every group is unpenalized, nothing to regularize");
    // Round up so that lam * m_j >= ||z_j|| holds in floating point too.
    lam *= Scalar(1) + Scalar(8) * std::numeric_limits<Scalar>::epsilon();
    for (Index j = 0; j < design.J(); ++j) {
        const Scalar m = spec.multipliers[static_cast<std::size_t>(j)];
        while (m != Scalar(0) && lam * m < norms[static_cast<std::size_t>(j)])
            lam = std::nextafter(lam, std::numeric_limits<Scalar>::infinity());
    }
    return lam;
}

template <typename Scalar>
Scalar lambda_max(const OrthoDesign<Scalar>& design, const PenaltySpec<Scalar>& spec)
{
    return lambda_max(design, spec, fit_unpenalized(design, spec));
}

/// Log-spaced grid from lam_max down to lam_max * min_ratio. The default
/// ratio is 0.001 when n > p and 0.05 otherwise.
template <typename Scalar>
std::vector<Scalar> build_grid(Scalar lam_max, Index n, Index p, int n_lambda, std::optional<double> min_ratio = {})
{
    if (!(lam_max > Scalar(0)) || !std::isfinite(lam_max))
        throw DataError("lambda_max must be positive and finite (is the response constant?)");
    if (n_lambda < 2) throw ConfigError("nlambda: must be at least 2");
    const Scalar ratio = static_cast<Scalar>(min_ratio.value_or(n > p ? 0.001 : 0.05));
    if (!(ratio > Scalar(0) && ratio < Scalar(1))) throw ConfigError("min-ratio: must lie in (0, 1)");

    std::vector<Scalar> grid(static_cast<std::size_t>(n_lambda));
    const Scalar log_ratio = std::log(ratio);
    for (int k = 0; k < n_lambda; ++k)
        grid[static_cast<std::size_t>(k)] = lam_max * std::exp(log_ratio * Scalar(k) / Scalar(n_lambda - 1));
    grid.front() = lam_max;
    grid.back() = lam_max * ratio;
    return grid;
}

namespace detail {

template <typename Scalar>
Index count_nonzero_groups(const OrthoDesign<Scalar>& design, const Vector<Scalar>& beta)
{
    Index count = 0;
    for (Index j = 0; j < design.J(); ++j) {
        const auto s = static_cast<std::size_t>(j);
        if (beta.segment(design.group_start[s], design.group_rank[s]).squaredNorm() > Scalar(0)) ++count;
    }
    return count;
}

} // namespace detail

/// Fits a regularization path from lambda_max downward with warm starts and
/// returns coefficients on the original covariate scale.
///
/// For logistic loss the path stops at the first lambda whose fit explains
/// more than 99% of the null deviance; that lambda and all smaller ones are
/// dropped and `saturated_at` records its index.
template <typename Scalar>
FitPath<Scalar> fit_path(const GroupedDesign<Scalar>& data, const PenaltySpec<Scalar>& spec_in,
                         const PathControl& control = {})
{
    data.validate();
    if (spec_in.loss == LossKind::Logistic)
        for (Index i = 0; i < data.n(); ++i)
            if (data.y(i) != Scalar(0) && data.y(i) != Scalar(1))
                throw DataError("logistic response must be coded 0/1 (row " + std::to_string(i + 1) + ")");

    const auto ortho = orthonormalize(data, spec_in.loss, static_cast<Scalar>(control.eigen_tolerance));
    const auto& design = ortho.design;
    const auto spec = resolve_multipliers(spec_in, design, control.multiplier_rule);

    FitPath<Scalar> path;
    path.loss = spec.loss;
    path.family = spec.family;
    path.gamma = spec.gamma;
    path.multipliers = spec.multipliers;
    path.group_labels = data.group_labels;
    path.column_names = data.column_names;
    path.group_of = data.group_of;
    path.warnings = validate(spec);

    const BaseFit<Scalar> base = fit_unpenalized(design, spec, control.solver);
    std::vector<Scalar> grid;
    if (!control.lambdas.empty()) {
        for (double l : control.lambdas) grid.push_back(static_cast<Scalar>(l));
        for (std::size_t k = 1; k < grid.size(); ++k)
            if (!(grid[k] < grid[k - 1])) throw ConfigError("lambdas: supplied grid must be strictly decreasing");
        if (!(grid.back() > Scalar(0))) throw ConfigError("lambdas: supplied grid must be positive");
    } else {
        grid = build_grid(lambda_max(design, spec, base), data.n(), data.p(), control.n_lambda, control.min_ratio);
    }

    const auto L = static_cast<Index>(grid.size());
    path.coefficients.resize(data.p(), L);
    Scalar null_dev = 0;
    if (spec.loss == LossKind::Logistic) {
        null_dev = null_deviance(design.y);
        path.null_deviance = null_dev;
    }

    Scalar beta0 = base.beta0;
    Vector<Scalar> beta = base.beta;
    Index recorded = 0;
    for (Index k = 0; k < L; ++k) {
        const Scalar lam = grid[static_cast<std::size_t>(k)];
        if (!control.warm_start) {
            beta0 = base.beta0;
            beta = base.beta;
        }
        Scalar loss_part = 0;
        int iters = 0;
        bool conv = false;
        try {
            if (spec.loss == LossKind::Linear) {
                auto state = fit_linear(design, lam, spec, beta, control.solver);
                beta = state.beta;
                loss_part = state.residuals.squaredNorm() / (Scalar(2) * static_cast<Scalar>(design.n()));
                iters = state.iter;
                conv = state.converged;
            } else {
                auto state = fit_logistic(design, lam, spec, beta0, beta, control.solver);
                if (check_saturation(state.deviance, null_dev)) {
                    path.saturated_at = k;
                    path.warnings.push_back("saturated at lambda index " + std::to_string(k)
                                            + "; path truncated");
                    break;
                }
                beta0 = state.beta0;
                beta = state.beta;
                loss_part = loss_value(design.y, state.eta, LossKind::Logistic);
                iters = state.iter;
                conv = state.converged;
            }
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at lambda index " + std::to_string(k));
        }

        const Vector<Scalar> original = back_transform(beta, ortho.transform);
        path.lambdas.push_back(lam);
        path.coefficients.col(k) = original;
        const Scalar b0 = spec.loss == LossKind::Linear ? Scalar(0) : beta0;
        path.intercepts.push_back(original_intercept(b0, original, ortho.transform));
        path.loss_values.push_back(loss_part);
        path.df_groups.push_back(detail::count_nonzero_groups(design, beta));
        path.iters.push_back(iters);
        path.converged.push_back(conv);
        if (!conv)
            path.warnings.push_back("did not converge within max_iter at lambda index " + std::to_string(k));
        ++recorded;
    }
    path.coefficients.conservativeResize(Eigen::NoChange, recorded);
    return path;
}

} // namespace grpdesc
