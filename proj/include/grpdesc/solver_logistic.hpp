#pragma once

#include <grpdesc/model_core.hpp>
#include <grpdesc/solver_linear.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace grpdesc {

/// State of the majorize-minimize loop for penalized logistic regression.
template <typename Scalar>
struct MMState {
    Scalar beta0 = Scalar(0);
    Vector<Scalar> beta;               // orthonormalized scale
    Vector<Scalar> eta;                // beta0 + X beta
    Vector<Scalar> pi;                 // fitted probabilities at eta
    Vector<Scalar> pseudo_residuals;   // (y - pi) / v after the last majorization, minus later moves
    Scalar v = logistic_curvature<Scalar>;
    Scalar deviance = Scalar(0);
    int iter = 0;
    bool converged = false;
    std::vector<Scalar> objective_trace;
};

/// -2 log-likelihood with probabilities clamped to [1e-10, 1 - 1e-10].
template <typename Scalar>
Scalar binomial_deviance(const Vector<Scalar>& y, const Vector<Scalar>& pi)
{
    const Scalar lo = Scalar(1e-10);
    const Scalar hi = Scalar(1) - lo;
    Scalar total = 0;
    for (Index i = 0; i < y.size(); ++i) {
        const Scalar p = std::clamp(pi(i), lo, hi);
        total += y(i) * std::log(p) + (Scalar(1) - y(i)) * std::log(Scalar(1) - p);
    }
    return Scalar(-2) * total;
}

template <typename Scalar>
Scalar null_deviance(const Vector<Scalar>& y)
{
    const Scalar ybar = y.mean();
    return binomial_deviance(y, Vector<Scalar>::Constant(y.size(), ybar).eval());
}

/// More than 99% of the null deviance explained.
template <typename Scalar>
bool check_saturation(Scalar deviance, Scalar null_dev)
{
    if (!(null_dev > Scalar(0))) throw ConfigError("check_saturation: null deviance must be positive");
    return Scalar(1) - deviance / null_dev > Scalar(0.99);
}

template <typename Scalar>
bool check_saturation(const MMState<Scalar>& state, Scalar null_dev)
{
    return check_saturation(state.deviance, null_dev);
}

template <typename Scalar>
void refresh_fitted(const OrthoDesign<Scalar>& design, MMState<Scalar>& state)
{
    state.pi.resize(state.eta.size());
    for (Index i = 0; i < state.eta.size(); ++i) state.pi(i) = logistic(state.eta(i));
    if (!state.pi.allFinite()) throw NumericalError("non-finite fitted probabilities");
    state.deviance = binomial_deviance(design.y, state.pi);
}

template <typename Scalar>
MMState<Scalar> initial_logistic_state(const OrthoDesign<Scalar>& design, Scalar beta0, const Vector<Scalar>& init)
{
    if (init.size() != design.cols()) throw ConfigError("initial coefficients have wrong dimension");
    MMState<Scalar> state;
    state.beta0 = beta0;
    state.beta = init;
    state.eta = (design.X * init).array() + beta0;
    refresh_fitted(design, state);
    return state;
}

template <typename Scalar>
Scalar logistic_objective_from_state(const OrthoDesign<Scalar>& design, const MMState<Scalar>& state, Scalar lam,
                                     const PenaltySpec<Scalar>& spec)
{
    return loss_value(design.y, state.eta, LossKind::Logistic) + penalty_total(design, state.beta, lam, spec);
}

/// One majorize-minimize cycle: majorize at the current eta, update the
/// intercept exactly, then sweep the groups with v-scaled thresholding.
/// On return eta, pi and deviance describe the new coefficients. Returns the
/// largest coefficient change, intercept included.
template <typename Scalar>
Scalar mm_cycle(const OrthoDesign<Scalar>& design, MMState<Scalar>& state, Scalar lam, const PenaltySpec<Scalar>& spec,
                const std::vector<Index>& order)
{
    const Scalar v = state.v;
    const auto nn = static_cast<Scalar>(design.n());

    // Majorization at the current linear predictor.
    state.pseudo_residuals = (design.y - state.pi) / v;
    const Vector<Scalar> start_residuals = state.pseudo_residuals;

    const Scalar shift0 = state.pseudo_residuals.mean();
    state.beta0 += shift0;
    state.pseudo_residuals.array() -= shift0;
    Scalar change = std::abs(shift0);

    for (Index j : order) {
        const auto s = static_cast<std::size_t>(j);
        const Index start = design.group_start[s];
        const Index r = design.group_rank[s];
        const auto Xj = design.block(j);
        const Vector<Scalar> old = state.beta.segment(start, r);
        const Vector<Scalar> z = (Xj.transpose() * state.pseudo_residuals) / nn + old;
        const Vector<Scalar> updated = mv_threshold((v * z).eval(), group_lambda(lam, spec, j), spec) / v;
        const Vector<Scalar> shift = updated - old;
        const Scalar c = shift.cwiseAbs().maxCoeff();
        if (c != Scalar(0)) {
            state.pseudo_residuals.noalias() -= Xj * shift;
            state.beta.segment(start, r) = updated;
            change = std::max(change, c);
        }
    }
    // eta moved by exactly the amount the pseudo-residuals dropped.
    state.eta += start_residuals - state.pseudo_residuals;
    detail::check_finite(state.eta, "linear predictor");
    refresh_fitted(design, state);
    return change;
}

template <typename Scalar>
Scalar mm_cycle(const OrthoDesign<Scalar>& design, MMState<Scalar>& state, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    return mm_cycle(design, state, lam, spec, detail::sweep_order(SolverControl{}, design.J()));
}

/// Penalized logistic regression at a single lambda by repeated MM cycles.
/// Separation shows up as non-convergence within max_iter, not as an error.
template <typename Scalar>
MMState<Scalar> fit_logistic(const OrthoDesign<Scalar>& design, Scalar lam, const PenaltySpec<Scalar>& spec,
                             Scalar beta0_init, const Vector<Scalar>& init, const SolverControl& control = {})
{
    if (spec.loss != LossKind::Logistic) throw ConfigError("fit_logistic: penalty spec is not for logistic loss");
    if (static_cast<Index>(spec.multipliers.size()) != design.J())
        throw ConfigError("fit_logistic: multipliers do not match group count");
    const auto order = detail::sweep_order(control, design.J());

    MMState<Scalar> state = initial_logistic_state(design, beta0_init, init);
    if (control.record_objective)
        state.objective_trace.push_back(logistic_objective_from_state(design, state, lam, spec));

    while (state.iter < control.max_iter) {
        const Scalar change = mm_cycle(design, state, lam, spec, order);
        ++state.iter;
        if (control.resync_every > 0 && state.iter % control.resync_every == 0) {
            state.eta = (design.X * state.beta).array() + state.beta0;
            refresh_fitted(design, state);
        }
        if (control.record_objective)
            state.objective_trace.push_back(logistic_objective_from_state(design, state, lam, spec));
        if (change < static_cast<Scalar>(control.tol)) {
            state.converged = true;
            break;
        }
    }
    state.eta = (design.X * state.beta).array() + state.beta0;
    refresh_fitted(design, state);
    state.pseudo_residuals = (design.y - state.pi) / state.v;
    return state;
}

} // namespace grpdesc
