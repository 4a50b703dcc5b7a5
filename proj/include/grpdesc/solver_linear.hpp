#pragma once

#include <grpdesc/model_core.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace grpdesc {

struct SolverControl {
    double tol = 1e-6;            // max |beta' - beta| over a full cycle
    int max_iter = 10000;         // full cycles
    int resync_every = 1000;      // cycles between full residual recomputations
    bool record_objective = false;
    std::vector<Index> group_order;   // empty: 0..J-1
};

template <typename Scalar>
struct SolverState {
    Vector<Scalar> beta;          // orthonormalized scale
    Vector<Scalar> residuals;     // y - X beta
    int iter = 0;
    bool converged = false;
    // Objective before the first cycle, then after every cycle.
    std::vector<Scalar> objective_trace;
};

namespace detail {

inline std::vector<Index> sweep_order(const SolverControl& control, Index J)
{
    if (!control.group_order.empty()) {
        if (static_cast<Index>(control.group_order.size()) != J)
            throw ConfigError("group_order: must list every group exactly once");
        return control.group_order;
    }
    std::vector<Index> order(static_cast<std::size_t>(J));
    std::iota(order.begin(), order.end(), Index(0));
    return order;
}

template <typename Scalar>
void check_finite(const Vector<Scalar>& v, const char* what)
{
    if (!v.allFinite()) throw NumericalError(std::string("non-finite values in ") + what);
}

} // namespace detail

template <typename Scalar>
SolverState<Scalar> initial_linear_state(const OrthoDesign<Scalar>& design, const Vector<Scalar>& init)
{
    if (init.size() != design.cols())
        throw ConfigError("initial coefficients have wrong dimension");
    SolverState<Scalar> state;
    state.beta = init;
    state.residuals = design.y - design.X * init;
    return state;
}

/// Exact minimization of the least-squares objective over group j with all
/// other groups fixed. Returns max |beta_j' - beta_j|.
template <typename Scalar>
Scalar group_update(const OrthoDesign<Scalar>& design, SolverState<Scalar>& state, Index j, Scalar lam,
                    const PenaltySpec<Scalar>& spec)
{
    const auto s = static_cast<std::size_t>(j);
    const Index start = design.group_start[s];
    const Index r = design.group_rank[s];
    const auto Xj = design.block(j);
    const auto nn = static_cast<Scalar>(design.n());

    const Vector<Scalar> old = state.beta.segment(start, r);
    const Vector<Scalar> z = (Xj.transpose() * state.residuals) / nn + old;
    const Vector<Scalar> updated = mv_threshold(z, group_lambda(lam, spec, j), spec);
    const Vector<Scalar> shift = updated - old;
    const Scalar change = shift.cwiseAbs().maxCoeff();
    if (change != Scalar(0)) {
        state.residuals.noalias() -= Xj * shift;
        state.beta.segment(start, r) = updated;
    }
    return change;
}

template <typename Scalar>
Scalar linear_objective_from_state(const OrthoDesign<Scalar>& design, const SolverState<Scalar>& state, Scalar lam,
                                   const PenaltySpec<Scalar>& spec)
{
    return state.residuals.squaredNorm() / (Scalar(2) * static_cast<Scalar>(design.n()))
         + penalty_total(design, state.beta, lam, spec);
}

/// Group descent for penalized least squares at a single lambda.
///
/// The response must be centered; the intercept is handled outside. A run
/// that exhausts max_iter returns with converged = false.
template <typename Scalar>
SolverState<Scalar> fit_linear(const OrthoDesign<Scalar>& design, Scalar lam, const PenaltySpec<Scalar>& spec,
                               const Vector<Scalar>& init, const SolverControl& control = {})
{
    if (spec.loss != LossKind::Linear) throw ConfigError("fit_linear: penalty spec is not for linear loss");
    if (static_cast<Index>(spec.multipliers.size()) != design.J())
        throw ConfigError("fit_linear: multipliers do not match group count");
    const auto order = detail::sweep_order(control, design.J());

    SolverState<Scalar> state = initial_linear_state(design, init);
    if (control.record_objective) state.objective_trace.push_back(linear_objective_from_state(design, state, lam, spec));

    while (state.iter < control.max_iter) {
        Scalar change = 0;
        for (Index j : order) change = std::max(change, group_update(design, state, j, lam, spec));
        ++state.iter;
        if (control.resync_every > 0 && state.iter % control.resync_every == 0)
            state.residuals = design.y - design.X * state.beta;
        detail::check_finite(state.residuals, "residuals");
        if (control.record_objective)
            state.objective_trace.push_back(linear_objective_from_state(design, state, lam, spec));
        if (change < static_cast<Scalar>(control.tol)) {
            state.converged = true;
            break;
        }
    }
    state.residuals = design.y - design.X * state.beta;
    return state;
}

} // namespace grpdesc
