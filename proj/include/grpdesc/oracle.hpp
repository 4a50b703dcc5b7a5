#pragma once

// Reference implementations used to certify the solvers on small problems.
// Nothing here calls into model_core or ortho: the objective is evaluated on
// the original covariate scale by direct summation, with each group norm taken
// through its centered Gram matrix.

#include <grpdesc/model_core.hpp>   // PenaltySpec (data only)
#include <grpdesc/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace grpdesc::oracle {

template <typename Scalar>
struct OracleSolution {
    Scalar beta0 = Scalar(0);
    Vector<Scalar> beta;
    Scalar objective = std::numeric_limits<Scalar>::infinity();
    int n_starts = 0;
    std::vector<Scalar> per_start_values;
};

namespace detail {

template <typename Scalar>
std::vector<Scalar> multipliers_or_default(const GroupedDesign<Scalar>& data, const PenaltySpec<Scalar>& spec)
{
    if (!spec.multipliers.empty()) return spec.multipliers;
    std::vector<Scalar> m(static_cast<std::size_t>(data.J()), Scalar(0));
    for (int g : data.group_of) m[static_cast<std::size_t>(g)] += Scalar(1);
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = data.is_unpenalized(static_cast<Index>(j)) ? Scalar(0) : std::sqrt(m[j]);
    return m;
}

template <typename Scalar>
Scalar lasso_pen(Scalar t, Scalar lam) { return lam * t; }

template <typename Scalar>
Scalar mcp_pen(Scalar t, Scalar lam, Scalar g)
{
    return t <= g * lam ? lam * t - t * t / (2 * g) : g * lam * lam / 2;
}

template <typename Scalar>
Scalar scad_pen(Scalar t, Scalar lam, Scalar g)
{
    if (t <= lam) return lam * t;
    if (t <= g * lam) return (g * lam * t - (t * t + lam * lam) / 2) / (g - 1);
    return lam * lam * (g * g - 1) / (2 * (g - 1));
}

} // namespace detail

/// Direct evaluation of the penalized objective at original-scale (beta0, beta).
/// Limited to p <= 50.
template <typename Scalar>
Scalar naive_objective(const GroupedDesign<Scalar>& data, Scalar beta0, const Vector<Scalar>& beta, Scalar lam,
                       const PenaltySpec<Scalar>& spec)
{
    const Index n = data.X.rows();
    const Index p = data.X.cols();
    if (p > 50) throw ConfigError("naive_objective: limited to p <= 50");
    if (beta.size() != p) throw ConfigError("naive_objective: coefficient dimension mismatch");

    Scalar loss = 0;
    for (Index i = 0; i < n; ++i) {
        Scalar eta = beta0;
        for (Index k = 0; k < p; ++k) eta += data.X(i, k) * beta(k);
        if (spec.loss == LossKind::Linear) {
            const Scalar e = data.y(i) - eta;
            loss += e * e / 2;
        } else {
            // log(1 + e^eta) - y * eta
            const Scalar lse = eta > 0 ? eta + std::log(1 + std::exp(-eta)) : std::log(1 + std::exp(eta));
            loss += lse - data.y(i) * eta;
        }
    }
    loss /= static_cast<Scalar>(n);

    std::vector<Scalar> mean(static_cast<std::size_t>(p), Scalar(0));
    for (Index k = 0; k < p; ++k) {
        for (Index i = 0; i < n; ++i) mean[static_cast<std::size_t>(k)] += data.X(i, k);
        mean[static_cast<std::size_t>(k)] /= static_cast<Scalar>(n);
    }

    const auto m = detail::multipliers_or_default(data, spec);
    const Scalar c = spec.loss == LossKind::Logistic ? Scalar(0.25) : Scalar(1);
    Scalar penalty = 0;
    for (Index j = 0; j < data.J(); ++j) {
        // ||X_j beta_j|| / sqrt(n) on centered columns
        Scalar sq = 0;
        for (Index i = 0; i < n; ++i) {
            Scalar s = 0;
            for (Index k = 0; k < p; ++k)
                if (data.group_of[static_cast<std::size_t>(k)] == j)
                    s += (data.X(i, k) - mean[static_cast<std::size_t>(k)]) * beta(k);
            sq += s * s;
        }
        const Scalar t = c * std::sqrt(sq / static_cast<Scalar>(n));
        const Scalar lj = lam * m[static_cast<std::size_t>(j)];
        if (t == 0 || lj == 0) continue;
        Scalar pen = 0;
        switch (spec.family) {
        case PenaltyFamily::GroupLasso: pen = detail::lasso_pen(t, lj); break;
        case PenaltyFamily::GroupMCP: pen = detail::mcp_pen(t, lj, spec.gamma); break;
        case PenaltyFamily::GroupSCAD: pen = detail::scad_pen(t, lj, spec.gamma); break;
        }
        penalty += pen / c;
    }
    return loss + penalty;
}

/// Profiled intercept for least squares: ybar - xbar' beta.
template <typename Scalar>
Scalar optimal_linear_intercept(const GroupedDesign<Scalar>& data, const Vector<Scalar>& beta)
{
    return data.y.mean() - data.X.colwise().mean().dot(beta.transpose());
}

namespace detail {

/// Pattern search polling the coordinate directions plus fresh random
/// directions at every step; the step halves after an unsuccessful poll.
template <typename Scalar, typename F>
Vector<Scalar> pattern_search(F&& f, Vector<Scalar> x, std::mt19937_64& rng, Scalar initial_step = Scalar(0.5),
                              Scalar final_step = Scalar(1e-8), long max_evals = 400000)
{
    const Index d = x.size();
    std::normal_distribution<double> gauss(0.0, 1.0);
    Scalar fx = f(x);
    Scalar step = initial_step;
    long evals = 1;
    std::vector<Vector<Scalar>> dirs;
    while (step > final_step && evals < max_evals) {
        dirs.clear();
        for (Index k = 0; k < d; ++k) {
            dirs.push_back(Vector<Scalar>::Unit(d, k));
            dirs.push_back(-Vector<Scalar>::Unit(d, k));
        }
        for (Index r = 0; r < 2 * d; ++r) {
            Vector<Scalar> u(d);
            for (Index k = 0; k < d; ++k) u(k) = static_cast<Scalar>(gauss(rng));
            dirs.push_back(u / u.norm());
        }
        Scalar best = fx;
        Index best_dir = -1;
        for (std::size_t q = 0; q < dirs.size(); ++q) {
            const Scalar val = f((x + step * dirs[q]).eval());
            ++evals;
            if (val < best) {
                best = val;
                best_dir = static_cast<Index>(q);
            }
        }
        if (best_dir < 0) {
            step /= 2;
            continue;
        }
        const Vector<Scalar> dir = dirs[static_cast<std::size_t>(best_dir)];
        x += step * dir;
        fx = best;
        // Keep stretching along a successful direction.
        for (Scalar s = 2 * step;; s *= 2) {
            const Vector<Scalar> trial = x + s * dir;
            const Scalar val = f(trial);
            ++evals;
            if (!(val < fx)) break;
            x = trial;
            fx = val;
        }
    }
    return x;
}

} // namespace detail

/// Multi-start derivative-free minimization of naive_objective from the zero
/// vector, the least-squares point, and n_starts seeded random points.
/// Limited to p <= 8.
template <typename Scalar>
OracleSolution<Scalar> brute_minimize(const GroupedDesign<Scalar>& data, Scalar lam, const PenaltySpec<Scalar>& spec,
                                      int n_starts = 32, std::uint64_t seed = 7)
{
    const Index p = data.X.cols();
    if (p > 8) throw ConfigError("brute_minimize: limited to p <= 8");
    const bool logistic = spec.loss == LossKind::Logistic;
    const Index dim = logistic ? p + 1 : p;

    auto unpack = [&](const Vector<Scalar>& theta, Scalar& b0, Vector<Scalar>& b) {
        b = theta.head(p);
        b0 = logistic ? theta(p) : optimal_linear_intercept(data, b);
    };
    auto f = [&](const Vector<Scalar>& theta) {
        Scalar b0;
        Vector<Scalar> b;
        unpack(theta, b0, b);
        return naive_objective(data, b0, b, lam, spec);
    };

    const Matrix<Scalar> Xc = data.X.rowwise() - data.X.colwise().mean();
    const Vector<Scalar> yc = data.y.array() - data.y.mean();
    const Vector<Scalar> ls = Xc.completeOrthogonalDecomposition().solve(yc);

    std::vector<Vector<Scalar>> starts;
    Vector<Scalar> zero = Vector<Scalar>::Zero(dim);
    if (logistic) {
        const Scalar ybar = std::clamp(data.y.mean(), Scalar(1e-3), Scalar(1) - Scalar(1e-3));
        zero(p) = std::log(ybar / (1 - ybar));
    }
    starts.push_back(zero);
    Vector<Scalar> lsstart = zero;
    lsstart.head(p) = ls;
    starts.push_back(lsstart);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < n_starts; ++s) {
        Vector<Scalar> x = zero;
        for (Index k = 0; k < dim; ++k) x(k) += static_cast<Scalar>(gauss(rng));
        starts.push_back(x);
    }

    OracleSolution<Scalar> best;
    best.n_starts = static_cast<int>(starts.size());
    for (const auto& s : starts) {
        const Vector<Scalar> x = detail::pattern_search<Scalar>(f, s, rng);
        const Scalar val = f(x);
        best.per_start_values.push_back(val);
        if (val < best.objective) {
            best.objective = val;
            unpack(x, best.beta0, best.beta);
        }
    }
    return best;
}

/// Most negative change f(x + h d) - f(x) over n_dirs random unit directions
/// d in (beta0, beta) space. A non-negative result (up to tolerance) means no
/// descent direction was found.
template <typename Scalar>
Scalar finite_difference_descent(const GroupedDesign<Scalar>& data, Scalar beta0, const Vector<Scalar>& beta, Scalar lam,
                                 const PenaltySpec<Scalar>& spec, int n_dirs = 20, Scalar step = Scalar(1e-5),
                                 std::uint64_t seed = 11)
{
    const Index p = beta.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Scalar base = naive_objective(data, beta0, beta, lam, spec);
    Scalar worst = std::numeric_limits<Scalar>::infinity();
    for (int r = 0; r < n_dirs; ++r) {
        Vector<Scalar> d(p + 1);
        for (Index k = 0; k <= p; ++k) d(k) = static_cast<Scalar>(gauss(rng));
        d /= d.norm();
        const Vector<Scalar> b = beta + step * d.head(p);
        worst = std::min(worst, naive_objective(data, beta0 + step * d(p), b, lam, spec) - base);
    }
    return worst;
}

} // namespace grpdesc::oracle
