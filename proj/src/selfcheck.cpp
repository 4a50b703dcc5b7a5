#include <grpdesc/selfcheck.hpp>

#include <grpdesc/oracle.hpp>
#include <grpdesc/path.hpp>

#include <fmt/format.h>

#include <cmath>

namespace grpdesc::selfcheck {

GroupedDesign<double> random_instance(std::mt19937_64& rng, int n, int groups, int max_group_size, LossKind loss)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> width(1, max_group_size);
    GroupedDesign<double> d;
    for (int j = 0; j < groups; ++j) {
        const int w = width(rng);
        for (int k = 0; k < w; ++k) {
            d.group_of.push_back(j);
            d.column_names.push_back(fmt::format("g{}x{}", j + 1, k + 1));
        }
        d.group_labels.push_back(fmt::format("g{}", j + 1));
    }
    d.unpenalized.assign(static_cast<std::size_t>(groups), false);
    const auto p = static_cast<Index>(d.group_of.size());
    d.X.resize(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < p; ++k) d.X(i, k) = gauss(rng);
    Vector<double> beta = Vector<double>::Zero(p);
    for (Index k = 0; k < p; ++k)
        if (d.group_of[static_cast<std::size_t>(k)] == 0) beta(k) = gauss(rng);
    const Vector<double> eta = d.X * beta;
    d.y.resize(n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        if (loss == LossKind::Linear) {
            d.y(i) = eta(i) + gauss(rng);
        } else {
            d.y(i) = unif(rng) < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
        }
    }
    if (loss == LossKind::Logistic) {
        // both classes present
        d.y(0) = 0.0;
        d.y(1) = 1.0;
    }
    return d;
}

namespace {

FitPath<double> short_path(const GroupedDesign<double>& d, const PenaltySpec<double>& spec)
{
    PathControl control;
    control.n_lambda = 8;
    control.min_ratio = 0.1;
    return fit_path(d, spec, control);
}

} // namespace

std::vector<CaseResult> run(int instances, std::uint64_t seed)
{
    if (instances < 1) throw ConfigError("instances: must be positive");
    std::vector<CaseResult> out;
    std::mt19937_64 rng(seed);
    for (int t = 0; t < instances; ++t) {
        for (LossKind loss : {LossKind::Linear, LossKind::Logistic}) {
            const auto d = random_instance(rng, 20, 2, 3, loss);
            PenaltySpec<double> spec;
            spec.loss = loss;
            const auto path = short_path(d, spec);
            const Index k = path.size() / 2;
            const double lam = path.lambdas[static_cast<std::size_t>(k)];
            const double solver = oracle::naive_objective(d, path.intercepts[static_cast<std::size_t>(k)],
                                                          Vector<double>(path.coefficients.col(k)), lam, spec);
            const auto ref = oracle::brute_minimize(d, lam, spec, 8, seed + static_cast<std::uint64_t>(t));
            CaseResult r;
            r.name = fmt::format("{}-grlasso-{}", to_string(loss), t + 1);
            r.solver_value = solver;
            r.reference_value = ref.objective;
            r.discrepancy = (solver - ref.objective) / std::max(1.0, std::abs(ref.objective));
            r.tolerance = loss == LossKind::Linear ? 1e-6 : 1e-4;
            r.passed = r.discrepancy <= r.tolerance;
            out.push_back(r);
        }
        for (PenaltyFamily family : {PenaltyFamily::GroupMCP, PenaltyFamily::GroupSCAD}) {
            const auto d = random_instance(rng, 20, 2, 3, LossKind::Linear);
            PenaltySpec<double> spec;
            spec.family = family;
            spec.gamma = PenaltySpec<double>::default_gamma(family);
            const auto path = short_path(d, spec);
            const Index k = path.size() / 2;
            const double lam = path.lambdas[static_cast<std::size_t>(k)];
            const Vector<double> beta = path.coefficients.col(k);
            const double b0 = path.intercepts[static_cast<std::size_t>(k)];
            CaseResult r;
            r.name = fmt::format("linear-{}-{}", to_string(family), t + 1);
            r.solver_value = oracle::naive_objective(d, b0, beta, lam, spec);
            r.reference_value = r.solver_value;
            r.discrepancy = oracle::finite_difference_descent(d, b0, beta, lam, spec);
            r.tolerance = -1e-8;
            r.passed = r.discrepancy >= r.tolerance;
            out.push_back(r);
        }
    }
    return out;
}

} // namespace grpdesc::selfcheck
