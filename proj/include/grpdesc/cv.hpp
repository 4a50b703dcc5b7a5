#pragma once

#include <grpdesc/path.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace grpdesc {

enum class CVMetric { RootPredictionError, Misclassification, Deviance };

inline const char* to_string(CVMetric m)
{
    switch (m) {
    case CVMetric::RootPredictionError: return "rmspe";
    case CVMetric::Misclassification: return "misclass";
    case CVMetric::Deviance: return "deviance";
    }
    return "?";
}

inline CVMetric parse_metric(const std::string& s)
{
    if (s == "rmspe" || s == "root-prediction-error") return CVMetric::RootPredictionError;
    if (s == "misclass" || s == "misclassification") return CVMetric::Misclassification;
    if (s == "deviance") return CVMetric::Deviance;
    throw ConfigError("metric: unknown metric '" + s + "'");
}

inline CVMetric default_metric(LossKind loss)
{
    return loss == LossKind::Linear ? CVMetric::RootPredictionError : CVMetric::Misclassification;
}

struct CVControl {
    int folds = 5;
    std::uint64_t seed = 1;
    std::optional<CVMetric> metric;
    PathControl path;
    int threads = 1;
    // Explicit fold ids in [0, folds); overrides seeded assignment.
    std::vector<int> fold_assignment;
};

template <typename Scalar>
struct CVResult {
    std::vector<Scalar> lambdas;
    std::vector<Scalar> cve;
    std::vector<Scalar> cvse;
    Index lambda_min_index = 0;
    std::vector<int> fold_assignment;
    CVMetric metric = CVMetric::RootPredictionError;
    FitPath<Scalar> fit;   // full-data path on the same grid

    Scalar lambda_min() const { return lambdas[static_cast<std::size_t>(lambda_min_index)]; }
};

/// Seeded partition into k folds whose sizes differ by at most one. With
/// stratification each class is dealt round-robin after shuffling, so every
/// fold receives a near-equal share of each class.
template <typename Scalar>
std::vector<int> assign_folds(const Vector<Scalar>& y, int k, std::uint64_t seed, bool stratify)
{
    if (k < 2) throw ConfigError("folds: need at least 2");
    if (k > y.size()) throw ConfigError("folds: more folds than observations");
    std::mt19937_64 rng(seed);
    std::vector<int> folds(static_cast<std::size_t>(y.size()), 0);
    std::vector<std::vector<Index>> strata(1);
    if (stratify) {
        strata.assign(2, {});
        for (Index i = 0; i < y.size(); ++i) strata[y(i) > Scalar(0.5) ? 1 : 0].push_back(i);
    } else {
        for (Index i = 0; i < y.size(); ++i) strata[0].push_back(i);
    }
    int next = 0;
    for (auto& s : strata) {
        std::shuffle(s.begin(), s.end(), rng);
        for (Index i : s) {
            folds[static_cast<std::size_t>(i)] = next;
            next = (next + 1) % k;
        }
    }
    return folds;
}

namespace detail {

template <typename Scalar>
GroupedDesign<Scalar> subset_rows(const GroupedDesign<Scalar>& data, const std::vector<Index>& rows)
{
    GroupedDesign<Scalar> out;
    out.X.resize(static_cast<Index>(rows.size()), data.p());
    out.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.X.row(static_cast<Index>(r)) = data.X.row(rows[r]);
        out.y(static_cast<Index>(r)) = data.y(rows[r]);
    }
    out.group_of = data.group_of;
    out.group_labels = data.group_labels;
    out.column_names = data.column_names;
    out.unpenalized = data.unpenalized;
    return out;
}

/// Per-observation loss contribution; RootPredictionError accumulates squared
/// error and takes the root after averaging.
template <typename Scalar>
Scalar observation_loss(Scalar y, Scalar fitted, CVMetric metric, LossKind loss)
{
    switch (metric) {
    case CVMetric::RootPredictionError: return (y - fitted) * (y - fitted);
    case CVMetric::Misclassification: return ((fitted > Scalar(0.5)) != (y > Scalar(0.5))) ? Scalar(1) : Scalar(0);
    case CVMetric::Deviance:
        if (loss == LossKind::Linear) return (y - fitted) * (y - fitted);
        {
            const Scalar p = std::clamp(fitted, Scalar(1e-10), Scalar(1) - Scalar(1e-10));
            return Scalar(-2) * (y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p));
        }
    }
    return Scalar(0);
}

template <typename Scalar>
Scalar finish_metric(Scalar mean_loss, CVMetric metric)
{
    return metric == CVMetric::RootPredictionError ? std::sqrt(mean_loss) : mean_loss;
}

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn)
{
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace detail

/// k-fold cross-validation over a master lambda grid built from the full data.
template <typename Scalar>
CVResult<Scalar> cross_validate(const GroupedDesign<Scalar>& data, const PenaltySpec<Scalar>& spec,
                                const CVControl& control = {})
{
    data.validate();
    CVResult<Scalar> result;
    result.metric = control.metric.value_or(default_metric(spec.loss));
    if (spec.loss == LossKind::Linear && result.metric == CVMetric::Misclassification)
        throw ConfigError("metric: misclassification requires logistic loss");
    if (spec.loss == LossKind::Logistic && result.metric == CVMetric::RootPredictionError)
        throw ConfigError("metric: rmspe requires linear loss");

    if (!control.fold_assignment.empty()) {
        if (static_cast<Index>(control.fold_assignment.size()) != data.n())
            throw ConfigError("fold_assignment: length must equal number of observations");
        for (int f : control.fold_assignment)
            if (f < 0 || f >= control.folds) throw ConfigError("fold_assignment: fold id out of range");
        result.fold_assignment = control.fold_assignment;
    } else {
        result.fold_assignment = assign_folds(data.y, control.folds, control.seed, spec.loss == LossKind::Logistic);
    }

    result.fit = fit_path(data, spec, control.path);
    const auto& master = result.fit.lambdas;
    const auto L = static_cast<Index>(master.size());

    PathControl fold_control = control.path;
    fold_control.lambdas.assign(master.begin(), master.end());

    const Index n = data.n();
    Matrix<Scalar> losses = Matrix<Scalar>::Constant(n, L, std::numeric_limits<Scalar>::quiet_NaN());
    std::vector<Index> fold_lengths(static_cast<std::size_t>(control.folds), 0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(control.folds));

    detail::parallel_for(control.folds, control.threads, [&](int f) {
        try {
            std::vector<Index> train, test;
            for (Index i = 0; i < n; ++i) (result.fold_assignment[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
            if (test.empty()) throw ConfigError("fold " + std::to_string(f + 1) + " is empty");
            const auto train_data = detail::subset_rows(data, train);
            if (spec.loss == LossKind::Logistic) {
                const Scalar ybar = train_data.y.mean();
                if (!(ybar > Scalar(0) && ybar < Scalar(1)))
                    throw DataError("fold " + std::to_string(f + 1) + ": training data contains a single class");
            }
            const auto fold_path = fit_path(train_data, spec, fold_control);
            const auto test_data = detail::subset_rows(data, test);
            for (Index k = 0; k < fold_path.size(); ++k) {
                const Vector<Scalar> fitted = fold_path.predict_response(test_data.X, k);
                for (std::size_t t = 0; t < test.size(); ++t)
                    losses(test[t], k) = detail::observation_loss(test_data.y(static_cast<Index>(t)),
                                                                  fitted(static_cast<Index>(t)), result.metric, spec.loss);
            }
            fold_lengths[static_cast<std::size_t>(f)] = fold_path.size();
        } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    // Keep only lambdas scored by every fold.
    Index scored = L;
    for (Index len : fold_lengths) scored = std::min(scored, len);
    if (scored == 0) throw NumericalError("no lambda value was scored by every fold");

    const int k = control.folds;
    for (Index l = 0; l < scored; ++l) {
        std::vector<Scalar> fold_sum(static_cast<std::size_t>(k), Scalar(0));
        std::vector<Index> fold_count(static_cast<std::size_t>(k), 0);
        Scalar total = 0;
        for (Index i = 0; i < n; ++i) {
            const auto f = static_cast<std::size_t>(result.fold_assignment[static_cast<std::size_t>(i)]);
            fold_sum[f] += losses(i, l);
            ++fold_count[f];
            total += losses(i, l);
        }
        std::vector<Scalar> fold_err(static_cast<std::size_t>(k));
        Scalar mean_err = 0;
        for (std::size_t f = 0; f < fold_err.size(); ++f) {
            fold_err[f] = detail::finish_metric(fold_sum[f] / static_cast<Scalar>(fold_count[f]), result.metric);
            mean_err += fold_err[f];
        }
        mean_err /= static_cast<Scalar>(k);
        Scalar ss = 0;
        for (Scalar e : fold_err) ss += (e - mean_err) * (e - mean_err);
        result.lambdas.push_back(master[static_cast<std::size_t>(l)]);
        result.cve.push_back(detail::finish_metric(total / static_cast<Scalar>(n), result.metric));
        result.cvse.push_back(std::sqrt(ss / static_cast<Scalar>(k - 1)) / std::sqrt(static_cast<Scalar>(k)));
    }
    result.lambda_min_index = 0;
    for (Index l = 1; l < scored; ++l)
        if (result.cve[static_cast<std::size_t>(l)] < result.cve[static_cast<std::size_t>(result.lambda_min_index)])
            result.lambda_min_index = l;
    return result;
}

} // namespace grpdesc
