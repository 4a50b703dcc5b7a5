#pragma once

#include <grpdesc/ortho.hpp>
#include <grpdesc/types.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace testing {

using grpdesc::GroupedDesign;
using grpdesc::Index;
using grpdesc::LossKind;
using grpdesc::Matrix;
using grpdesc::Vector;

inline Matrix<double> gaussian_matrix(std::mt19937_64& rng, Index n, Index p)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix<double> X(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) X(i, j) = g(rng);
    return X;
}

/// Gaussian design with the given group widths; the first `signal` groups
/// carry unit-scale coefficients.
inline GroupedDesign<double> grouped(std::mt19937_64& rng, Index n, const std::vector<int>& widths, LossKind loss,
                                     int signal = 1, double noise = 1.0)
{
    GroupedDesign<double> d;
    for (std::size_t j = 0; j < widths.size(); ++j) {
        for (int k = 0; k < widths[j]; ++k) {
            d.group_of.push_back(static_cast<int>(j));
            d.column_names.push_back("v" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
        }
        d.group_labels.push_back("G" + std::to_string(j + 1));
    }
    d.unpenalized.assign(widths.size(), false);
    const auto p = static_cast<Index>(d.group_of.size());
    d.X = gaussian_matrix(rng, n, p);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector<double> beta = Vector<double>::Zero(p);
    for (Index k = 0; k < p; ++k)
        if (d.group_of[static_cast<std::size_t>(k)] < signal) beta(k) = g(rng);
    const Vector<double> eta = d.X * beta;
    d.y.resize(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        if (loss == LossKind::Linear)
            d.y(i) = eta(i) + noise * g(rng);
        else
            d.y(i) = u(rng) < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
    }
    if (loss == LossKind::Logistic) {
        d.y(0) = 0.0;
        d.y(1) = 1.0;
    }
    return d;
}

inline std::vector<int> random_widths(std::mt19937_64& rng, int groups, int max_width)
{
    std::uniform_int_distribution<int> w(1, max_width);
    std::vector<int> out;
    for (int j = 0; j < groups; ++j) out.push_back(w(rng));
    return out;
}

inline double rel_diff(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

} // namespace testing
