#pragma once

#include <grpdesc/model_core.hpp>
#include <grpdesc/types.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace grpdesc {

/// Per-group change of basis from the orthonormalized parameter space back to
/// the original coefficients, beta_j = basis_j * beta_tilde_j, together with
/// the centering applied before decomposition.
template <typename Scalar>
struct OrthoTransform {
    struct Group {
        std::vector<Index> columns;   // original column indices
        Matrix<Scalar> basis;         // K_j x r_j, Q_j * Lambda_j^{-1/2}
        Vector<Scalar> eigenvalues;   // retained eigenvalues, descending
        Index rank() const { return basis.cols(); }
    };

    std::vector<Group> groups;
    Vector<Scalar> x_means;
    Scalar y_mean = Scalar(0);
    Index p = 0;
    Scalar eigen_tolerance = Scalar(1e-10);

    Index reduced_dim() const
    {
        Index total = 0;
        for (const auto& g : groups) total += g.rank();
        return total;
    }
};

template <typename Scalar>
struct Orthonormalized {
    OrthoDesign<Scalar> design;
    OrthoTransform<Scalar> transform;
};

/// Centers the design and orthonormalizes each group through the
/// eigendecomposition of its Gram matrix (1/n) Xj'Xj.
///
/// Eigenpairs with eigenvalue <= eigen_tolerance * (largest eigenvalue of the
/// group) are dropped, so rank-deficient groups are fitted in r_j < K_j
/// dimensions. The response is centered only for linear loss; logistic fits
/// carry an explicit intercept.
template <typename Scalar>
Orthonormalized<Scalar> orthonormalize(const GroupedDesign<Scalar>& data, LossKind loss,
                                       Scalar eigen_tolerance = Scalar(1e-10))
{
    data.validate();
    const Index n = data.n();
    const auto nn = static_cast<Scalar>(n);

    Orthonormalized<Scalar> out;
    auto& tr = out.transform;
    auto& od = out.design;
    tr.p = data.p();
    tr.eigen_tolerance = eigen_tolerance;
    tr.x_means = data.X.colwise().mean().transpose();
    if (loss == LossKind::Linear) {
        tr.y_mean = data.y.mean();
        od.y = data.y.array() - tr.y_mean;
    } else {
        od.y = data.y;
    }

    const auto columns = data.group_columns();
    std::vector<Matrix<Scalar>> blocks;
    blocks.reserve(columns.size());
    Index total = 0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& cols = columns[j];
        const auto K = static_cast<Index>(cols.size());
        Matrix<Scalar> Xj(n, K);
        for (Index k = 0; k < K; ++k)
            Xj.col(k) = data.X.col(cols[static_cast<std::size_t>(k)]).array() - tr.x_means(cols[static_cast<std::size_t>(k)]);

        const Matrix<Scalar> gram = (Xj.transpose() * Xj) / nn;
        if (!gram.allFinite())
            throw NumericalError("Gram matrix of group '" + data.group_labels[j] + "' overflows");
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
        if (eig.info() != Eigen::Success)
            throw NumericalError("eigendecomposition failed for group '" + data.group_labels[j] + "'");
        const Vector<Scalar>& values = eig.eigenvalues();   // ascending
        const Scalar top = values(K - 1);
        if (!(top > Scalar(0)))
            throw DataError("group '" + data.group_labels[j] + "' has no variation (all columns constant)");

        std::vector<Index> keep;
        for (Index k = K - 1; k >= 0; --k)
            if (values(k) > eigen_tolerance * top) keep.push_back(k);

        typename OrthoTransform<Scalar>::Group g;
        g.columns = cols;
        const auto r = static_cast<Index>(keep.size());
        g.basis.resize(K, r);
        g.eigenvalues.resize(r);
        for (Index c = 0; c < r; ++c) {
            const Index k = keep[static_cast<std::size_t>(c)];
            Vector<Scalar> q = eig.eigenvectors().col(k);
            // Fix the eigenvector sign: largest-magnitude entry positive.
            Index arg = 0;
            q.cwiseAbs().maxCoeff(&arg);
            if (q(arg) < Scalar(0)) q = -q;
            g.eigenvalues(c) = values(k);
            g.basis.col(c) = q / std::sqrt(values(k));
        }
        blocks.push_back(Xj * g.basis);

        od.group_start.push_back(total);
        od.group_rank.push_back(r);
        od.group_size.push_back(K);
        total += r;
        tr.groups.push_back(std::move(g));
    }

    od.X.resize(n, total);
    for (std::size_t j = 0; j < blocks.size(); ++j)
        od.X.middleCols(od.group_start[j], od.group_rank[j]) = blocks[j];
    od.group_labels = data.group_labels;
    od.unpenalized.assign(columns.size(), false);
    for (std::size_t j = 0; j < columns.size(); ++j) od.unpenalized[j] = data.is_unpenalized(static_cast<Index>(j));
    return out;
}

/// Maps orthonormalized-scale coefficients to the original p columns.
template <typename Scalar>
Vector<Scalar> back_transform(const Vector<Scalar>& beta_tilde, const OrthoTransform<Scalar>& transform)
{
    if (beta_tilde.size() != transform.reduced_dim())
        throw ConfigError("back_transform: expected " + std::to_string(transform.reduced_dim())
                          + " coefficients, got " + std::to_string(beta_tilde.size()));
    Vector<Scalar> beta = Vector<Scalar>::Zero(transform.p);
    Index offset = 0;
    for (const auto& g : transform.groups) {
        const Vector<Scalar> bj = g.basis * beta_tilde.segment(offset, g.rank());
        for (std::size_t k = 0; k < g.columns.size(); ++k) beta(g.columns[k]) = bj(static_cast<Index>(k));
        offset += g.rank();
    }
    return beta;
}

/// Intercept on the original (uncentered) covariate scale.
template <typename Scalar>
Scalar original_intercept(Scalar beta0, const Vector<Scalar>& beta_original, const OrthoTransform<Scalar>& transform)
{
    return transform.y_mean + beta0 - transform.x_means.dot(beta_original);
}

} // namespace grpdesc
