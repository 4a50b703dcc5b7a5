#pragma once

#include <grpdesc/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace grpdesc {

/// Upper bound on the logistic loss curvature, pi(1 - pi) <= 1/4.
template <typename Scalar>
inline constexpr Scalar logistic_curvature = Scalar(0.25);

template <typename Scalar>
struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::GroupLasso;
    Scalar gamma = Scalar(3);
    // Per-group threshold multipliers; empty means "resolve from the design".
    std::vector<Scalar> multipliers;
    LossKind loss = LossKind::Linear;

    static Scalar default_gamma(PenaltyFamily f)
    {
        return f == PenaltyFamily::GroupSCAD ? Scalar(4) : Scalar(3);
    }
};

/// Checks the hard constraints on a penalty and returns soft warnings.
///
/// MCP needs gamma > 1 and SCAD gamma > 2 for every single-group problem to be
/// strictly convex. For logistic loss the majorized single-group problem is
/// only guaranteed convex beyond gamma = 4 (MCP) / 5 (SCAD); smaller values are
/// allowed but reported.
template <typename Scalar>
std::vector<std::string> validate(const PenaltySpec<Scalar>& spec)
{
    std::vector<std::string> warnings;
    if (spec.family == PenaltyFamily::GroupMCP && !(spec.gamma > Scalar(1)))
        throw ConfigError("gamma: group MCP requires gamma > 1");
    if (spec.family == PenaltyFamily::GroupSCAD && !(spec.gamma > Scalar(2)))
        throw ConfigError("gamma: group SCAD requires gamma > 2");
    if (spec.family != PenaltyFamily::GroupLasso && !std::isfinite(spec.gamma))
        throw ConfigError("gamma: must be finite");
    for (Scalar m : spec.multipliers)
        if (!std::isfinite(m) || m < Scalar(0))
            throw ConfigError("multipliers: must be finite and non-negative");
    if (spec.loss == LossKind::Logistic) {
        if (spec.family == PenaltyFamily::GroupMCP && spec.gamma <= Scalar(4))
            warnings.emplace_back("gamma <= 4 with logistic loss: group updates may not be strictly convex");
        if (spec.family == PenaltyFamily::GroupSCAD && spec.gamma <= Scalar(5))
            warnings.emplace_back("gamma <= 5 with logistic loss: group updates may not be strictly convex");
    }
    return warnings;
}

// ---------------------------------------------------------------------------
// Univariate thresholding operators

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar lam)
{
    if (z > lam) return z - lam;
    if (z < -lam) return z + lam;
    return Scalar(0);
}

/// Firm thresholding: the univariate MCP solution.
template <typename Scalar>
Scalar firm_mcp(Scalar z, Scalar lam, Scalar gamma)
{
    if (!(gamma > Scalar(1))) throw ConfigError("gamma: firm_mcp requires gamma > 1");
    if (std::abs(z) <= gamma * lam) return soft_threshold(z, lam) / (Scalar(1) - Scalar(1) / gamma);
    return z;
}

/// SCAD-modified firm thresholding.
template <typename Scalar>
Scalar firm_scad(Scalar z, Scalar lam, Scalar gamma)
{
    if (!(gamma > Scalar(2))) throw ConfigError("gamma: firm_scad requires gamma > 2");
    const Scalar az = std::abs(z);
    if (az <= Scalar(2) * lam) return soft_threshold(z, lam);
    if (az <= gamma * lam)
        return soft_threshold(z, gamma * lam / (gamma - Scalar(1))) / (Scalar(1) - Scalar(1) / (gamma - Scalar(1)));
    return z;
}

template <typename Scalar>
Scalar threshold(Scalar z, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    switch (spec.family) {
    case PenaltyFamily::GroupLasso: return soft_threshold(z, lam);
    case PenaltyFamily::GroupMCP: return firm_mcp(z, lam, spec.gamma);
    case PenaltyFamily::GroupSCAD: return firm_scad(z, lam, spec.gamma);
    }
    return z;
}

/// Applies the family's scalar operator to ||z|| and keeps the direction of z.
/// The output is exactly collinear with z; z = 0 maps to 0.
template <typename Derived>
Vector<typename Derived::Scalar> mv_threshold(const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar lam,
                                              const PenaltySpec<typename Derived::Scalar>& spec)
{
    using Scalar = typename Derived::Scalar;
    const Scalar norm = z.norm();
    if (norm == Scalar(0)) return Vector<Scalar>::Zero(z.size());
    const Scalar len = threshold(norm, lam, spec);
    if (len == Scalar(0)) return Vector<Scalar>::Zero(z.size());
    return (len / norm) * z;
}

// ---------------------------------------------------------------------------
// Penalty functions of a group norm

template <typename Scalar>
Scalar penalty_value(Scalar norm, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    if (norm == Scalar(0) || lam == Scalar(0)) return Scalar(0);
    const Scalar g = spec.gamma;
    switch (spec.family) {
    case PenaltyFamily::GroupLasso: return lam * norm;
    case PenaltyFamily::GroupMCP:
        if (norm <= g * lam) return lam * norm - norm * norm / (Scalar(2) * g);
        return Scalar(0.5) * g * lam * lam;
    case PenaltyFamily::GroupSCAD:
        if (norm <= lam) return lam * norm;
        if (norm <= g * lam) return (g * lam * norm - Scalar(0.5) * (norm * norm + lam * lam)) / (g - Scalar(1));
        return lam * lam * (g * g - Scalar(1)) / (Scalar(2) * (g - Scalar(1)));
    }
    return Scalar(0);
}

/// Right derivative of penalty_value in the norm.
template <typename Scalar>
Scalar penalty_derivative(Scalar norm, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    const Scalar g = spec.gamma;
    switch (spec.family) {
    case PenaltyFamily::GroupLasso: return lam;
    case PenaltyFamily::GroupMCP: return norm < g * lam ? lam - norm / g : Scalar(0);
    case PenaltyFamily::GroupSCAD:
        if (norm <= lam) return lam;
        return norm < g * lam ? (g * lam - norm) / (g - Scalar(1)) : Scalar(0);
    }
    return Scalar(0);
}

/// Curvature scale c of the quadratic the group update minimizes: 1 for least
/// squares, v = 1/4 for the logistic majorizer.
template <typename Scalar>
Scalar update_scale(LossKind loss)
{
    return loss == LossKind::Logistic ? logistic_curvature<Scalar> : Scalar(1);
}

/// Penalty on a group norm as seen by the solver for the given loss.
///
/// The logistic update beta_j <- op(v z_j, lam_j, gamma) / v is the exact
/// minimizer of the majorized loss plus p(v * theta) / v. For the group lasso
/// this equals p(theta); for MCP and SCAD the concave region is stretched by
/// 1/v.
template <typename Scalar>
Scalar loss_penalty_value(Scalar norm, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    const Scalar c = update_scale<Scalar>(spec.loss);
    return penalty_value(c * norm, lam, spec) / c;
}

template <typename Scalar>
Scalar loss_penalty_derivative(Scalar norm, Scalar lam, const PenaltySpec<Scalar>& spec)
{
    return penalty_derivative(update_scale<Scalar>(spec.loss) * norm, lam, spec);
}

// ---------------------------------------------------------------------------
// Orthonormalized design consumed by the solvers

/// Design whose groups occupy contiguous column blocks with (1/n) Xj'Xj = I.
template <typename Scalar>
struct OrthoDesign {
    Matrix<Scalar> X;
    Vector<Scalar> y;
    std::vector<Index> group_start;
    std::vector<Index> group_rank;     // r_j, columns of block j
    std::vector<Index> group_size;     // K_j, original group width
    std::vector<std::string> group_labels;
    std::vector<bool> unpenalized;

    Index n() const { return X.rows(); }
    Index cols() const { return X.cols(); }
    Index J() const { return static_cast<Index>(group_start.size()); }

    auto block(Index j) const
    {
        return X.middleCols(group_start[static_cast<std::size_t>(j)], group_rank[static_cast<std::size_t>(j)]);
    }
};

/// Threshold level for group j: lam * m_j, with m_j = 0 meaning unpenalized
/// regardless of lam (including lam = inf).
template <typename Scalar>
Scalar group_lambda(Scalar lam, const PenaltySpec<Scalar>& spec, Index j)
{
    const Scalar m = spec.multipliers[static_cast<std::size_t>(j)];
    return m == Scalar(0) ? Scalar(0) : lam * m;
}

enum class MultiplierRule { SqrtGroupSize, SqrtRank };

/// Fills in default multipliers (sqrt K_j, or sqrt r_j; 0 for unpenalized groups)
/// and validates an explicit multiplier vector against the group count.
template <typename Scalar>
PenaltySpec<Scalar> resolve_multipliers(PenaltySpec<Scalar> spec, const OrthoDesign<Scalar>& design,
                                        MultiplierRule rule = MultiplierRule::SqrtGroupSize)
{
    const auto J = static_cast<std::size_t>(design.J());
    if (spec.multipliers.empty()) {
        spec.multipliers.resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            const bool free = !design.unpenalized.empty() && design.unpenalized[j];
            const auto width = rule == MultiplierRule::SqrtGroupSize ? design.group_size[j] : design.group_rank[j];
            spec.multipliers[j] = free ? Scalar(0) : std::sqrt(static_cast<Scalar>(width));
        }
    } else if (spec.multipliers.size() != J) {
        throw ConfigError("multipliers: expected " + std::to_string(J) + " values, got "
                          + std::to_string(spec.multipliers.size()));
    }
    validate(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Objective

template <typename Scalar>
struct Objective {
    Scalar value = Scalar(0);
    Scalar loss_part = Scalar(0);
    Scalar penalty_part = Scalar(0);
};

/// log(1 + exp(eta)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar eta)
{
    return eta > Scalar(0) ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

template <typename Scalar>
Scalar logistic(Scalar eta)
{
    if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-eta));
    const Scalar e = std::exp(eta);
    return e / (Scalar(1) + e);
}

/// Mean loss of a linear predictor: (1/2n)||y - eta||^2 or the mean logistic
/// negative log-likelihood.
template <typename Scalar>
Scalar loss_value(const Vector<Scalar>& y, const Vector<Scalar>& eta, LossKind loss)
{
    if (y.size() != eta.size()) throw ConfigError("loss_value: dimension mismatch");
    const auto n = static_cast<Scalar>(y.size());
    if (loss == LossKind::Linear) return (y - eta).squaredNorm() / (Scalar(2) * n);
    Scalar total = 0;
    for (Index i = 0; i < y.size(); ++i) total += softplus(eta(i)) - y(i) * eta(i);
    return total / n;
}

template <typename Scalar>
Scalar penalty_total(const OrthoDesign<Scalar>& design, const Vector<Scalar>& beta, Scalar lam,
                     const PenaltySpec<Scalar>& spec)
{
    Scalar total = 0;
    for (Index j = 0; j < design.J(); ++j) {
        const auto s = static_cast<std::size_t>(j);
        const Scalar norm = beta.segment(design.group_start[s], design.group_rank[s]).norm();
        total += loss_penalty_value(norm, group_lambda(lam, spec, j), spec);
    }
    return total;
}

template <typename Scalar>
Objective<Scalar> objective(const OrthoDesign<Scalar>& design, Scalar beta0, const Vector<Scalar>& beta, Scalar lam,
                            const PenaltySpec<Scalar>& spec)
{
    if (beta.size() != design.cols())
        throw ConfigError("objective: coefficient vector has " + std::to_string(beta.size()) + " entries, design has "
                          + std::to_string(design.cols()) + " columns");
    if (static_cast<Index>(spec.multipliers.size()) != design.J())
        throw ConfigError("objective: multipliers do not match group count");
    const Vector<Scalar> eta = (design.X * beta).array() + beta0;
    Objective<Scalar> out;
    out.loss_part = loss_value(design.y, eta, spec.loss);
    out.penalty_part = penalty_total(design, beta, lam, spec);
    out.value = out.loss_part + out.penalty_part;
    return out;
}

} // namespace grpdesc
