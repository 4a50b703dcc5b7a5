#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace grpdesc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

// Error categories map one-to-one onto CLI exit codes (1, 2, 3).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PenaltyFamily { GroupLasso, GroupMCP, GroupSCAD };
enum class LossKind { Linear, Logistic };

inline const char* to_string(PenaltyFamily f)
{
    switch (f) {
    case PenaltyFamily::GroupLasso: return "grlasso";
    case PenaltyFamily::GroupMCP: return "grmcp";
    case PenaltyFamily::GroupSCAD: return "grscad";
    }
    return "?";
}

inline const char* to_string(LossKind l)
{
    return l == LossKind::Linear ? "linear" : "logistic";
}

inline PenaltyFamily parse_family(const std::string& s)
{
    if (s == "grlasso") return PenaltyFamily::GroupLasso;
    if (s == "grmcp") return PenaltyFamily::GroupMCP;
    if (s == "grscad") return PenaltyFamily::GroupSCAD;
    throw ConfigError("family: unknown penalty family '" + s + "'");
}

inline LossKind parse_loss(const std::string& s)
{
    if (s == "linear" || s == "gaussian") return LossKind::Linear;
    if (s == "logistic" || s == "binomial") return LossKind::Logistic;
    throw ConfigError("loss: unknown loss '" + s + "'");
}

/// Response plus a column-grouped design. Columns need not be contiguous by
/// group; `group_of[k]` is the 0-based group id of column k.
template <typename Scalar>
struct GroupedDesign {
    Vector<Scalar> y;
    Matrix<Scalar> X;
    std::vector<int> group_of;
    std::vector<std::string> group_labels;
    std::vector<std::string> column_names;
    // Groups excluded from penalization (multiplier 0 by default).
    std::vector<bool> unpenalized;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
    Index J() const { return static_cast<Index>(group_labels.size()); }

    std::vector<Index> group_sizes() const
    {
        std::vector<Index> sizes(group_labels.size(), 0);
        for (int g : group_of) ++sizes[static_cast<std::size_t>(g)];
        return sizes;
    }

    std::vector<std::vector<Index>> group_columns() const
    {
        std::vector<std::vector<Index>> cols(group_labels.size());
        for (std::size_t k = 0; k < group_of.size(); ++k)
            cols[static_cast<std::size_t>(group_of[k])].push_back(static_cast<Index>(k));
        return cols;
    }

    /// Throws DataError if the shape or group map is inconsistent.
    void validate() const
    {
        if (X.rows() != y.size())
            throw DataError("design has " + std::to_string(X.rows()) + " rows but response has "
                            + std::to_string(y.size()));
        if (X.rows() == 0 || X.cols() == 0) throw DataError("design is empty");
        if (static_cast<Index>(group_of.size()) != X.cols())
            throw DataError("group map length does not match number of columns");
        if (group_labels.empty()) throw DataError("no groups defined");
        std::vector<int> count(group_labels.size(), 0);
        for (int g : group_of) {
            if (g < 0 || g >= static_cast<int>(group_labels.size()))
                throw DataError("column assigned to undefined group id " + std::to_string(g));
            ++count[static_cast<std::size_t>(g)];
        }
        for (std::size_t j = 0; j < count.size(); ++j)
            if (count[j] == 0) throw DataError("group '" + group_labels[j] + "' has no columns");
        if (!unpenalized.empty() && unpenalized.size() != group_labels.size())
            throw DataError("unpenalized flags length does not match number of groups");
        if (!X.allFinite() || !y.allFinite()) throw DataError("design or response contains non-finite values");
    }

    bool is_unpenalized(Index j) const
    {
        return !unpenalized.empty() && unpenalized[static_cast<std::size_t>(j)];
    }
};

} // namespace grpdesc
