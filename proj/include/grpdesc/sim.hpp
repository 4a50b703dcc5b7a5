#pragma once

#include <grpdesc/cv.hpp>
#include <grpdesc/types.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace grpdesc::sim {

enum class ScenarioKind { Basic, Semiparametric, SNP };

const char* to_string(ScenarioKind k);
ScenarioKind parse_kind(const std::string& s);

enum class SnpEffect { Dominant, Recessive, Additive };

struct Scenario {
    ScenarioKind kind = ScenarioKind::Basic;
    int n = 100;
    int J = 100;     // groups (Basic), continuous variables, or SNPs
    int K = 4;       // group width for Basic; fixed at 6 (splines) / 2 (SNP)
    double effect = 1.0;        // |beta| for Basic
    int signal_groups = 5;      // Basic
    std::uint64_t seed = 1;

    // SNP design
    double maf = 0.3;
    // Variance of the mean contributed by each causal SNP.
    double snp_effect_variance = 0.1;
    std::vector<int> causal_snps{0, 1, 2};
    std::vector<SnpEffect> causal_effects{SnpEffect::Dominant, SnpEffect::Recessive, SnpEffect::Additive};

    static Scenario defaults(ScenarioKind kind);
    void validate() const;
};

struct SimData {
    GroupedDesign<double> design;
    std::optional<Vector<double>> true_coefficients;   // Basic only
    Vector<double> true_mean;
    std::vector<bool> causal_group;                     // truly nonzero groups
};

SimData generate(const Scenario& scenario);

/// Nonlinear effects used by the semiparametric scenario, k in 1..6.
double semiparametric_effect(int k, double x);

/// Cubic B-spline basis without the intercept column: 3 interior knots at the
/// sample quartiles, boundary knots at the sample range, 6 columns.
Matrix<double> bspline_basis(const Vector<double>& x);

/// Mean phenotype shift for a genotype (0, 1, 2 minor alleles).
double snp_mean_shift(SnpEffect effect, int genotype, double size);

struct Score {
    double rmse = 0;            // NaN when the truth has no coefficient vector
    double rme = 0;
    Index model_size_groups = 0;
    Index true_discoveries = 0;
    Index false_discoveries = 0;
};

/// Accuracy of a fitted model (original-scale intercept and coefficients)
/// against the generating truth.
Score score(const SimData& data, double intercept, const Vector<double>& coefficients);

/// Root-mean-squared coefficient error of the oracle least-squares fit:
/// sqrt(s / n) with s the fraction of nonzero coefficients.
double oracle_rmse(const Scenario& scenario);

struct MethodSummary {
    PenaltyFamily family;
    int replicates = 0;
    double rmse_mean = 0, rmse_se = 0;
    double rme_mean = 0, rme_se = 0;
    double groups_mean = 0, groups_se = 0;
    double true_disc_mean = 0, false_disc_mean = 0;
    double lambda_mean = 0;
};

struct ReplicateRecord {
    int replicate = 0;
    PenaltyFamily family;
    double lambda = 0;
    Score score;
};

struct SimulationResult {
    Scenario scenario;
    std::vector<MethodSummary> methods;
    std::vector<ReplicateRecord> records;   // ordered by (replicate, method)
};

struct SimControl {
    int replicates = 100;
    std::vector<PenaltyFamily> families{PenaltyFamily::GroupLasso, PenaltyFamily::GroupMCP, PenaltyFamily::GroupSCAD};
    std::optional<double> gamma;   // default 3 for MCP, 4 for SCAD
    int folds = 5;
    int threads = 1;
    PathControl path;
};

/// Generates replicates, selects lambda by cross-validation for each method,
/// and scores the selected fit. Replicate r uses a seed derived from
/// (scenario.seed, r); every method sees the same data and folds.
SimulationResult run_simulation(const Scenario& scenario, const SimControl& control);

} // namespace grpdesc::sim
