#pragma once

#include <grpdesc/types.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace grpdesc::selfcheck {

/// Small random problem: n rows, two or more groups of 1..max_group_size
/// standard-normal columns, response from a sparse truth.
GroupedDesign<double> random_instance(std::mt19937_64& rng, int n, int groups, int max_group_size, LossKind loss);

struct CaseResult {
    std::string name;
    double solver_value = 0;
    double reference_value = 0;
    double discrepancy = 0;    // relative gap, or most negative directional change
    double tolerance = 0;
    bool passed = false;
};

/// Solver against oracle on `instances` seeded problems per check:
/// convex objective agreement (linear, logistic) and nonconvex stationarity.
std::vector<CaseResult> run(int instances, std::uint64_t seed);

} // namespace grpdesc::selfcheck
