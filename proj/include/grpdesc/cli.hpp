#pragma once

#include <grpdesc/types.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace grpdesc::cli {

enum class Command { Fit, CV, Predict, Simulate, Selfcheck };

struct RunConfig {
    Command command = Command::Fit;

    std::string data;
    std::string groups;
    std::string response = "y";
    std::string model;   // predict

    std::string loss = "linear";
    std::string family = "grlasso";
    std::optional<double> gamma;
    int n_lambda = 100;
    std::optional<double> min_ratio;
    double tol = 1e-6;
    int max_iter = 10000;

    int folds = 5;
    std::uint64_t seed = 1;
    std::optional<std::string> metric;

    std::string out = "grpdesc-out";
    bool plots = false;
    int threads = 0;   // 0: all processors

    // predict
    std::optional<double> lambda;
    std::optional<long> index;

    // simulate
    std::string kind = "basic";
    std::optional<double> beta;
    int replicates = 100;
    std::optional<int> n;
    std::optional<int> J;

    // selfcheck
    int instances = 20;

    /// Rejects invalid combinations; the message names the offending flag.
    void validate() const;
    int resolved_threads() const;
};

/// Executes a validated configuration, writing artifacts below `out` and a
/// short report to `report`. Errors propagate as ConfigError, DataError or
/// NumericalError.
void run(const RunConfig& config, std::ostream& report);

int exit_code_for(const std::exception& e);

/// Parses argv, runs, and maps failures to exit codes 1 (usage), 2 (data),
/// 3 (numerical) with a single line on `err`.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace grpdesc::cli
