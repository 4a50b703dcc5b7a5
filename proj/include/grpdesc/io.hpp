#pragma once

#include <grpdesc/cv.hpp>
#include <grpdesc/path.hpp>
#include <grpdesc/sim.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace grpdesc::io {

inline constexpr int artifact_format_version = 1;

/// Reads a delimited data file (header row; comma or tab separated) and a
/// group map with one `column group` pair per line. Columns are reordered so
/// that groups are contiguous, in order of first appearance. A group named
/// "0" or "unpenalized" is excluded from penalization.
GroupedDesign<double> load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& groups_path,
                                   const std::string& response_column);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Parses a delimited numeric table; every cell must be a finite number.
Table read_table(const std::filesystem::path& path);

/// Pulls the named columns out of `table`, in the given order.
Matrix<double> select_columns(const Table& table, const std::vector<std::string>& names,
                              const std::filesystem::path& origin);

struct PathArtifact {
    FitPath<double> path;
    std::string software_version;
    std::string input_digest;
};

std::string serialize(const PathArtifact& artifact);
PathArtifact parse_artifact(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

std::string sha256_hex(const std::string& bytes);

std::string coefficient_table(const FitPath<double>& path);
std::string path_summary_table(const FitPath<double>& path);
std::string cv_table(const CVResult<double>& cv);
std::string fold_table(const CVResult<double>& cv);
std::string simulation_summary_table(const sim::SimulationResult& result);
std::string simulation_replicate_table(const sim::SimulationResult& result);

/// Coefficient paths against log(lambda), one line per coefficient coloured by group.
std::string coefficient_path_svg(const FitPath<double>& path);
/// Cross-validation error with one standard error bars; the selected lambda is marked.
std::string cv_curve_svg(const CVResult<double>& cv);

} // namespace grpdesc::io
