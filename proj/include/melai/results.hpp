#pragma once

#include "melai/stats.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace melai::results {

/// Comma-separated file with a header row; cells kept as text.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

Table read_csv(const std::filesystem::path& path);

/// `dir` itself when it holds generations.csv, otherwise every descendant
/// run directory in sorted order.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& dir);

struct RunData {
    std::filesystem::path dir;
    Table generations;
    Table individuals;

    /// Highest generation not flagged as truncated, if any.
    std::optional<int> last_complete_generation() const;
    /// Metric value at a generation; nullopt when absent or NaN.
    std::optional<double> metric(const std::string& name, int generation) const;
};

RunData load_run(const std::filesystem::path& dir);
std::vector<RunData> load_runs(const std::filesystem::path& dir);

/// Latest generation complete in every run.
std::optional<int> common_final_generation(const std::vector<const RunData*>& runs);

struct Comparison {
    int generation = 0;
    std::vector<double> a;
    std::vector<double> b;
    stats::MannWhitneyResult test;
};

/// Mann-Whitney test of a generations.csv metric at the common final
/// generation (or `generation` when given).
Comparison compare_metric(const std::vector<RunData>& a, const std::vector<RunData>& b, const std::string& metric,
                          std::optional<int> generation = std::nullopt);

} // namespace melai::results
