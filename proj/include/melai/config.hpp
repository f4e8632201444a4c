#pragma once

#include "melai/experiment.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace melai::config {

/// INI sections: [run], [neat], [morphogen], [controller], [arena], [nipes]
/// and, for matrix runs, [matrix]. Unknown keys are rejected.
experiment::RunConfig read_config(std::istream& is);
experiment::RunConfig load_config(const std::string& path);
void write_config(std::ostream& os, const experiment::RunConfig& config);

struct BudgetSplit {
    long per_body_budget = 200;
    int generations = 20;
};

struct MatrixConfig {
    experiment::RunConfig base;
    std::vector<std::string> environments{"amphitheatre", "hard_race", "two_rooms"};
    std::vector<bool> variants{false, true};  // use_archive
    std::vector<BudgetSplit> splits{{100, 40}, {150, 30}, {200, 20}};
    int replicates = 10;
    std::uint64_t master_seed = 1;
};

MatrixConfig read_matrix_config(std::istream& is);
MatrixConfig load_matrix_config(const std::string& path);

struct MatrixEntry {
    experiment::RunConfig config;
    /// Relative run directory, e.g. hard_race/MELAI_200x20/rep_3.
    std::string name;
};

/// Cartesian product of environments, variants, splits and replicates. The
/// replicate seed depends on the master seed and the replicate index only,
/// so MEL and MELAI replicates share their initial population.
std::vector<MatrixEntry> expand_matrix(const MatrixConfig& matrix, int replicates);

std::uint64_t replicate_seed(std::uint64_t master_seed, int replicate);

} // namespace melai::config
