#pragma once

#include "melai/arena.hpp"
#include "melai/controller_archive.hpp"
#include "melai/morphogen.hpp"
#include "melai/neat.hpp"
#include "melai/nipes.hpp"
#include "melai/random.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace melai::experiment {

/// Sequential: individual i sees archive updates from individuals < i of the
/// same generation. Snapshot: every learner of a generation is seeded from
/// the archive as it stood at generation start, so learners may run on
/// several workers.
enum class ArchiveMode { Sequential, Snapshot };

std::string to_string(ArchiveMode mode);
ArchiveMode parse_archive_mode(const std::string& s);

struct RunConfig {
    std::string environment = "amphitheatre";
    /// Optional JSON layout; overrides the built-in of the same name.
    std::string environment_file;
    bool use_archive = true;
    long per_body_budget = 200;
    int generations = 20;
    long total_budget = 80000;
    std::uint64_t seed = 1;
    int replicate = 0;
    int hidden_size = 10;
    ArchiveMode archive_mode = ArchiveMode::Sequential;
    int workers = 1;
    bool learner_logs = true;

    neat::NeatParams neat;
    morph::MorphParams morph;
    arena::ArenaParams arena;
    nipes::NipesParams nipes;

    std::string variant() const { return use_archive ? "MELAI" : "MEL"; }
    arena::Environment load_environment() const;
    void validate() const;
};

/// (f* - f0) / N; 0 when N is 0.
double learning_delta(double f_star, double f0, long n);

struct IndividualRecord {
    int index = 0;
    morph::RobotType type;
    int num_casters = 0;
    bool degenerate = false;
    bool learned = false;
    bool seeded = false;
    double f0 = 0.0;
    double f_star = 0.0;
    long n_best = 0;
    long evaluations = 0;
    double learning_delta = 0.0;
    /// Archive value of the seed and the resulting compatibility.
    std::optional<double> f_c;
    std::optional<double> compatibility;
    std::string stop;
    std::string archive_update;
    int restarts = 0;
};

struct GenerationMetrics {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    double best_initial_tp = 0.0;
    double mean_initial_tp = 0.0;
    long evaluations = 0;
    double mean_learning_delta = 0.0;
    std::size_t archive_count = 0;
    std::optional<double> archive_mean_f;
    std::optional<double> archive_best_f;
    std::optional<double> mean_compatibility;
    std::optional<double> best_compatibility;
    int seeded = 0;
    int successes = 0;
    /// Some individual did not receive its full learning budget.
    bool truncated = false;
    long cumulative_evaluations = 0;
    std::vector<IndividualRecord> individuals;
};

struct GenerationResult {
    std::vector<double> fitnesses;
    GenerationMetrics metrics;
    std::vector<nipes::LearnOutcome> outcomes;
    std::optional<morph::BodyPlan> best_body;
    std::optional<control::ElmanController> best_controller;
};

/// Develops, learns and scores every genome; updates the archive when one
/// is given. `remaining_budget` caps the evaluations handed out. Does not
/// step the population.
GenerationResult evaluate_generation(const neat::NeatPopulation& pop, archive::ControllerArchive* archive,
                                     const RunConfig& config, const arena::Environment& env,
                                     long remaining_budget, Rng& rng);

/// evaluate_generation followed by NEAT selection and reproduction.
std::pair<neat::NeatPopulation, GenerationMetrics> run_generation(const neat::NeatPopulation& pop,
                                                                  archive::ControllerArchive* archive,
                                                                  const RunConfig& config,
                                                                  const arena::Environment& env,
                                                                  long remaining_budget, Rng& rng);

struct RunSummary {
    std::vector<GenerationMetrics> generations;
    archive::ControllerArchive archive;
    long total_evaluations = 0;
    /// Best body and controller of the run.
    std::optional<morph::BodyPlan> best_body;
    std::optional<control::ElmanController> best_controller;
    double best_fitness = 0.0;
};

/// Runs until the generation cap or the total budget is reached. Writes the
/// run directory when `out_dir` is non-empty; refuses an existing one.
RunSummary run_experiment(const RunConfig& config, const std::filesystem::path& out_dir = {});

void write_generations_csv(std::ostream& os, const std::vector<GenerationMetrics>& gens);
void write_individuals_csv(std::ostream& os, const std::vector<GenerationMetrics>& gens);

} // namespace melai::experiment
