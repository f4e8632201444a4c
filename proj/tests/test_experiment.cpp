#include "melai/config.hpp"
#include "melai/error.hpp"
#include "melai/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace melai;
using namespace melai::experiment;
namespace fs = std::filesystem;

namespace {

RunConfig small(bool use_archive)
{
    RunConfig c;
    c.environment = "hard_race";
    c.use_archive = use_archive;
    c.per_body_budget = 30;
    c.generations = 2;
    c.total_budget = 2000;
    c.seed = 3;
    c.hidden_size = 4;
    c.neat.population_size = 6;
    c.learner_logs = false;
    return c;
}

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("melai_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Experiment, LearningDelta)
{
    EXPECT_EQ(learning_delta(0.4, 0.4, 120), 0.0);
    EXPECT_NEAR(learning_delta(0.95, 0.35, 200), 0.003, 1e-15);
    EXPECT_EQ(learning_delta(0.5, 0.5, 0), 0.0);
}

TEST(Experiment, MelNeverTouchesTheArchive)
{
    RunConfig cfg = small(false);
    auto env = cfg.load_environment();
    Rng rng(1);
    auto pop = neat::NeatPopulation::initial(cfg.neat, rng);
    archive::ControllerArchive ar;
    auto res = evaluate_generation(pop, &ar, cfg, env, cfg.total_budget, rng);
    EXPECT_EQ(ar.lookup_count(), 0u);
    EXPECT_TRUE(ar.empty());
    EXPECT_FALSE(res.metrics.mean_compatibility);
    for (const auto& ind : res.metrics.individuals) {
        EXPECT_FALSE(ind.seeded);
        EXPECT_FALSE(ind.compatibility);
    }
}

TEST(Experiment, SnapshotGenerationZeroMatchesMel)
{
    RunConfig mel = small(false);
    RunConfig melai = small(true);
    mel.archive_mode = melai.archive_mode = ArchiveMode::Snapshot;
    auto env = mel.load_environment();
    auto gen0 = [&](const RunConfig& cfg) {
        Rng rng(9);
        auto pop = neat::NeatPopulation::initial(cfg.neat, rng);
        archive::ControllerArchive ar;
        return evaluate_generation(pop, &ar, cfg, env, cfg.total_budget, rng).fitnesses;
    };
    EXPECT_EQ(gen0(mel), gen0(melai));
}

TEST(Experiment, SnapshotWorkersAgreeWithOneWorker)
{
    RunConfig one = small(true);
    one.archive_mode = ArchiveMode::Snapshot;
    RunConfig many = one;
    many.workers = 3;
    auto a = run_experiment(one);
    auto b = run_experiment(many);
    std::ostringstream ca, cb;
    write_generations_csv(ca, a.generations);
    write_generations_csv(cb, b.generations);
    EXPECT_EQ(ca.str(), cb.str());
}

TEST(Experiment, BudgetsAndDegenerateBodies)
{
    RunConfig cfg = small(true);
    auto env = cfg.load_environment();
    Rng rng(2);
    auto pop = neat::NeatPopulation::initial(cfg.neat, rng);
    archive::ControllerArchive ar;
    auto res = evaluate_generation(pop, &ar, cfg, env, cfg.total_budget, rng);
    ASSERT_EQ(res.fitnesses.size(), cfg.neat.population_size);
    long total = 0;
    for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
        const auto& ind = res.metrics.individuals[i];
        const auto& out = res.outcomes[i];
        total += ind.evaluations;
        EXPECT_EQ(res.fitnesses[i], ind.f_star);
        if (!ind.learned) {
            EXPECT_EQ(ind.evaluations, 0);
            EXPECT_EQ(ind.f_star, ind.f0);
            continue;
        }
        if (out.stop == nipes::StopReason::Budget) {
            EXPECT_GE(ind.evaluations, cfg.per_body_budget);
            EXPECT_LT(ind.evaluations, cfg.per_body_budget + out.log.back().lambda);
        }
    }
    EXPECT_EQ(total, res.metrics.evaluations);
    EXPECT_FALSE(res.metrics.truncated);
}

TEST(Experiment, ExhaustedBudgetTruncates)
{
    RunConfig cfg = small(false);
    auto env = cfg.load_environment();
    Rng rng(4);
    auto pop = neat::NeatPopulation::initial(cfg.neat, rng);
    auto res = evaluate_generation(pop, nullptr, cfg, env, 40, rng);
    int learnable = 0;
    for (const auto& ind : res.metrics.individuals)
        learnable += ind.type.num_actuators() > 0;
    if (learnable > 1)
        EXPECT_TRUE(res.metrics.truncated);
    EXPECT_LE(res.metrics.evaluations, 40 + 10);
}

TEST(Experiment, RunDirectoryContents)
{
    RunConfig cfg = small(true);
    cfg.learner_logs = true;
    fs::path dir = scratch("rundir");
    auto summary = run_experiment(cfg, dir);
    for (const char* f : {"config.ini", "environment.json", "generations.csv", "individuals.csv",
                          "best/body.txt", "best/body.svg", "best/controller.txt", "best/trajectory.csv",
                          "best/arena.svg", "archive/gen_0.ckpt"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_TRUE(fs::exists(dir / "learners"));
    EXPECT_TRUE(fs::exists(dir / "plots"));
    EXPECT_EQ(summary.generations.size(), 2u);
    EXPECT_EQ(summary.generations.back().cumulative_evaluations, summary.total_evaluations);

    // The written config reproduces the run.
    RunConfig again = config::load_config((dir / "config.ini").string());
    fs::path dir2 = scratch("rundir2");
    run_experiment(again, dir2);
    EXPECT_EQ(slurp(dir / "generations.csv"), slurp(dir2 / "generations.csv"));
    EXPECT_EQ(slurp(dir / "individuals.csv"), slurp(dir2 / "individuals.csv"));
    EXPECT_EQ(slurp(dir / "archive/gen_1.ckpt"), slurp(dir2 / "archive/gen_1.ckpt"));

    EXPECT_THROW(run_experiment(cfg, dir), Error);
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST(Experiment, ArchiveGrowsAcrossGenerations)
{
    RunConfig cfg = small(true);
    cfg.generations = 3;
    auto s = run_experiment(cfg);
    for (std::size_t g = 1; g < s.generations.size(); ++g)
        EXPECT_GE(s.generations[g].archive_count, s.generations[g - 1].archive_count);
    EXPECT_EQ(s.archive.size(), s.generations.back().archive_count);
}

TEST(Experiment, InvalidConfigRejected)
{
    RunConfig cfg = small(true);
    cfg.environment.clear();
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small(true);
    cfg.workers = 2;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small(true);
    cfg.environment = "nowhere";
    EXPECT_THROW(cfg.validate(), Error);
}
