// melai: run, matrix, compare and plot subcommands.

#include "melai/config.hpp"
#include "melai/error.hpp"
#include "melai/experiment.hpp"
#include "melai/plot.hpp"
#include "melai/results.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using namespace melai;

namespace {

void print_summary(const experiment::RunConfig& cfg, const experiment::RunSummary& s, double seconds)
{
    std::cout << cfg.variant() << " on " << cfg.environment << ": " << s.generations.size() << " generations, "
              << s.total_evaluations << " evaluations, best fitness " << std::setprecision(4) << s.best_fitness
              << ", archive cells " << s.archive.size() << " (" << std::setprecision(3) << seconds << " s)\n";
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::string out)
{
    experiment::RunConfig cfg = config::load_config(config_path);
    if (seed)
        cfg.seed = *seed;
    if (out.empty())
        out = "runs/" + cfg.environment + "_" + cfg.variant() + "_seed" + std::to_string(cfg.seed);
    auto t0 = std::chrono::steady_clock::now();
    auto summary = experiment::run_experiment(cfg, out);
    print_summary(cfg, summary, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_matrix(const std::string& config_path, int replicates, const std::string& out, int jobs)
{
    config::MatrixConfig matrix = config::load_matrix_config(config_path);
    if (replicates <= 0)
        replicates = matrix.replicates;
    auto entries = config::expand_matrix(matrix, replicates);
    std::atomic<std::size_t> next{0};
    std::mutex io;
    int failures = 0;
    auto worker = [&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) {
            const auto& e = entries[i];
            fs::path dir = fs::path(out) / e.name;
            if (fs::exists(dir)) {
                std::lock_guard lock(io);
                std::cout << "skip " << dir.string() << " (exists)\n";
                continue;
            }
            try {
                auto t0 = std::chrono::steady_clock::now();
                auto s = experiment::run_experiment(e.config, dir);
                double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::lock_guard lock(io);
                std::cout << e.name << ": ";
                print_summary(e.config, s, secs);
            } catch (const std::exception& ex) {
                std::lock_guard lock(io);
                std::cerr << e.name << ": " << ex.what() << '\n';
                ++failures;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int j = 0; j < std::max(1, jobs); ++j)
            pool.emplace_back(worker);
    }
    return failures == 0 ? 0 : 1;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& metric, std::optional<int> generation)
{
    auto runs_a = results::load_runs(a);
    auto runs_b = results::load_runs(b);
    if (runs_a.empty() || runs_b.empty())
        throw Error("compare: no runs found under '" + (runs_a.empty() ? a : b) + "'");
    if (runs_a.size() != runs_b.size())
        std::cerr << "warning: replicate counts differ (" << runs_a.size() << " vs " << runs_b.size() << ")\n";
    auto c = results::compare_metric(runs_a, runs_b, metric, generation);
    std::cout << std::setprecision(6);
    std::cout << "metric      " << metric << '\n'
              << "generation  " << c.generation << '\n'
              << "n           " << c.a.size() << " vs " << c.b.size() << '\n'
              << "median A    " << c.test.median_a << '\n'
              << "median B    " << c.test.median_b << '\n'
              << "U           " << c.test.u1 << '\n'
              << "p           " << c.test.p << (c.test.exact ? " (exact)" : " (normal approximation)") << '\n';
    return 0;
}

double generation_metric(const results::RunData& r, std::size_t row, const std::string& metric)
{
    return r.generations.number(row, metric);
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& figure, std::string out)
{
    if (dirs.empty())
        throw Error("plot: no run directories given");
    static const std::map<std::string, std::pair<std::string, std::string>> curves{
        {"fitness", {"best_fitness", "Best fitness"}},
        {"initial_tp", {"best_initial_tp", "Best initial task-performance"}},
        {"mean_initial_tp", {"mean_initial_tp", "Mean initial task-performance"}},
        {"evaluations", {"evaluations", "Evaluations per generation"}},
        {"learning_delta", {"mean_learning_delta", "Mean learning delta"}},
        {"archive_count", {"archive_count", "Controllers in archive"}},
        {"archive_f", {"archive_mean_f", "Mean archive task-performance"}},
        {"compatibility", {"mean_compatibility", "Mean compatibility"}},
    };
    if (out.empty())
        out = figure + ".svg";

    std::vector<std::vector<results::RunData>> groups;
    for (const auto& d : dirs) {
        groups.push_back(results::load_runs(d));
        if (groups.back().empty())
            throw Error("plot: no runs found under '" + d + "'");
    }

    std::ofstream os(out);
    if (!os)
        throw Error("cannot write '" + out + "'");

    if (figure == "organs") {
        // Mean organ counts of robots above the success threshold.
        const std::vector<std::string> kinds{"num_sensors", "num_wheels", "num_joints", "num_casters"};
        std::vector<plot::Bars> bars;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            plot::Bars b;
            b.name = fs::path(dirs[gi]).filename().string();
            std::vector<double> sums(kinds.size(), 0.0);
            std::size_t successes = 0;
            for (const auto& run : groups[gi])
                for (std::size_t r = 0; r < run.individuals.rows.size(); ++r) {
                    if (!(run.individuals.number(r, "f_star") > 0.95))
                        continue;
                    ++successes;
                    for (std::size_t k = 0; k < kinds.size(); ++k)
                        sums[k] += run.individuals.number(r, kinds[k]);
                }
            for (double s : sums)
                b.values.push_back(successes ? s / static_cast<double>(successes) : 0.0);
            b.name += " (n=" + std::to_string(successes) + ")";
            bars.push_back(std::move(b));
        }
        plot::write_bar_chart(os, "Organs of successful robots", {"sensors", "wheels", "joints", "casters"},
                              bars);
    } else {
        auto it = curves.find(figure);
        if (it == curves.end())
            throw Error("plot: unknown figure '" + figure + "'");
        const auto& [metric, title] = it->second;
        std::vector<plot::Series> series;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            std::map<int, std::vector<double>> by_gen;
            for (const auto& run : groups[gi])
                for (std::size_t r = 0; r < run.generations.rows.size(); ++r) {
                    double v = generation_metric(run, r, metric);
                    if (!std::isnan(v))
                        by_gen[static_cast<int>(run.generations.number(r, "generation"))].push_back(v);
                }
            std::vector<double> x;
            std::vector<std::vector<double>> samples;
            for (auto& [g, vals] : by_gen) {
                x.push_back(g);
                samples.push_back(std::move(vals));
            }
            series.push_back(plot::quartile_series(fs::path(dirs[gi]).filename().string(), x, samples));
        }
        plot::write_line_chart(os, title, "generation", title, series);
    }
    std::cout << "wrote " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Morpho-evolution with learning and a controller archive"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", config_path, "INI configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override run.seed");
    run->add_option("--out", out, "Run directory (must not exist)");

    int replicates = 0;
    int jobs = 1;
    std::string matrix_out = "runs";
    auto* matrix = app.add_subcommand("matrix", "Run every environment x variant x split x replicate");
    matrix->add_option("--config", config_path, "INI configuration with a [matrix] section")
        ->required()
        ->check(CLI::ExistingFile);
    matrix->add_option("--replicates", replicates, "Replicates per cell (default: matrix.replicates)");
    matrix->add_option("--out", matrix_out, "Output root");
    matrix->add_option("--jobs", jobs, "Runs executed concurrently");

    std::string dir_a;
    std::string dir_b;
    std::string metric = "best_fitness";
    std::optional<int> generation;
    auto* compare = app.add_subcommand("compare", "Mann-Whitney U test between two groups of runs");
    compare->add_option("A", dir_a, "Run directory or directory of replicates")->required();
    compare->add_option("B", dir_b, "Run directory or directory of replicates")->required();
    compare->add_option("--metric", metric, "Column of generations.csv");
    compare->add_option("--generation", generation, "Generation to compare (default: common final)");

    std::vector<std::string> plot_dirs;
    std::string figure = "fitness";
    std::string plot_out;
    auto* plot_cmd = app.add_subcommand("plot", "Median and quartile curves, or organ histograms");
    plot_cmd->add_option("DIR", plot_dirs, "One group of runs per directory")->required();
    plot_cmd->add_option("--figure", figure,
                         "fitness|initial_tp|mean_initial_tp|evaluations|learning_delta|archive_count|"
                         "archive_f|compatibility|organs");
    plot_cmd->add_option("--out", plot_out, "SVG path (default: FIGURE.svg)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(config_path, seed, out);
        if (*matrix)
            return cmd_matrix(config_path, replicates, matrix_out, jobs);
        if (*compare)
            return cmd_compare(dir_a, dir_b, metric, generation);
        if (*plot_cmd)
            return cmd_plot(plot_dirs, figure, plot_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
