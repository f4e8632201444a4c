#include "melai/experiment.hpp"

#include "melai/config.hpp"
#include "melai/error.hpp"
#include "melai/plot.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace melai::experiment {

namespace fs = std::filesystem;

std::string to_string(ArchiveMode mode)
{
    return mode == ArchiveMode::Sequential ? "sequential" : "snapshot";
}

ArchiveMode parse_archive_mode(const std::string& s)
{
    if (s == "sequential")
        return ArchiveMode::Sequential;
    if (s == "snapshot")
        return ArchiveMode::Snapshot;
    throw ConfigError("run.archive_mode: expected 'sequential' or 'snapshot', got '" + s + "'");
}

arena::Environment RunConfig::load_environment() const
{
    if (!environment_file.empty())
        return arena::load_environment(environment_file);
    return arena::make_environment(environment);
}

void RunConfig::validate() const
{
    if (environment.empty() && environment_file.empty())
        throw ConfigError("run.environment: missing environment name");
    if (per_body_budget <= 0)
        throw ConfigError("run.per_body_budget must be positive");
    if (generations <= 0)
        throw ConfigError("run.generations must be positive");
    if (total_budget <= 0)
        throw ConfigError("run.total_budget must be positive");
    if (hidden_size < 1)
        throw ConfigError("controller.hidden_size must be at least 1");
    if (workers < 1)
        throw ConfigError("run.workers must be at least 1");
    if (workers > 1 && archive_mode == ArchiveMode::Sequential)
        throw ConfigError("run.workers > 1 requires archive_mode = snapshot");
    neat.validate();
    morph.validate();
    arena.validate();
    nipes.validate();
    load_environment();
}

double learning_delta(double f_star, double f0, long n)
{
    if (n <= 0)
        return 0.0;
    return (f_star - f0) / static_cast<double>(n);
}

namespace {

struct Job {
    std::optional<morph::BodyPlan> plan;
    std::optional<control::ElmanController> seed;
    std::optional<double> f_c;
    long budget = 0;
    std::uint64_t rng_seed = 0;
    bool skipped = false;
};

bool learnable(const Job& job)
{
    return job.plan && job.plan->type.num_actuators() > 0;
}

int count_casters(const morph::BodyPlan& plan)
{
    return static_cast<int>(std::count_if(plan.organs.begin(), plan.organs.end(), [](const morph::Organ& o) {
        return o.kind == morph::OrganKind::Caster;
    }));
}

nipes::BodyLearnResult run_job(const Job& job, const RunConfig& config, const arena::Environment& env)
{
    if (!learnable(job) || job.skipped) {
        nipes::BodyLearnResult r;
        double f = arena::task_performance(env.start.position(), env.beacon, env.diagonal());
        r.outcome.f_star = f;
        r.outcome.f0 = f;
        r.outcome.stop = nipes::StopReason::NoActuators;
        return r;
    }
    Rng rng(job.rng_seed);
    return nipes::learn(*job.plan, job.seed, job.budget, env, config.arena, config.nipes, config.hidden_size,
                        rng);
}

std::optional<morph::BodyPlan> try_develop(const neat::CppnGenome& genome, const morph::MorphParams& params)
{
    try {
        return morph::develop(genome, params);
    } catch (const DegenerateBodyError&) {
        return std::nullopt;
    }
}

} // namespace

GenerationResult evaluate_generation(const neat::NeatPopulation& pop, archive::ControllerArchive* archive,
                                     const RunConfig& config, const arena::Environment& env,
                                     long remaining_budget, Rng& rng)
{
    const std::size_t n = pop.genomes.size();
    archive::ControllerArchive* store = config.use_archive ? archive : nullptr;
    if (config.use_archive && archive == nullptr)
        throw Error("evaluate_generation: archive variant needs an archive");

    std::vector<Job> jobs(n);
    for (auto& job : jobs)
        job.rng_seed = rng();

    std::vector<nipes::BodyLearnResult> results(n);
    auto seed_from_archive = [&](Job& job) {
        if (store == nullptr || !learnable(job))
            return;
        job.seed = store->lookup(job.plan->type);
        if (job.seed) {
            if (job.seed->hidden_size() != static_cast<std::size_t>(config.hidden_size))
                job.seed.reset();
            else
                job.f_c = store->cell(job.plan->type)->task_performance;
        }
    };
    std::vector<std::optional<archive::UpdateResult>> updates(n);
    auto apply_update = [&](std::size_t i) {
        if (store != nullptr && results[i].best_controller)
            updates[i] = store->update(jobs[i].plan->type, *results[i].best_controller,
                                       results[i].outcome.f_star, pop.generation);
    };

    if (config.archive_mode == ArchiveMode::Sequential) {
        long remaining = remaining_budget;
        for (std::size_t i = 0; i < n; ++i) {
            Job& job = jobs[i];
            job.plan = try_develop(pop.genomes[i], config.morph);
            seed_from_archive(job);
            job.budget = std::min(config.per_body_budget, remaining);
            job.skipped = learnable(job) && job.budget <= 0;
            results[i] = run_job(job, config, env);
            remaining -= results[i].outcome.evaluations_used;
            apply_update(i);
        }
    } else {
        long remaining = remaining_budget;
        for (std::size_t i = 0; i < n; ++i) {
            Job& job = jobs[i];
            job.plan = try_develop(pop.genomes[i], config.morph);
            seed_from_archive(job);
            job.budget = std::min(config.per_body_budget, remaining);
            job.skipped = learnable(job) && job.budget <= 0;
            if (learnable(job))
                remaining -= std::max(0L, job.budget);
        }
        const auto workers = static_cast<std::size_t>(std::max(1, config.workers));
        if (workers == 1) {
            for (std::size_t i = 0; i < n; ++i)
                results[i] = run_job(jobs[i], config, env);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < std::min(workers, n); ++w)
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < n; i = next++)
                        results[i] = run_job(jobs[i], config, env);
                });
        }
        for (std::size_t i = 0; i < n; ++i)
            apply_update(i);
    }

    GenerationResult out;
    auto& m = out.metrics;
    m.generation = pop.generation;
    out.fitnesses.resize(n);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    double sum_fitness = 0.0;
    std::vector<double> initial;
    std::vector<double> deltas;
    std::vector<double> compat;
    for (std::size_t i = 0; i < n; ++i) {
        const Job& job = jobs[i];
        const auto& res = results[i];
        IndividualRecord rec;
        rec.index = static_cast<int>(i);
        rec.degenerate = !job.plan.has_value();
        if (job.plan) {
            rec.type = job.plan->type;
            rec.num_casters = count_casters(*job.plan);
        }
        rec.learned = res.best_controller.has_value();
        rec.seeded = rec.learned && job.seed.has_value();
        rec.f0 = res.outcome.f0;
        rec.f_star = res.outcome.f_star;
        rec.n_best = res.outcome.n_best;
        rec.evaluations = res.outcome.evaluations_used;
        rec.learning_delta = learning_delta(rec.f_star, rec.f0, rec.n_best);
        rec.stop = job.skipped ? "skipped" : std::string(nipes::to_string(res.outcome.stop));
        rec.restarts = res.outcome.restarts;
        if (updates[i])
            rec.archive_update = std::string(archive::to_string(*updates[i]));
        if (rec.seeded) {
            rec.f_c = job.f_c;
            rec.compatibility = archive::compatibility(*job.f_c, rec.f0);
            compat.push_back(*rec.compatibility);
            ++m.seeded;
        }
        if (rec.learned) {
            initial.push_back(rec.f0);
            deltas.push_back(rec.learning_delta);
        }
        if (job.skipped || (learnable(job) && job.budget < config.per_body_budget))
            m.truncated = true;
        if (rec.f_star >= config.nipes.success_threshold)
            ++m.successes;

        out.fitnesses[i] = rec.f_star;
        sum_fitness += rec.f_star;
        m.evaluations += rec.evaluations;
        if (rec.f_star > best) {
            best = rec.f_star;
            best_index = i;
        }
        m.individuals.push_back(std::move(rec));
    }
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    m.best_fitness = best;
    m.mean_fitness = sum_fitness / static_cast<double>(n);
    if (initial.empty())
        for (const auto& r : m.individuals)
            initial.push_back(r.f0);
    m.best_initial_tp = *std::max_element(initial.begin(), initial.end());
    m.mean_initial_tp = mean_of(initial);
    m.mean_learning_delta = mean_of(deltas);
    if (!compat.empty()) {
        m.mean_compatibility = mean_of(compat);
        m.best_compatibility = *std::max_element(compat.begin(), compat.end());
    }
    if (store != nullptr) {
        auto s = store->stats();
        m.archive_count = s.count;
        m.archive_mean_f = s.mean;
        m.archive_best_f = s.best;
    }

    out.best_body = jobs[best_index].plan;
    out.best_controller = results[best_index].best_controller;
    out.outcomes.reserve(n);
    for (auto& r : results)
        out.outcomes.push_back(std::move(r.outcome));
    return out;
}

std::pair<neat::NeatPopulation, GenerationMetrics> run_generation(const neat::NeatPopulation& pop,
                                                                  archive::ControllerArchive* archive,
                                                                  const RunConfig& config,
                                                                  const arena::Environment& env,
                                                                  long remaining_budget, Rng& rng)
{
    GenerationResult res = evaluate_generation(pop, archive, config, env, remaining_budget, rng);
    neat::NeatPopulation next = neat::next_generation(pop, res.fitnesses, config.neat, rng);
    return {std::move(next), std::move(res.metrics)};
}

namespace {

template <class F>
void write_file(const fs::path& path, F&& body)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write '" + path.string() + "'");
    body(out);
    if (!out)
        throw Error("failed writing '" + path.string() + "'");
}

void write_optional(std::ostream& os, const std::optional<double>& v)
{
    if (v)
        os << *v;
    else
        os << "nan";
}

void write_run_plots(const fs::path& dir, const std::vector<GenerationMetrics>& gens, const std::string& label)
{
    struct Figure {
        const char* file;
        const char* title;
        double (*get)(const GenerationMetrics&);
    };
    const Figure figures[] = {
        {"best_fitness.svg", "Best fitness", [](const GenerationMetrics& g) { return g.best_fitness; }},
        {"initial_tp.svg", "Best initial task-performance",
         [](const GenerationMetrics& g) { return g.best_initial_tp; }},
        {"evaluations.svg", "Evaluations per generation",
         [](const GenerationMetrics& g) { return static_cast<double>(g.evaluations); }},
        {"learning_delta.svg", "Mean learning delta",
         [](const GenerationMetrics& g) { return g.mean_learning_delta; }},
        {"archive_count.svg", "Controllers in archive",
         [](const GenerationMetrics& g) { return static_cast<double>(g.archive_count); }},
    };
    for (const auto& f : figures) {
        plot::Series s;
        s.name = label;
        for (const auto& g : gens) {
            double v = f.get(g);
            s.x.push_back(g.generation);
            s.median.push_back(v);
            s.lower.push_back(v);
            s.upper.push_back(v);
        }
        write_file(dir / f.file, [&](std::ostream& os) {
            plot::write_line_chart(os, f.title, "generation", f.title, {s});
        });
    }
}

} // namespace

RunSummary run_experiment(const RunConfig& config, const fs::path& out_dir)
{
    config.validate();
    const arena::Environment env = config.load_environment();
    const bool write = !out_dir.empty();
    if (write) {
        if (fs::exists(out_dir))
            throw Error("run directory '" + out_dir.string() + "' already exists");
        fs::create_directories(out_dir / "learners");
        fs::create_directories(out_dir / "plots");
        fs::create_directories(out_dir / "best");
        if (config.use_archive)
            fs::create_directories(out_dir / "archive");
        write_file(out_dir / "config.ini", [&](std::ostream& os) { config::write_config(os, config); });
        write_file(out_dir / "environment.json", [&](std::ostream& os) { arena::write_environment(os, env); });
    }

    Rng rng = derive_rng(config.seed, {static_cast<std::uint64_t>(config.replicate)});
    neat::NeatPopulation pop = neat::NeatPopulation::initial(config.neat, rng);
    RunSummary summary;
    summary.best_fitness = -std::numeric_limits<double>::infinity();

    for (int g = 0; g < config.generations && summary.total_evaluations < config.total_budget; ++g) {
        GenerationResult res = evaluate_generation(pop, &summary.archive, config, env,
                                                   config.total_budget - summary.total_evaluations, rng);
        summary.total_evaluations += res.metrics.evaluations;
        res.metrics.cumulative_evaluations = summary.total_evaluations;
        if (res.metrics.best_fitness > summary.best_fitness && res.best_body) {
            summary.best_fitness = res.metrics.best_fitness;
            summary.best_body = res.best_body;
            summary.best_controller = res.best_controller;
        }
        if (write) {
            if (config.learner_logs)
                for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
                    if (res.outcomes[i].log.empty())
                        continue;
                    auto name = "gen_" + std::to_string(g) + "_ind_" + std::to_string(i) + ".csv";
                    write_file(out_dir / "learners" / name,
                               [&](std::ostream& os) { nipes::write_learner_log(os, res.outcomes[i].log); });
                }
            if (config.use_archive)
                write_file(out_dir / "archive" / ("gen_" + std::to_string(g) + ".ckpt"),
                           [&](std::ostream& os) { archive::write_archive(os, summary.archive); });
        }
        const bool last = g + 1 == config.generations || summary.total_evaluations >= config.total_budget;
        if (!last)
            pop = neat::next_generation(pop, res.fitnesses, config.neat, rng);
        summary.generations.push_back(std::move(res.metrics));
    }

    if (write) {
        write_file(out_dir / "generations.csv",
                   [&](std::ostream& os) { write_generations_csv(os, summary.generations); });
        write_file(out_dir / "individuals.csv",
                   [&](std::ostream& os) { write_individuals_csv(os, summary.generations); });
        write_run_plots(out_dir / "plots", summary.generations, config.variant());
        if (summary.best_body) {
            write_file(out_dir / "best" / "body.txt",
                       [&](std::ostream& os) { morph::write_body_plan(os, *summary.best_body); });
            write_file(out_dir / "best" / "body.svg",
                       [&](std::ostream& os) { morph::write_body_svg(os, *summary.best_body); });
        }
        if (summary.best_body && summary.best_controller) {
            control::ElmanController ctrl = *summary.best_controller;
            write_file(out_dir / "best" / "controller.txt",
                       [&](std::ostream& os) { control::write_controller(os, ctrl); });
            arena::RolloutResult roll = arena::evaluate(*summary.best_body, ctrl, env, config.arena, true);
            write_file(out_dir / "best" / "trajectory.csv",
                       [&](std::ostream& os) { arena::write_trajectory_csv(os, roll); });
            std::vector<arena::RolloutResult> rolls{roll};
            write_file(out_dir / "best" / "arena.svg",
                       [&](std::ostream& os) { arena::write_arena_svg(os, env, rolls); });
        }
    }
    return summary;
}

void write_generations_csv(std::ostream& os, const std::vector<GenerationMetrics>& gens)
{
    std::ostringstream out;
    out << std::setprecision(12);
    out << "generation,best_fitness,mean_fitness,best_initial_tp,mean_initial_tp,evaluations,"
           "mean_learning_delta,archive_count,archive_mean_f,archive_best_f,mean_compatibility,"
           "best_compatibility,seeded,successes,truncated,cumulative_evaluations\n";
    for (const auto& g : gens) {
        out << g.generation << ',' << g.best_fitness << ',' << g.mean_fitness << ',' << g.best_initial_tp << ','
            << g.mean_initial_tp << ',' << g.evaluations << ',' << g.mean_learning_delta << ','
            << g.archive_count << ',';
        write_optional(out, g.archive_mean_f);
        out << ',';
        write_optional(out, g.archive_best_f);
        out << ',';
        write_optional(out, g.mean_compatibility);
        out << ',';
        write_optional(out, g.best_compatibility);
        out << ',' << g.seeded << ',' << g.successes << ',' << (g.truncated ? 1 : 0) << ','
            << g.cumulative_evaluations << '\n';
    }
    os << out.str();
}

void write_individuals_csv(std::ostream& os, const std::vector<GenerationMetrics>& gens)
{
    std::ostringstream out;
    out << std::setprecision(12);
    out << "generation,index,num_sensors,num_wheels,num_joints,num_casters,degenerate,learned,seeded,f0,"
           "f_star,n_best,evaluations,learning_delta,f_c,compatibility,stop,archive_update,restarts\n";
    for (const auto& g : gens)
        for (const auto& r : g.individuals) {
            out << g.generation << ',' << r.index << ',' << r.type.num_sensors << ',' << r.type.num_wheels << ','
                << r.type.num_joints << ',' << r.num_casters << ',' << (r.degenerate ? 1 : 0) << ','
                << (r.learned ? 1 : 0) << ',' << (r.seeded ? 1 : 0) << ',' << r.f0 << ',' << r.f_star << ','
                << r.n_best << ',' << r.evaluations << ',' << r.learning_delta << ',';
            write_optional(out, r.f_c);
            out << ',';
            write_optional(out, r.compatibility);
            out << ',' << r.stop << ',' << r.archive_update << ',' << r.restarts << '\n';
        }
    os << out.str();
}

} // namespace melai::experiment
