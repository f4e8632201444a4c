// Acceptance checks: one PASS/FAIL line per criterion. Criterion 6 runs the
// scaled MEL-vs-MELAI study and takes tens of minutes; select it with
// --criteria 6.

#include "melai/arena.hpp"
#include "melai/config.hpp"
#include "melai/controller_archive.hpp"
#include "melai/experiment.hpp"
#include "melai/nipes.hpp"
#include "melai/random.hpp"
#include "melai/stats.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

using namespace melai;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& id, bool ok, const std::string& what, const std::string& detail)
{
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << what << "  [" << detail << "]"
              << std::endl;
    if (!ok)
        ++failures;
}

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// 1. Formula oracles

void criterion_1()
{
    constexpr double tol = 1e-12;
    constexpr int trials = 1000;
    Rng rng(101);
    double worst_eq1 = 0.0;
    double worst_eq2 = 0.0;
    double worst_eq3 = 0.0;
    double worst_obj = 0.0;
    const double diag = arena::make_environment("amphitheatre").diagonal();
    for (int i = 0; i < trials; ++i) {
        arena::Vec2 pf{uniform(rng, -1, 1), uniform(rng, -1, 1)};
        arena::Vec2 pb{uniform(rng, -1, 1), uniform(rng, -1, 1)};
        long double dx = static_cast<long double>(pf.x) - pb.x;
        long double dy = static_cast<long double>(pf.y) - pb.y;
        long double f1 = 1.0L - std::sqrt(dx * dx + dy * dy) / std::sqrt(8.0L);
        worst_eq1 = std::max(worst_eq1, std::abs(static_cast<double>(f1) - arena::task_performance(pf, pb, diag)));

        double f0 = uniform(rng, 0, 1);
        double fs = f0 + uniform(rng, 0, 1 - f0);
        long n = 1 + static_cast<long>(pick(rng, 400));
        long double ld = (static_cast<long double>(fs) - f0) / n;
        worst_eq2 = std::max(worst_eq2, std::abs(static_cast<double>(ld) - experiment::learning_delta(fs, f0, n)));

        double fc = uniform(rng, 0, 1);
        double fl = uniform(rng, 0, 1);
        long double c = 1.0L - std::fabs(static_cast<long double>(fc) - fl);
        worst_eq3 = std::max(worst_eq3, std::abs(static_cast<double>(c) - archive::compatibility(fc, fl)));

        double eta = uniform(rng, 0, 1);
        double s = uniform(rng, 0, 1.5);
        double r = uniform(rng, 0, 1);
        long double obj = static_cast<long double>(eta) * s + (1.0L - eta) * r;
        worst_obj = std::max(worst_obj, std::abs(static_cast<double>(obj) - nipes::combined_objective(eta, s, r)));
    }
    bool ok = worst_eq1 <= tol && worst_eq2 <= tol && worst_eq3 <= tol && worst_obj <= tol;
    report("1", ok, "task performance, learning delta, compatibility and objective match oracles to 1e-12",
           std::to_string(trials) + " inputs each; max errors " + fmt(worst_eq1, 3) + ", " + fmt(worst_eq2, 3) +
               ", " + fmt(worst_eq3, 3) + ", " + fmt(worst_obj, 3));
}

// ---------------------------------------------------------------------------
// 2. CMA-ES core

// Reference (mu/mu_w, lambda) CMA-ES written from the textbook update rules.
struct ReferenceCmaes {
    int n;
    int lambda;
    int mu;
    std::vector<double> w;
    double mueff, cc, cs, c1, cmu, damps, chin;
    Eigen::VectorXd m, pc, ps;
    Eigen::MatrixXd C, B, Cinvsqrt, Csqrt;
    double sigma;
    long evals = 0;
    long eigen_at = 0;

    ReferenceCmaes(const Eigen::VectorXd& mean, double s, int lam)
        : n(static_cast<int>(mean.size())), lambda(lam), mu(lam / 2), m(mean), sigma(s)
    {
        double sum = 0.0;
        for (int i = 1; i <= mu; ++i) {
            w.push_back(std::log((lambda + 1.0) / 2.0) - std::log(static_cast<double>(i)));
            sum += w.back();
        }
        double sq = 0.0;
        for (double& x : w) {
            x /= sum;
            sq += x * x;
        }
        mueff = 1.0 / sq;
        double N = n;
        cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N);
        cs = (mueff + 2) / (N + mueff + 5);
        c1 = 2 / ((N + 1.3) * (N + 1.3) + mueff);
        cmu = std::min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) * (N + 2) + mueff));
        damps = 1 + 2 * std::max(0.0, std::sqrt((mueff - 1) / (N + 1)) - 1) + cs;
        chin = std::sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N * N));
        pc = Eigen::VectorXd::Zero(n);
        ps = Eigen::VectorXd::Zero(n);
        C = Eigen::MatrixXd::Identity(n, n);
        Csqrt = C;
        Cinvsqrt = C;
    }

    std::vector<Eigen::VectorXd> sample(Rng& rng)
    {
        std::vector<Eigen::VectorXd> xs;
        for (int k = 0; k < lambda; ++k) {
            Eigen::VectorXd z(n);
            for (int i = 0; i < n; ++i)
                z(i) = std::normal_distribution<double>(0.0, 1.0)(rng);
            xs.push_back(m + sigma * Csqrt * z);
        }
        return xs;
    }

    void update(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& fitness)
    {
        std::vector<int> idx(lambda);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fitness[a] > fitness[b]; });
        evals += lambda;
        Eigen::VectorXd old = m;
        m.setZero();
        for (int k = 0; k < mu; ++k)
            m += w[k] * xs[idx[k]];
        Eigen::VectorXd y = m - old;
        ps = (1 - cs) * ps + std::sqrt(cs * (2 - cs) * mueff) / sigma * (Cinvsqrt * y);
        double N = n;
        double h = ps.squaredNorm() / N / (1 - std::pow(1 - cs, 2.0 * evals / lambda)) < 2 + 4 / (N + 1) ? 1 : 0;
        pc = (1 - cc) * pc + h * std::sqrt(cc * (2 - cc) * mueff) / sigma * y;
        double wsum = 0.0;
        for (double x : w)
            wsum += x;
        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < mu; ++k) {
            Eigen::VectorXd d = (xs[idx[k]] - old) / sigma;
            rank_mu += w[k] * d * d.transpose();
        }
        C = (1 - c1 * (1 - (1 - h * h) * cc * (2 - cc)) - cmu * wsum) * C + c1 * pc * pc.transpose() + cmu * rank_mu;
        sigma *= std::exp(cs / damps * (ps.norm() / chin - 1));
        if (evals - eigen_at > lambda / (c1 + cmu) / N / 10) {
            eigen_at = evals;
            C = (C + C.transpose()) / 2;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
            Eigen::VectorXd d = es.eigenvalues();
            double fl = std::max(d.maxCoeff(), 1.0) * 1e-14;
            if (d.minCoeff() < fl) {
                d = d.cwiseMax(fl);
                C = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
            }
            Csqrt = es.eigenvectors() * d.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
            Cinvsqrt = es.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
        }
    }
};

double sphere(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return -s;
}

void criterion_2()
{
    constexpr int dim = 10;
    constexpr long budget = 5000;
    constexpr double target = 1e-3;
    nipes::NipesParams p;
    p.novelty_enabled = false;
    p.restarts_enabled = false;
    p.success_threshold = 2.0;  // never reached: r <= 0

    int solved = 0;
    long worst_evals = 0;
    for (int seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        long first_hit = -1;
        long count = 0;
        nipes::Evaluator eval = [&](std::span<const double> th) {
            ++count;
            double r = sphere(th);
            if (first_hit < 0 && std::sqrt(-r) < target)
                first_hit = count;
            return nipes::Evaluation{r, {0.0, 0.0}, true};
        };
        auto out = nipes::learn(dim, eval, std::nullopt, budget, p, rng);
        double norm = std::sqrt(-sphere(out.best_theta));
        if (norm < target && first_hit > 0 && first_hit <= budget) {
            ++solved;
            worst_evals = std::max(worst_evals, first_hit);
        }
    }
    report("2a", solved == 10, "novelty off: 10-D sphere solved to |theta| < 1e-3 within 5000 evaluations",
           std::to_string(solved) + "/10 seeds; slowest at " + std::to_string(worst_evals) + " evaluations");

    // Trajectory equality against the reference implementation.
    constexpr double tol = 1e-10;
    Rng init(77);
    Eigen::VectorXd mean(dim);
    for (int i = 0; i < dim; ++i)
        mean(i) = uniform(init, -1, 1);
    nipes::NipesState state(mean, p);
    ReferenceCmaes ref(mean, p.sigma0, p.lambda0);
    Rng rng_a(2024);
    Rng rng_b(2024);
    double worst = 0.0;
    for (int it = 0; it < 50; ++it) {
        auto thetas = state.ask(rng_a);
        auto xs = ref.sample(rng_b);
        std::vector<nipes::EvaluatedCandidate> cands(thetas.size());
        std::vector<double> fit;
        for (std::size_t k = 0; k < thetas.size(); ++k) {
            cands[k].theta = thetas[k];
            cands[k].task_performance = sphere(thetas[k]);
            cands[k].moved = true;
            fit.push_back(sphere(std::span<const double>(xs[k].data(), dim)));
        }
        state.tell(cands, rng_a);
        ref.update(xs, fit);
        worst = std::max(worst, (state.cmaes().mean() - ref.m).cwiseAbs().maxCoeff());
    }
    report("2b", worst <= tol, "CMA-ES mean trajectory equals a reference implementation for 50 iterations",
           "max |mean difference| " + fmt(worst, 3) + " (tolerance 1e-10)");
}

// ---------------------------------------------------------------------------
// 3. Restart mechanics

void criterion_3()
{
    nipes::NipesParams p;
    Rng rng(5);
    Rng desc_rng(6);
    nipes::Evaluator flat = [&](std::span<const double>) {
        return nipes::Evaluation{0.5, {uniform(desc_rng, 0, 1), uniform(desc_rng, 0, 1)}, true};
    };
    const long budget = 10L * 20 + 20L * 20 + 40L * 20 + 80L * 2;
    auto out = nipes::learn(12, flat, std::nullopt, budget, p, rng);
    std::vector<int> lambdas;
    std::vector<int> restart_gaps;
    int since = 0;
    for (const auto& row : out.log) {
        ++since;
        if (lambdas.empty() || lambdas.back() != row.lambda)
            lambdas.push_back(row.lambda);
        if (row.restart) {
            restart_gaps.push_back(since);
            since = 0;
        }
    }
    bool within = restart_gaps.size() >= 3 &&
                  std::all_of(restart_gaps.begin(), restart_gaps.begin() + 3,
                              [&](int g) { return g >= p.stagnation_window && g <= 2 * p.stagnation_window; });
    bool doubling = lambdas.size() >= 4 && lambdas[0] == 10 && lambdas[1] == 20 && lambdas[2] == 40 &&
                    lambdas[3] == 80;
    std::string seq;
    for (int l : lambdas)
        seq += (seq.empty() ? "" : "->") + std::to_string(l);
    std::string gaps;
    for (int g : restart_gaps)
        gaps += (gaps.empty() ? "" : ",") + std::to_string(g);
    report("3", within && doubling, "flat landscape: restart fires once the window fills and lambda doubles",
           "lambda " + seq + "; iterations per epoch " + gaps);
}

// ---------------------------------------------------------------------------
// 4. Archive properties

void criterion_4()
{
    Rng rng(404);
    const std::vector<morph::RobotType> types{{0, 1, 0}, {1, 1, 0}, {2, 2, 1}, {2, 3, 0}, {3, 2, 0}, {2, 3, 1}};
    std::map<morph::RobotType, control::ElmanController> ctrl;
    for (const auto& t : types)
        ctrl.emplace(t, control::ElmanController::build(t, 2));

    bool replay_ok = true;
    bool count_ok = true;
    bool tie_ok = true;
    bool exact_ok = true;
    long updates = 0;
    for (int seq = 0; seq < 10000; ++seq) {
        archive::ControllerArchive ar;
        std::map<morph::RobotType, double> oracle;
        std::size_t last_count = 0;
        auto len = 1 + pick(rng, 40);
        for (std::size_t k = 0; k < len; ++k) {
            const auto& t = types[pick(rng, types.size())];
            // Coarse grid so ties are frequent.
            double f = std::round(uniform(rng, 0, 1) * 10.0) / 10.0;
            auto c = ctrl.at(t);
            std::vector<double> theta(c.num_params(), static_cast<double>(k));
            c.set_params(theta);
            auto before = ar.lookup(t);
            auto res = ar.update(t, c, f, static_cast<int>(k));
            ++updates;
            auto it = oracle.find(t);
            if (it == oracle.end()) {
                oracle[t] = f;
                replay_ok = replay_ok && res == archive::UpdateResult::Inserted;
            } else if (f > it->second) {
                it->second = f;
                replay_ok = replay_ok && res == archive::UpdateResult::Replaced;
            } else {
                replay_ok = replay_ok && res == archive::UpdateResult::Kept;
                if (f == it->second)
                    tie_ok = tie_ok && ar.lookup(t) == before;
            }
            if (res != archive::UpdateResult::Kept)
                replay_ok = replay_ok && ar.lookup(t) == c;
            count_ok = count_ok && ar.size() >= last_count;
            last_count = ar.size();
        }
        for (const auto& t : types) {
            const auto* cell = ar.cell(t);
            auto it = oracle.find(t);
            if (it == oracle.end())
                exact_ok = exact_ok && cell == nullptr && !ar.lookup(t);
            else
                replay_ok = replay_ok && cell != nullptr && cell->task_performance == it->second;
        }
        // Neighbouring tuples never match.
        exact_ok = exact_ok && !ar.lookup({2, 3, 2}) && !ar.lookup({1, 2, 1});
    }
    report("4", replay_ok && count_ok && tie_ok && exact_ok,
           "archive cell equals running maximum, count non-decreasing, ties keep incumbent, exact lookup",
           "10000 sequences, " + std::to_string(updates) + " updates; replay " + (replay_ok ? "ok" : "BROKEN") +
               ", count " + (count_ok ? "ok" : "BROKEN") + ", ties " + (tie_ok ? "ok" : "BROKEN") + ", lookup " +
               (exact_ok ? "ok" : "BROKEN"));
}

// ---------------------------------------------------------------------------
// 5. Simulator oracles

arena::RobotModel differential(double half_track)
{
    return arena::RobotModel(0.05, {{{0.0, half_track}, {1.0, 0.0}}, {{0.0, -half_track}, {1.0, 0.0}}}, {},
                             {{{0.05, 0.0}, 0.0}});
}

void criterion_5()
{
    constexpr double tol = 1e-9;
    arena::Environment open;
    open.name = "open";
    open.beacon = {0.9, 0.0};
    open.start = {0.0, 0.0, 0.3};
    arena::ArenaParams ap;
    const double dt = 0.1;

    auto model = differential(0.04);
    arena::RobotState s{open.start, 0.0};
    const double v = 0.12;
    std::vector<double> fwd{v, v};
    auto straight = arena::step(s, model, fwd, open, ap, dt);
    double e_straight = std::max({std::abs(straight.pose.x - v * dt * std::cos(0.3)),
                                  std::abs(straight.pose.y - v * dt * std::sin(0.3)),
                                  std::abs(straight.pose.heading - 0.3)});
    std::vector<double> spin{-v, v};
    auto rot = arena::step(s, model, spin, open, ap, dt);
    double expected_heading = std::remainder(0.3 + v / 0.04 * dt, 2 * std::numbers::pi);
    double e_rot = std::max({std::abs(rot.pose.x), std::abs(rot.pose.y),
                             std::abs(std::remainder(rot.pose.heading - expected_heading, 2 * std::numbers::pi))});
    report("5a", e_straight <= tol && e_rot <= tol, "differential drive: straight line and pure rotation closed forms",
           "errors " + fmt(e_straight, 3) + " / " + fmt(e_rot, 3) + " (tolerance 1e-9)");

    // Occlusion: sensor at the origin facing +x, beacon 1 m ahead.
    arena::Environment occ = open;
    occ.start = {0.0, 0.0, 0.0};
    occ.beacon = {0.8, 0.0};
    arena::RobotState at{occ.start, 0.0};
    bool visible = arena::sense(at, model, occ, ap)[0] == 1.0;
    occ.walls = {{{0.4, -0.2}, {0.4, 0.2}}};
    bool blocked = arena::sense(at, model, occ, ap)[0] == 0.0;
    occ.walls = {{{0.4, 0.05}, {0.4, 0.3}}};
    bool beside = arena::sense(at, model, occ, ap)[0] == 1.0;
    occ.walls.clear();
    occ.beacon = {0.0, 0.8};
    bool outside_fov = arena::sense(at, model, occ, ap)[0] == 0.0;
    auto two_rooms = arena::make_environment("two_rooms");
    bool deceptive = false;
    for (const auto& w : two_rooms.walls)
        deceptive = deceptive || arena::segments_intersect(two_rooms.start.position(), two_rooms.beacon, w);
    report("5b", visible && blocked && beside && outside_fov && deceptive,
           "occlusion on hand-built wall cases",
           std::string("clear ") + (visible ? "seen" : "MISSED") + ", wall " + (blocked ? "blocked" : "LEAKED") +
               ", offset wall " + (beside ? "seen" : "MISSED") + ", outside cone " +
               (outside_fov ? "hidden" : "SEEN") + ", two-rooms line of sight " +
               (deceptive ? "crosses a wall" : "CLEAR"));

    // No penetration under random actuation.
    Rng rng(555);
    long steps = 0;
    long violations = 0;
    double worst = 0.0;
    const char* envs[] = {"hard_race", "two_rooms", "amphitheatre"};
    while (steps < 100000) {
        auto env = arena::make_environment(envs[pick(rng, 3)]);
        double radius = uniform(rng, 0.03, 0.2);
        std::vector<arena::WheelMount> wheels;
        std::vector<arena::JointMount> joints;
        for (std::size_t k = 0, n = 1 + pick(rng, 4); k < n; ++k) {
            double a = uniform(rng, 0, 2 * std::numbers::pi);
            wheels.push_back({{uniform(rng, -radius, radius), uniform(rng, -radius, radius)}, {std::cos(a), std::sin(a)}});
        }
        for (std::size_t k = 0, n = pick(rng, 3); k < n; ++k) {
            double a = uniform(rng, 0, 2 * std::numbers::pi);
            joints.push_back({{uniform(rng, -radius, radius), uniform(rng, -radius, radius)}, {std::cos(a), std::sin(a)}});
        }
        arena::RobotModel m(radius, wheels, joints, {});
        arena::RobotState st{env.start, 0.0};
        auto walls = env.all_walls();
        for (const auto& w : walls)
            if (arena::distance_to_wall(st.pose.position(), w) < radius)
                st.pose = {0.0, 0.0, 0.0};  // start overlaps for large footprints
        std::vector<double> cmd(m.num_actuators());
        for (int k = 0; k < 1000 && steps < 100000; ++k, ++steps) {
            if (k % 50 == 0)
                for (std::size_t c = 0; c < cmd.size(); ++c)
                    cmd[c] = c < wheels.size() ? uniform(rng, -ap.wheel_max_speed, ap.wheel_max_speed)
                                               : uniform(rng, 0, ap.joint_max_frequency);
            st = arena::step(st, m, cmd, env, ap, dt);
            for (const auto& w : walls) {
                double pen = radius - arena::distance_to_wall(st.pose.position(), w);
                if (pen > 1e-9) {
                    ++violations;
                    worst = std::max(worst, pen);
                }
            }
            if (!env.inside(st.pose.position()))
                ++violations;
        }
    }
    report("5c", violations == 0, "no wall penetration over 1e5 random rollout steps",
           std::to_string(steps) + " steps, " + std::to_string(violations) + " violations, worst " + fmt(worst, 3));
}

// ---------------------------------------------------------------------------
// 7. Determinism

void criterion_7(const fs::path& scratch)
{
    experiment::RunConfig cfg;
    cfg.environment = "two_rooms";
    cfg.per_body_budget = 40;
    cfg.generations = 3;
    cfg.total_budget = 5000;
    cfg.seed = 99;
    cfg.neat.population_size = 8;
    std::vector<std::string> contents;
    for (int run = 0; run < 2; ++run) {
        fs::path dir = scratch / ("determinism_" + std::to_string(run));
        fs::remove_all(dir);
        experiment::run_experiment(cfg, dir);
        std::ifstream in(dir / "generations.csv", std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        contents.push_back(ss.str());
        fs::remove_all(dir);
    }
    bool same = contents[0] == contents[1] && !contents[0].empty();
    report("7", same, "identical config and seed give byte-identical generations.csv",
           std::to_string(contents[0].size()) + " bytes, " + (same ? "identical" : "DIFFERENT"));
}

// ---------------------------------------------------------------------------
// 6. End-to-end directional reproduction

struct Cell {
    std::vector<experiment::RunSummary> mel;
    std::vector<experiment::RunSummary> melai;
};

int last_complete(const experiment::RunSummary& s)
{
    int g = -1;
    for (const auto& m : s.generations)
        if (!m.truncated)
            g = m.generation;
    return g;
}

const experiment::GenerationMetrics& at(const experiment::RunSummary& s, int g)
{
    return s.generations.at(static_cast<std::size_t>(g));
}

template <class F>
std::vector<double> collect(const std::vector<experiment::RunSummary>& runs, int g, F&& f)
{
    std::vector<double> out;
    for (const auto& r : runs)
        out.push_back(f(at(r, g)));
    return out;
}

std::string list(const std::vector<double>& v)
{
    std::string s;
    for (double x : v)
        s += (s.empty() ? "" : " ") + fmt(x, 3);
    return s;
}

void criterion_6(int replicates, std::uint64_t master_seed, const fs::path& out_root)
{
    const std::vector<std::string> envs{"amphitheatre", "hard_race", "two_rooms"};
    std::map<std::string, Cell> cells;
    auto t0 = std::chrono::steady_clock::now();
    for (const auto& env : envs)
        for (bool use_archive : {false, true})
            for (int r = 0; r < replicates; ++r) {
                experiment::RunConfig cfg;
                cfg.environment = env;
                cfg.use_archive = use_archive;
                cfg.per_body_budget = 200;
                cfg.generations = 20;
                cfg.total_budget = 80000;
                cfg.replicate = r;
                cfg.seed = config::replicate_seed(master_seed, r);
                cfg.learner_logs = false;
                fs::path dir;
                if (!out_root.empty()) {
                    dir = out_root / env / cfg.variant() / ("rep_" + std::to_string(r));
                    fs::remove_all(dir);
                }
                auto s = experiment::run_experiment(cfg, dir);
                double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::cout << "  ran " << env << " " << cfg.variant() << " rep " << r << ": best "
                          << fmt(s.best_fitness) << ", " << s.generations.size() << " generations, "
                          << s.total_evaluations << " evaluations (" << fmt(el, 5) << " s elapsed)" << std::endl;
                (use_archive ? cells[env].melai : cells[env].mel).push_back(std::move(s));
            }

    // a. Both variants reach 0.95 on the amphitheatre and hard race.
    {
        bool ok = true;
        std::string detail;
        for (const std::string env : {"amphitheatre", "hard_race"})
            for (bool use_archive : {false, true}) {
                const auto& runs = use_archive ? cells[env].melai : cells[env].mel;
                std::vector<double> best;
                for (const auto& r : runs) {
                    double b = 0.0;
                    for (const auto& g : r.generations)
                        b = std::max(b, g.best_fitness);
                    best.push_back(b);
                }
                double med = stats::median(best);
                ok = ok && med >= 0.95;
                detail += env + " " + (use_archive ? "MELAI" : "MEL") + " median " + fmt(med) + "; ";
            }
        report("6a", ok, "MEL and MELAI reach best fitness >= 0.95 (replicate median) on amphitheatre and hard race",
               detail);
    }

    // Final generation: latest generation complete in every run of the environment.
    std::map<std::string, int> final_gen;
    for (const auto& env : envs) {
        int g = 1 << 30;
        for (const auto* runs : {&cells[env].mel, &cells[env].melai})
            for (const auto& r : *runs)
                g = std::min(g, last_complete(r));
        final_gen[env] = g;
    }

    // b. Initial task performance.
    {
        bool ok = true;
        std::string detail;
        for (const auto& env : envs) {
            int g = final_gen[env];
            auto get = [](const experiment::GenerationMetrics& m) { return m.best_initial_tp; };
            auto mel = collect(cells[env].mel, g, get);
            auto melai = collect(cells[env].melai, g, get);
            auto t = stats::mann_whitney(melai, mel);
            ok = ok && t.median_a >= t.median_b;
            detail += env + " gen " + std::to_string(g) + ": MELAI " + fmt(t.median_a) + " vs MEL " +
                      fmt(t.median_b) + " (p=" + fmt(t.p, 3) + "); ";
        }
        report("6b", ok, "final-generation median best initial task-performance MELAI >= MEL on every environment",
               detail);
    }

    // c. Evaluations per generation.
    {
        bool ok = true;
        std::string detail;
        for (const std::string env : {"hard_race", "two_rooms"}) {
            int g = final_gen[env];
            auto get = [](const experiment::GenerationMetrics& m) { return static_cast<double>(m.evaluations); };
            auto mel = collect(cells[env].mel, g, get);
            auto melai = collect(cells[env].melai, g, get);
            auto t = stats::mann_whitney(melai, mel);
            ok = ok && t.median_a <= t.median_b;
            detail += env + " gen " + std::to_string(g) + ": MELAI " + fmt(t.median_a) + " vs MEL " +
                      fmt(t.median_b) + " (p=" + fmt(t.p, 3) + "); ";
        }
        report("6c", ok, "final-generation median evaluations per generation MELAI <= MEL on hard race and two rooms",
               detail);
    }

    // d. Learning delta trend under MELAI.
    {
        bool ok = true;
        std::string detail;
        for (const auto& env : envs) {
            int g = final_gen[env];
            auto get = [](const experiment::GenerationMetrics& m) { return m.mean_learning_delta; };
            auto early = collect(cells[env].melai, 5, get);
            auto late = collect(cells[env].melai, g, get);
            double m5 = std::accumulate(early.begin(), early.end(), 0.0) / static_cast<double>(early.size());
            double mf = std::accumulate(late.begin(), late.end(), 0.0) / static_cast<double>(late.size());
            ok = ok && mf >= m5;
            detail += env + ": gen 5 " + fmt(m5, 3) + " -> gen " + std::to_string(g) + " " + fmt(mf, 3) + "; ";
        }
        report("6d", ok, "MELAI mean learning delta at the final generation >= generation 5 (replicate mean)", detail);
    }

    // e. Archive growth and compatibility.
    {
        bool grows = true;
        double worst_compat = 1.0;
        std::string detail;
        for (const auto& env : envs) {
            std::vector<double> compat;
            for (const auto& r : cells[env].melai) {
                grows = grows && r.generations.back().archive_count > r.generations.front().archive_count;
                for (std::size_t k = 1; k < r.generations.size(); ++k)
                    grows = grows && r.generations[k].archive_count >= r.generations[k - 1].archive_count;
                if (auto c = r.generations.back().mean_compatibility)
                    compat.push_back(*c);
            }
            double mean = compat.empty() ? 0.0
                                         : std::accumulate(compat.begin(), compat.end(), 0.0) /
                                               static_cast<double>(compat.size());
            worst_compat = std::min(worst_compat, mean);
            detail += env + " compatibility " + fmt(mean, 3) + "; ";
        }
        bool ok = grows && worst_compat >= 0.4;
        std::string note = worst_compat >= 0.5 ? "" : " (soft: below 0.5, above the 0.4 flag)";
        report("6e", ok, "archive count strictly increases; final mean compatibility >= 0.5 (flag below 0.4)",
               std::string("growth ") + (grows ? "ok" : "BROKEN") + "; " + detail + note);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MELAI acceptance criteria"};
    std::string criteria = "1,2,3,4,5,7";
    int replicates = 5;
    std::uint64_t master_seed = 2021;
    std::string scratch = fs::temp_directory_path().string();
    std::string runs_out;
    app.add_option("--criteria", criteria, "Comma-separated criteria to check (1-7)");
    app.add_option("--replicates", replicates, "Replicates per cell for criterion 6");
    app.add_option("--master-seed", master_seed, "Master seed for criterion 6 replicates");
    app.add_option("--scratch", scratch, "Directory for temporary run output");
    app.add_option("--runs-out", runs_out, "Keep criterion 6 run directories here");
    CLI11_PARSE(app, argc, argv);

    std::set<std::string> wanted;
    std::stringstream ss(criteria);
    for (std::string item; std::getline(ss, item, ',');)
        wanted.insert(item);

    if (wanted.contains("1"))
        criterion_1();
    if (wanted.contains("2"))
        criterion_2();
    if (wanted.contains("3"))
        criterion_3();
    if (wanted.contains("4"))
        criterion_4();
    if (wanted.contains("5"))
        criterion_5();
    if (wanted.contains("6"))
        criterion_6(replicates, master_seed, runs_out);
    if (wanted.contains("7"))
        criterion_7(scratch);
    std::cout << (failures == 0 ? "all selected criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
