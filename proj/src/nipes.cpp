#include "melai/nipes.hpp"

#include "melai/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace melai::nipes {

void NipesParams::validate() const
{
    if (!(sigma0 > 0.0))
        throw ConfigError("nipes: sigma0 must be positive");
    if (lambda0 < 2)
        throw ConfigError("nipes: initial population must be at least 2");
    if (eta0 < 0.0 || eta0 > 1.0 || eta_decrement < 0.0)
        throw ConfigError("nipes: novelty ratio must lie in [0,1]");
    if (novelty_k < 1)
        throw ConfigError("nipes: novelty_k must be at least 1");
    if (archive_add_probability < 0.0 || archive_add_probability > 1.0)
        throw ConfigError("nipes: archive_add_probability must lie in [0,1]");
    if (stagnation_window < 2 || trial_period < 1)
        throw ConfigError("nipes: stagnation window and trial period must be positive");
    if (!(init_mean_range >= 0.0))
        throw ConfigError("nipes: init_mean_range must be non-negative");
}

// ---------------------------------------------------------------------------

Cmaes::Cmaes(Eigen::VectorXd mean, double sigma, int lambda)
    : lambda_(lambda), mu_(lambda / 2), mean_(std::move(mean)), sigma_(sigma)
{
    const auto n = static_cast<double>(mean_.size());
    if (mean_.size() == 0)
        throw DimensionError("cmaes: dimension must be positive");
    if (lambda_ < 2)
        throw ConfigError("cmaes: lambda must be at least 2");

    weights_.resize(mu_);
    for (int i = 0; i < mu_; ++i)
        weights_[i] = std::log((lambda_ + 1) / 2.0) - std::log(i + 1.0);
    weights_ /= weights_.sum();
    mueff_ = 1.0 / weights_.squaredNorm();

    cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
    cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
    c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
    damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
    chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    const auto dim = mean_.size();
    cov_ = Eigen::MatrixXd::Identity(dim, dim);
    sqrt_cov_ = cov_;
    inv_sqrt_cov_ = cov_;
    pc_ = Eigen::VectorXd::Zero(dim);
    ps_ = Eigen::VectorXd::Zero(dim);
}

std::vector<Eigen::VectorXd> Cmaes::ask(Rng& rng)
{
    const auto dim = mean_.size();
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(lambda_));
    Eigen::VectorXd z(dim);
    for (int k = 0; k < lambda_; ++k) {
        for (Eigen::Index i = 0; i < dim; ++i)
            z[i] = normal(rng);
        out.emplace_back(mean_ + sigma_ * (sqrt_cov_ * z));
    }
    return out;
}

void Cmaes::tell(std::span<const Eigen::VectorXd> samples, std::span<const std::size_t> ranked)
{
    if (samples.size() != static_cast<std::size_t>(lambda_) || ranked.size() != samples.size())
        throw DimensionError("cmaes: tell expects lambda ranked samples");
    const auto n = static_cast<double>(mean_.size());
    ++iterations_;
    count_eval_ += lambda_;

    const Eigen::VectorXd old_mean = mean_;
    mean_.setZero();
    for (int k = 0; k < mu_; ++k)
        mean_ += weights_[k] * samples[ranked[static_cast<std::size_t>(k)]];

    const Eigen::VectorXd step = mean_ - old_mean;
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) / sigma_ * (inv_sqrt_cov_ * step);
    const double ps_norm2 = ps_.squaredNorm();
    const double hsig_lhs = ps_norm2 / n /
                            (1.0 - std::pow(1.0 - cs_, 2.0 * static_cast<double>(count_eval_) / lambda_));
    const double hsig = hsig_lhs < 2.0 + 4.0 / (n + 1.0) ? 1.0 : 0.0;
    pc_ = (1.0 - cc_) * pc_ + hsig * std::sqrt(cc_ * (2.0 - cc_) * mueff_) / sigma_ * step;

    const double c1a = c1_ * (1.0 - (1.0 - hsig * hsig) * cc_ * (2.0 - cc_));
    cov_ *= 1.0 - c1a - cmu_ * weights_.sum();
    cov_ += c1_ * pc_ * pc_.transpose();
    for (int k = 0; k < mu_; ++k) {
        const Eigen::VectorXd dx = (samples[ranked[static_cast<std::size_t>(k)]] - old_mean) / sigma_;
        cov_ += cmu_ * weights_[k] * dx * dx.transpose();
    }

    sigma_ *= std::exp((cs_ / damps_) * (std::sqrt(ps_norm2) / chi_n_ - 1.0));

    if (static_cast<double>(count_eval_ - eigen_eval_) > lambda_ / (c1_ + cmu_) / n / 10.0)
        update_eigensystem();
}

void Cmaes::update_eigensystem()
{
    eigen_eval_ = count_eval_;
    cov_ = 0.5 * (cov_ + cov_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
    Eigen::VectorXd values = eig.eigenvalues();
    const Eigen::MatrixXd& basis = eig.eigenvectors();
    // Eigenvalue floor keeps the covariance positive definite.
    const double floor = std::max(values.maxCoeff(), 1.0) * 1e-14;
    if (values.minCoeff() < floor) {
        values = values.cwiseMax(floor);
        cov_ = basis * values.asDiagonal() * basis.transpose();
    }
    const Eigen::VectorXd root = values.cwiseSqrt();
    sqrt_cov_ = basis * root.asDiagonal() * basis.transpose();
    inv_sqrt_cov_ = basis * root.cwiseInverse().asDiagonal() * basis.transpose();
}

// ---------------------------------------------------------------------------

double novelty(const Descriptor& d, std::span<const Descriptor> others, int k)
{
    if (others.empty() || k < 1)
        return 0.0;
    std::vector<double> dist;
    dist.reserve(others.size());
    for (const auto& o : others)
        dist.push_back(std::hypot(d[0] - o[0], d[1] - o[1]));
    const auto take = std::min(dist.size(), static_cast<std::size_t>(k));
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take));
    return std::accumulate(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), 0.0) /
           static_cast<double>(take);
}

double combined_objective(double eta, double novelty, double task_performance)
{
    return eta * novelty + (1.0 - eta) * task_performance;
}

std::vector<std::size_t> rank_candidates(std::span<const EvaluatedCandidate> candidates)
{
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
        double f = candidates[i].combined;
        return std::isnan(f) ? -std::numeric_limits<double>::infinity() : f;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
    return order;
}

double descriptor_spread(std::span<const Descriptor> descriptors)
{
    if (descriptors.empty())
        return 0.0;
    double var = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        double mean = 0.0;
        for (const auto& d : descriptors)
            mean += d[static_cast<std::size_t>(axis)];
        mean /= static_cast<double>(descriptors.size());
        for (const auto& d : descriptors) {
            double e = d[static_cast<std::size_t>(axis)] - mean;
            var += e * e;
        }
    }
    return std::sqrt(var / (2.0 * static_cast<double>(descriptors.size())));
}

double stdev(std::span<const double> values)
{
    if (values.empty())
        return 0.0;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values)
        acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

// ---------------------------------------------------------------------------

NipesState::NipesState(Eigen::VectorXd initial_mean, const NipesParams& params)
    : params_(params), cma_(std::move(initial_mean), params.sigma0, params.lambda0),
      eta_(params.novelty_enabled ? params.eta0 : 0.0)
{
    params_.validate();
}

std::vector<std::vector<double>> NipesState::ask(Rng& rng)
{
    pending_ = cma_.ask(rng);
    std::vector<std::vector<double>> out;
    out.reserve(pending_.size());
    for (const auto& x : pending_)
        out.emplace_back(x.data(), x.data() + x.size());
    return out;
}

void NipesState::tell(std::vector<EvaluatedCandidate>& candidates, Rng& rng)
{
    if (candidates.size() != static_cast<std::size_t>(cma_.lambda()))
        throw DimensionError("nipes: tell expects one candidate per sample");

    std::vector<Descriptor> descriptors;
    descriptors.reserve(candidates.size());
    for (const auto& c : candidates)
        descriptors.push_back(c.descriptor);

    if (params_.novelty_enabled) {
        std::vector<Descriptor> others;
        others.reserve(candidates.size() - 1 + novelty_archive_.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            others.clear();
            for (std::size_t j = 0; j < candidates.size(); ++j)
                if (j != i)
                    others.push_back(descriptors[j]);
            others.insert(others.end(), novelty_archive_.begin(), novelty_archive_.end());
            candidates[i].novelty = novelty(descriptors[i], others, params_.novelty_k);
        }
    } else {
        for (auto& c : candidates)
            c.novelty = 0.0;
    }
    for (auto& c : candidates)
        c.combined = std::isnan(c.task_performance)
                         ? std::numeric_limits<double>::quiet_NaN()
                         : combined_objective(eta_, c.novelty, c.task_performance);

    std::vector<Eigen::VectorXd> samples;
    samples.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.theta.size() != static_cast<std::size_t>(dimension()))
            throw DimensionError("nipes: candidate has wrong dimension");
        samples.emplace_back(Eigen::Map<const Eigen::VectorXd>(c.theta.data(), dimension()));
    }
    const auto ranked = rank_candidates(candidates);
    cma_.tell(samples, ranked);

    if (params_.novelty_enabled) {
        eta_ = std::max(0.0, eta_ - params_.eta_decrement);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            bool sampled = bernoulli(rng, params_.archive_add_probability);
            if (sampled || candidates[i].novelty > params_.archive_novelty_threshold)
                novelty_archive_.push_back(descriptors[i]);
        }
    }

    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : candidates)
        if (!std::isnan(c.task_performance))
            best = std::max(best, c.task_performance);
    best_history_.push_back(best);
    while (best_history_.size() > static_cast<std::size_t>(params_.stagnation_window))
        best_history_.pop_front();

    last_descriptors_ = std::move(descriptors);
    last_any_moved_ = std::any_of(candidates.begin(), candidates.end(),
                                  [](const EvaluatedCandidate& c) { return c.moved; });
    evaluations_ += static_cast<long>(candidates.size());
    ++epoch_iterations_;
}

bool NipesState::check_restart() const
{
    if (epoch_iterations_ >= params_.stagnation_window &&
        best_history_.size() == static_cast<std::size_t>(params_.stagnation_window)) {
        std::vector<double> window(best_history_.begin(), best_history_.end());
        if (std::all_of(window.begin(), window.end(), [](double v) { return std::isfinite(v); }) &&
            stdev(window) < params_.stagnation_threshold)
            return true;
    }
    // A population that never left the start is handled by the trial period.
    if (last_any_moved_ && !last_descriptors_.empty() &&
        descriptor_spread(last_descriptors_) < params_.diversity_threshold)
        return true;
    return false;
}

void NipesState::restart(Rng& rng)
{
    Eigen::VectorXd mean(dimension());
    for (Eigen::Index i = 0; i < mean.size(); ++i)
        mean[i] = uniform(rng, -params_.init_mean_range, params_.init_mean_range);
    ++restarts_;
    cma_ = Cmaes(std::move(mean), params_.sigma0, params_.lambda0 << restarts_);
    eta_ = params_.novelty_enabled ? params_.eta0 : 0.0;
    epoch_iterations_ = 0;
    best_history_.clear();
    last_descriptors_.clear();
    last_any_moved_ = false;
    pending_.clear();
}

// ---------------------------------------------------------------------------

std::string_view to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::Success: return "success";
    case StopReason::Budget: return "budget";
    case StopReason::TrialPeriod: return "trial_period";
    case StopReason::NoActuators: return "no_actuators";
    }
    return "unknown";
}

LearnOutcome learn(int dimension, const Evaluator& evaluate, std::optional<std::vector<double>> seed,
                   long budget, const NipesParams& params, Rng& rng)
{
    if (budget <= 0)
        throw ConfigError("learn: budget must be positive");
    if (dimension < 1)
        throw DimensionError("learn: dimension must be positive");
    if (seed && seed->size() != static_cast<std::size_t>(dimension))
        throw DimensionError("learn: seed controller has wrong dimension");

    Eigen::VectorXd mean(dimension);
    if (seed) {
        mean = Eigen::Map<const Eigen::VectorXd>(seed->data(), dimension);
    } else {
        for (Eigen::Index i = 0; i < dimension; ++i)
            mean[i] = uniform(rng, -params.init_mean_range, params.init_mean_range);
    }
    NipesState state(std::move(mean), params);

    LearnOutcome out;
    out.f_star = -std::numeric_limits<double>::infinity();
    bool ever_moved = false;
    for (int iteration = 0;; ++iteration) {
        auto thetas = state.ask(rng);
        if (iteration == 0 && seed)
            thetas.front() = *seed;

        std::vector<EvaluatedCandidate> candidates(thetas.size());
        double worst = std::numeric_limits<double>::infinity();
        bool success = false;
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            auto& c = candidates[i];
            c.theta = std::move(thetas[i]);
            Evaluation e = evaluate(c.theta);
            c.task_performance = e.task_performance;
            c.descriptor = e.descriptor;
            c.moved = e.moved;
            if (std::isnan(c.task_performance))
                continue;
            worst = std::min(worst, c.task_performance);
            if (c.task_performance > out.f_star) {
                out.f_star = c.task_performance;
                out.best_theta = c.theta;
                out.n_best = state.evaluations_used() + static_cast<long>(i) + 1;
            }
            success = success || c.task_performance >= params.success_threshold;
            ever_moved = ever_moved || c.moved;
        }
        if (iteration == 0)
            out.f0 = std::isfinite(worst) ? worst : 0.0;

        state.tell(candidates, rng);

        LogRow row;
        row.iteration = iteration;
        row.lambda = static_cast<int>(candidates.size());
        row.eta = state.eta();
        row.sigma = state.cmaes().sigma();
        row.best_r = state.best_history().back();
        double sum_r = 0.0;
        double sum_s = 0.0;
        double max_s = 0.0;
        for (const auto& c : candidates) {
            sum_r += c.task_performance;
            sum_s += c.novelty;
            max_s = std::max(max_s, c.novelty);
        }
        row.mean_r = sum_r / static_cast<double>(candidates.size());
        row.novelty_mean = sum_s / static_cast<double>(candidates.size());
        row.novelty_max = max_s;
        row.evaluations = state.evaluations_used();

        out.iterations = iteration + 1;
        bool stop = true;
        if (success)
            out.stop = StopReason::Success;
        else if (state.evaluations_used() >= budget)
            out.stop = StopReason::Budget;
        else if (!ever_moved && out.iterations >= params.trial_period)
            out.stop = StopReason::TrialPeriod;
        else
            stop = false;

        if (!stop && params.restarts_enabled && state.check_restart()) {
            state.restart(rng);
            row.restart = true;
        }
        out.log.push_back(row);
        if (stop)
            break;
    }
    if (!std::isfinite(out.f_star)) {
        // Every rollout failed.
        out.f_star = out.f0;
        out.best_theta.assign(static_cast<std::size_t>(dimension), 0.0);
        out.n_best = 0;
    }
    out.evaluations_used = state.evaluations_used();
    out.restarts = state.restart_count();
    return out;
}

BodyLearnResult learn(const morph::BodyPlan& plan, const std::optional<control::ElmanController>& seed,
                      long budget, const arena::Environment& env, const arena::ArenaParams& arena_params,
                      const NipesParams& params, int hidden_size, Rng& rng)
{
    BodyLearnResult result;
    const arena::RobotModel model = arena::RobotModel::from_body(plan, arena_params);
    if (model.num_actuators() == 0) {
        double f = arena::task_performance(env.start.position(), env.beacon, env.diagonal());
        result.outcome.f_star = f;
        result.outcome.f0 = f;
        result.outcome.stop = StopReason::NoActuators;
        return result;
    }

    control::ElmanController ctrl = control::ElmanController::build(plan.type, hidden_size);
    std::optional<std::vector<double>> seed_theta;
    if (seed) {
        if (seed->type() != plan.type || seed->hidden_size() != ctrl.hidden_size())
            throw StructuralError("seed controller does not match the body");
        seed_theta.emplace(seed->params().begin(), seed->params().end());
    }

    const double sx = env.upper.x - env.lower.x;
    const double sy = env.upper.y - env.lower.y;
    Evaluator evaluator = [&](std::span<const double> theta) {
        ctrl.set_params(theta);
        arena::RolloutResult r = arena::evaluate(model, ctrl, env, arena_params);
        Evaluation e;
        e.task_performance = r.task_performance;
        e.descriptor = {(r.final_position.x - env.lower.x) / sx, (r.final_position.y - env.lower.y) / sy};
        e.moved = r.moved;
        return e;
    };
    result.outcome = learn(static_cast<int>(ctrl.num_params()), evaluator, std::move(seed_theta), budget,
                           params, rng);
    ctrl.set_params(result.outcome.best_theta);
    result.best_controller = std::move(ctrl);
    return result;
}

void write_learner_log(std::ostream& os, std::span<const LogRow> rows)
{
    std::ostringstream out;
    out << std::setprecision(10);
    out << "iteration,lambda,eta,sigma,best_r,mean_r,novelty_mean,novelty_max,restart,evaluations\n";
    for (const auto& r : rows)
        out << r.iteration << ',' << r.lambda << ',' << r.eta << ',' << r.sigma << ',' << r.best_r << ','
            << r.mean_r << ',' << r.novelty_mean << ',' << r.novelty_max << ',' << (r.restart ? 1 : 0)
            << ',' << r.evaluations << '\n';
    os << out.str();
}

} // namespace melai::nipes
