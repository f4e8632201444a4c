#pragma once

#include "melai/arena.hpp"
#include "melai/elman.hpp"
#include "melai/morphogen.hpp"
#include "melai/random.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace melai::nipes {

using Descriptor = std::array<double, 2>;

struct NipesParams {
    double sigma0 = 1.0;
    int lambda0 = 10;
    double eta0 = 1.0;
    double eta_decrement = 0.05;
    int novelty_k = 15;
    double archive_add_probability = 0.4;
    double archive_novelty_threshold = 0.9;
    int stagnation_window = 20;
    double stagnation_threshold = 0.05;  // tau_1
    double diversity_threshold = 0.05;   // tau_2
    int trial_period = 50;
    double success_threshold = 0.95;     // tau_S
    double init_mean_range = 1.0;
    /// false: eta stays 0 and the learner is plain CMA-ES on r.
    bool novelty_enabled = true;
    bool restarts_enabled = true;

    void validate() const;
};

/// Plain (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu updates and
/// cumulative step-size adaptation. Samples are m + sigma * C^{1/2} z with
/// the symmetric square root, z drawn coordinate by coordinate.
class Cmaes {
public:
    Cmaes(Eigen::VectorXd mean, double sigma, int lambda);

    int dimension() const { return static_cast<int>(mean_.size()); }
    int lambda() const { return lambda_; }
    int mu() const { return mu_; }
    double sigma() const { return sigma_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    long evaluations() const { return count_eval_; }

    std::vector<Eigen::VectorXd> ask(Rng& rng);
    /// `ranked` holds indices of the last ask() batch, best first.
    void tell(std::span<const Eigen::VectorXd> samples, std::span<const std::size_t> ranked);

private:
    void update_eigensystem();

    int lambda_;
    int mu_;
    Eigen::VectorXd weights_;
    double mueff_;
    double cc_, cs_, c1_, cmu_, damps_, chi_n_;

    Eigen::VectorXd mean_;
    double sigma_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd sqrt_cov_;
    Eigen::MatrixXd inv_sqrt_cov_;
    Eigen::VectorXd pc_;
    Eigen::VectorXd ps_;
    long count_eval_ = 0;
    long eigen_eval_ = 0;
    long iterations_ = 0;
};

struct Evaluation {
    double task_performance = 0.0;
    /// Behaviour descriptor, already on the scale novelty is measured in.
    Descriptor descriptor{};
    bool moved = false;
};

struct EvaluatedCandidate {
    std::vector<double> theta;
    double task_performance = 0.0;
    Descriptor descriptor{};
    bool moved = false;
    double novelty = 0.0;
    double combined = 0.0;
};

/// Mean distance to the k nearest descriptors of `others` (all of them when
/// fewer than k); 0 when `others` is empty.
double novelty(const Descriptor& d, std::span<const Descriptor> others, int k);

/// eta * S + (1 - eta) * r.
double combined_objective(double eta, double novelty, double task_performance);

/// Indices of candidates sorted by combined objective, best first. NaN sorts
/// last; ties keep index order.
std::vector<std::size_t> rank_candidates(std::span<const EvaluatedCandidate> candidates);

/// Root of the mean per-axis population variance.
double descriptor_spread(std::span<const Descriptor> descriptors);

/// Population standard deviation.
double stdev(std::span<const double> values);

class NipesState {
public:
    NipesState(Eigen::VectorXd initial_mean, const NipesParams& params);

    const NipesParams& params() const { return params_; }
    const Cmaes& cmaes() const { return cma_; }
    int dimension() const { return cma_.dimension(); }
    int lambda() const { return cma_.lambda(); }
    double eta() const { return eta_; }
    int restart_count() const { return restarts_; }
    long evaluations_used() const { return evaluations_; }
    int epoch_iterations() const { return epoch_iterations_; }
    const std::deque<double>& best_history() const { return best_history_; }
    const std::vector<Descriptor>& novelty_archive() const { return novelty_archive_; }

    std::vector<std::vector<double>> ask(Rng& rng);
    /// Scores novelty and the combined objective in place, updates the
    /// distribution, eta, the novelty archive and the bookkeeping.
    void tell(std::vector<EvaluatedCandidate>& candidates, Rng& rng);

    /// Stagnation of the best-value window or collapse of the last
    /// population's descriptors.
    bool check_restart() const;
    /// Random mean, sigma0, eta reset, doubled population.
    void restart(Rng& rng);

private:
    NipesParams params_;
    Cmaes cma_;
    std::vector<Eigen::VectorXd> pending_;
    double eta_;
    int restarts_ = 0;
    long evaluations_ = 0;
    int epoch_iterations_ = 0;
    std::deque<double> best_history_;
    std::vector<Descriptor> novelty_archive_;
    std::vector<Descriptor> last_descriptors_;
    bool last_any_moved_ = false;
};

enum class StopReason { Success, Budget, TrialPeriod, NoActuators };

std::string_view to_string(StopReason reason);

struct LogRow {
    int iteration = 0;
    int lambda = 0;
    double eta = 0.0;
    double sigma = 0.0;
    double best_r = 0.0;
    double mean_r = 0.0;
    double novelty_mean = 0.0;
    double novelty_max = 0.0;
    bool restart = false;
    long evaluations = 0;
};

struct LearnOutcome {
    std::vector<double> best_theta;
    double f_star = 0.0;
    double f0 = 0.0;
    /// Evaluation index (1-based) at which f_star was first reached.
    long n_best = 0;
    long evaluations_used = 0;
    int iterations = 0;
    int restarts = 0;
    StopReason stop = StopReason::Budget;
    std::vector<LogRow> log;
};

using Evaluator = std::function<Evaluation(std::span<const double>)>;

/// Runs ask/evaluate/tell until success, budget or the trial period stops
/// it. With a seed, the first population is centred on it and its first
/// candidate is the seed itself.
LearnOutcome learn(int dimension, const Evaluator& evaluate, std::optional<std::vector<double>> seed,
                   long budget, const NipesParams& params, Rng& rng);

struct BodyLearnResult {
    std::optional<control::ElmanController> best_controller;
    LearnOutcome outcome;
};

/// Learns a controller for a developed body. Descriptors are final
/// positions scaled to the unit square.
BodyLearnResult learn(const morph::BodyPlan& plan, const std::optional<control::ElmanController>& seed,
                      long budget, const arena::Environment& env, const arena::ArenaParams& arena_params,
                      const NipesParams& params, int hidden_size, Rng& rng);

void write_learner_log(std::ostream& os, std::span<const LogRow> rows);

} // namespace melai::nipes
