#pragma once

#include "melai/cppn.hpp"
#include "melai/random.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace melai::neat {

struct NeatParams {
    std::size_t population_size = 20;

    double add_node_rate = 0.03;
    double add_connection_rate = 0.1;
    /// Probability that a genome has its weights mutated at all.
    double weight_mutation_rate = 0.8;
    /// Per-gene probability of replacing (rather than perturbing) a weight.
    double weight_replace_rate = 0.1;
    double weight_perturb_scale = 0.5;
    double activation_mutation_rate = 0.05;
    double weight_limit = 8.0;
    double init_weight_range = 2.0;

    double crossover_rate = 0.75;
    double excess_coeff = 1.0;
    double disjoint_coeff = 1.0;
    double weight_coeff = 0.4;
    double compatibility_threshold = 3.0;

    std::size_t elitism = 1;
    int stagnation_limit = 15;
    double survival_fraction = 0.5;

    void validate() const;
};

/// Hands out innovation numbers and node ids so that identical structural
/// mutations receive identical ids across the population.
class InnovationTracker {
public:
    InnovationTracker() = default;
    InnovationTracker(int next_innovation, int next_node_id)
        : next_innovation_(next_innovation), next_node_id_(next_node_id)
    {}

    int connection_innovation(int source, int target);

    /// Node id for splitting the connection with the given innovation; never
    /// an id already present in `genome`.
    int split_node(int split_innovation, const CppnGenome& genome);

    int next_innovation() const { return next_innovation_; }
    int next_node_id() const { return next_node_id_; }

private:
    int next_innovation_ = 0;
    int next_node_id_ = kNumInputs + kNumOutputs;
    std::map<std::pair<int, int>, int> connections_;
    std::map<int, std::vector<int>> splits_;
};

struct Species {
    int id = 0;
    CppnGenome representative;
    std::vector<std::size_t> members;
    double best_fitness = 0.0;
    int last_improved = 0;
    bool has_best = false;
};

struct NeatPopulation {
    std::vector<CppnGenome> genomes;
    std::vector<Species> species;
    int generation = 0;
    InnovationTracker tracker;
    int next_species_id = 0;

    /// Fully connected 4x5 genomes with random weights, speciated.
    static NeatPopulation initial(const NeatParams& params, Rng& rng);

    /// Index of the species containing genome i.
    std::size_t species_of(std::size_t genome_index) const;
};

double compatibility_distance(const CppnGenome& a, const CppnGenome& b, const NeatParams& params);

CppnGenome mutate(const CppnGenome& genome, const NeatParams& params, InnovationTracker& tracker,
                  Rng& rng);

/// Structure comes from `fitter`; matching genes take either parent's weight.
CppnGenome crossover(const CppnGenome& fitter, const CppnGenome& other, Rng& rng);

/// Assigns every genome to a species, reusing existing representatives.
void speciate(NeatPopulation& pop, const NeatParams& params);

/// Selection, recombination and mutation. NaN fitnesses are treated as the
/// worst finite value; all-NaN input is an error.
NeatPopulation next_generation(const NeatPopulation& pop, std::span<const double> fitnesses,
                               const NeatParams& params, Rng& rng);

/// Offspring per species by largest remainder over the given scores.
std::vector<std::size_t> allocate_offspring(std::span<const double> scores, std::size_t total);

} // namespace melai::neat
