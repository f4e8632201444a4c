#include "melai/neat.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace melai::neat {

namespace {

void check_probability(double p, const char* name)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(std::string("neat.") + name + " must be in [0,1]");
}

Activation random_activation(Rng& rng)
{
    return kHiddenActivations[pick(rng, kHiddenActivations.size())];
}

void mutate_add_node(CppnGenome& g, InnovationTracker& tracker, Rng& rng)
{
    std::vector<std::size_t> enabled;
    for (std::size_t i = 0; i < g.connections().size(); ++i)
        if (g.connections()[i].enabled)
            enabled.push_back(i);
    if (enabled.empty())
        return;

    ConnectionGene split = g.connections()[enabled[pick(rng, enabled.size())]];
    int node = tracker.split_node(split.innovation, g);
    for (auto& c : g.connections())
        if (c.innovation == split.innovation)
            c.enabled = false;

    g.add_node({node, NodeRole::Hidden, random_activation(rng)});
    g.add_connection({tracker.connection_innovation(split.source, node), split.source, node, 1.0, true});
    g.add_connection(
        {tracker.connection_innovation(node, split.target), node, split.target, split.weight, true});
}

void mutate_add_connection(CppnGenome& g, const NeatParams& params, InnovationTracker& tracker,
                           Rng& rng)
{
    std::vector<int> sources;
    std::vector<int> targets;
    for (const auto& n : g.nodes()) {
        if (n.role != NodeRole::Output)
            sources.push_back(n.id);
        if (n.role != NodeRole::Input)
            targets.push_back(n.id);
    }
    constexpr int kAttempts = 20;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        int src = sources[pick(rng, sources.size())];
        int dst = targets[pick(rng, targets.size())];
        if (g.find_connection(src, dst) != nullptr || g.creates_cycle(src, dst))
            continue;
        double w = uniform(rng, -params.init_weight_range, params.init_weight_range);
        g.add_connection({tracker.connection_innovation(src, dst), src, dst, w, true});
        return;
    }
}

void mutate_weights(CppnGenome& g, const NeatParams& params, Rng& rng)
{
    for (auto& c : g.connections()) {
        if (bernoulli(rng, params.weight_replace_rate))
            c.weight = uniform(rng, -params.init_weight_range, params.init_weight_range);
        else
            c.weight += normal(rng, 0.0, params.weight_perturb_scale);
        c.weight = std::clamp(c.weight, -params.weight_limit, params.weight_limit);
    }
}

void mutate_activation(CppnGenome& g, Rng& rng)
{
    std::vector<int> hidden;
    for (const auto& n : g.nodes())
        if (n.role == NodeRole::Hidden)
            hidden.push_back(n.id);
    if (hidden.empty())
        return;
    g.find_node(hidden[pick(rng, hidden.size())])->activation = random_activation(rng);
}

std::vector<double> sanitize_fitness(std::span<const double> fitnesses)
{
    double worst = std::numeric_limits<double>::infinity();
    for (double f : fitnesses)
        if (std::isfinite(f))
            worst = std::min(worst, f);
    if (!std::isfinite(worst))
        throw Error("next_generation: no finite fitness value");
    std::vector<double> out(fitnesses.begin(), fitnesses.end());
    for (double& f : out)
        if (!std::isfinite(f))
            f = worst;
    return out;
}

} // namespace

void NeatParams::validate() const
{
    check_probability(add_node_rate, "add_node_rate");
    check_probability(add_connection_rate, "add_connection_rate");
    check_probability(weight_mutation_rate, "weight_mutation_rate");
    check_probability(weight_replace_rate, "weight_replace_rate");
    check_probability(activation_mutation_rate, "activation_mutation_rate");
    check_probability(crossover_rate, "crossover_rate");
    check_probability(survival_fraction, "survival_fraction");
    if (population_size == 0)
        throw ConfigError("neat.population_size must be positive");
    if (elitism > population_size)
        throw ConfigError("neat.elitism exceeds population size");
    if (!(weight_perturb_scale >= 0.0) || !(weight_limit > 0.0) || !(init_weight_range >= 0.0))
        throw ConfigError("neat weight parameters must be non-negative");
    if (!(compatibility_threshold > 0.0))
        throw ConfigError("neat.compatibility_threshold must be positive");
    if (stagnation_limit < 1)
        throw ConfigError("neat.stagnation_limit must be at least 1");
}

int InnovationTracker::connection_innovation(int source, int target)
{
    auto [it, inserted] = connections_.try_emplace({source, target}, next_innovation_);
    if (inserted)
        ++next_innovation_;
    return it->second;
}

int InnovationTracker::split_node(int split_innovation, const CppnGenome& genome)
{
    auto& ids = splits_[split_innovation];
    for (int id : ids)
        if (genome.find_node(id) == nullptr)
            return id;
    ids.push_back(next_node_id_);
    return next_node_id_++;
}

NeatPopulation NeatPopulation::initial(const NeatParams& params, Rng& rng)
{
    params.validate();
    NeatPopulation pop;
    // Same innovation numbers for the shared initial topology.
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < kNumInputs; ++i)
        for (int o = 0; o < kNumOutputs; ++o)
            edges.emplace_back(i, kNumInputs + o);

    for (std::size_t k = 0; k < params.population_size; ++k) {
        CppnGenome g = CppnGenome::minimal();
        for (auto [src, dst] : edges) {
            double w = uniform(rng, -params.init_weight_range, params.init_weight_range);
            g.add_connection({pop.tracker.connection_innovation(src, dst), src, dst, w, true});
        }
        pop.genomes.push_back(std::move(g));
    }
    speciate(pop, params);
    return pop;
}

std::size_t NeatPopulation::species_of(std::size_t genome_index) const
{
    for (std::size_t s = 0; s < species.size(); ++s)
        for (std::size_t m : species[s].members)
            if (m == genome_index)
                return s;
    throw StructuralError("genome " + std::to_string(genome_index) + " has no species");
}

double compatibility_distance(const CppnGenome& a, const CppnGenome& b, const NeatParams& params)
{
    const auto& ca = a.connections();
    const auto& cb = b.connections();
    int max_a = ca.empty() ? -1 : ca.back().innovation;
    int max_b = cb.empty() ? -1 : cb.back().innovation;

    std::size_t i = 0;
    std::size_t j = 0;
    double excess = 0.0;
    double disjoint = 0.0;
    double weight_diff = 0.0;
    std::size_t matching = 0;
    while (i < ca.size() || j < cb.size()) {
        if (i < ca.size() && j < cb.size() && ca[i].innovation == cb[j].innovation) {
            weight_diff += std::abs(ca[i].weight - cb[j].weight);
            ++matching;
            ++i;
            ++j;
        } else if (j >= cb.size() || (i < ca.size() && ca[i].innovation < cb[j].innovation)) {
            (ca[i].innovation > max_b ? excess : disjoint) += 1.0;
            ++i;
        } else {
            (cb[j].innovation > max_a ? excess : disjoint) += 1.0;
            ++j;
        }
    }
    std::size_t larger = std::max(ca.size(), cb.size());
    double n = larger < 20 ? 1.0 : static_cast<double>(larger);
    double mean_w = matching > 0 ? weight_diff / static_cast<double>(matching) : 0.0;
    return params.excess_coeff * excess / n + params.disjoint_coeff * disjoint / n +
           params.weight_coeff * mean_w;
}

CppnGenome mutate(const CppnGenome& genome, const NeatParams& params, InnovationTracker& tracker,
                  Rng& rng)
{
    CppnGenome g = genome;
    if (bernoulli(rng, params.add_node_rate))
        mutate_add_node(g, tracker, rng);
    if (bernoulli(rng, params.add_connection_rate))
        mutate_add_connection(g, params, tracker, rng);
    if (bernoulli(rng, params.weight_mutation_rate))
        mutate_weights(g, params, rng);
    if (bernoulli(rng, params.activation_mutation_rate))
        mutate_activation(g, rng);
    return g;
}

CppnGenome crossover(const CppnGenome& fitter, const CppnGenome& other, Rng& rng)
{
    CppnGenome child = fitter;
    for (auto& c : child.connections()) {
        auto it = std::lower_bound(
            other.connections().begin(), other.connections().end(), c.innovation,
            [](const ConnectionGene& g, int v) { return g.innovation < v; });
        if (it == other.connections().end() || it->innovation != c.innovation)
            continue;
        if (bernoulli(rng, 0.5))
            c.weight = it->weight;
        bool either_disabled = !c.enabled || !it->enabled;
        c.enabled = either_disabled ? !bernoulli(rng, 0.75) : true;
    }
    child.set_fitness(0.0);
    return child;
}

void speciate(NeatPopulation& pop, const NeatParams& params)
{
    for (auto& s : pop.species)
        s.members.clear();
    for (std::size_t i = 0; i < pop.genomes.size(); ++i) {
        bool placed = false;
        for (auto& s : pop.species) {
            if (compatibility_distance(pop.genomes[i], s.representative, params) <
                params.compatibility_threshold) {
                s.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = pop.next_species_id++;
            s.representative = pop.genomes[i];
            s.members.push_back(i);
            s.last_improved = pop.generation;
            pop.species.push_back(std::move(s));
        }
    }
    std::erase_if(pop.species, [](const Species& s) { return s.members.empty(); });
}

std::vector<std::size_t> allocate_offspring(std::span<const double> scores, std::size_t total)
{
    std::vector<std::size_t> counts(scores.size(), 0);
    if (scores.empty())
        return counts;
    double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    std::vector<double> quota(scores.size());
    for (std::size_t s = 0; s < scores.size(); ++s)
        quota[s] = sum > 0.0 ? static_cast<double>(total) * scores[s] / sum
                             : static_cast<double>(total) / static_cast<double>(scores.size());

    std::size_t assigned = 0;
    for (std::size_t s = 0; s < scores.size(); ++s) {
        counts[s] = static_cast<std::size_t>(std::floor(quota[s]));
        assigned += counts[s];
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        ++counts[order[k]];
        ++assigned;
    }
    return counts;
}

NeatPopulation next_generation(const NeatPopulation& pop, std::span<const double> fitnesses,
                               const NeatParams& params, Rng& rng)
{
    params.validate();
    if (fitnesses.size() != pop.genomes.size())
        throw DimensionError("next_generation: one fitness per genome required");
    const std::vector<double> fit = sanitize_fitness(fitnesses);
    const std::size_t size = pop.genomes.size();

    std::vector<CppnGenome> scored = pop.genomes;
    for (std::size_t i = 0; i < size; ++i)
        scored[i].set_fitness(fit[i]);

    std::vector<std::size_t> ranked(size);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
    const std::size_t best = ranked.front();

    // Species bookkeeping and stagnation.
    std::vector<Species> species = pop.species;
    for (auto& s : species) {
        double top = -std::numeric_limits<double>::infinity();
        std::size_t champion = s.members.front();
        for (std::size_t m : s.members)
            if (fit[m] > top) {
                top = fit[m];
                champion = m;
            }
        if (!s.has_best || top > s.best_fitness) {
            s.best_fitness = top;
            s.last_improved = pop.generation;
            s.has_best = true;
        }
        s.representative = scored[champion];
    }
    std::erase_if(species, [&](const Species& s) {
        bool holds_best = std::find(s.members.begin(), s.members.end(), best) != s.members.end();
        return !holds_best && pop.generation - s.last_improved >= params.stagnation_limit;
    });

    NeatPopulation next;
    next.tracker = pop.tracker;
    next.next_species_id = pop.next_species_id;
    next.generation = pop.generation + 1;

    const std::size_t elites = std::min(params.elitism, size);
    for (std::size_t e = 0; e < elites; ++e)
        next.genomes.push_back(scored[ranked[e]]);

    double fmin = std::numeric_limits<double>::infinity();
    double fmax = -std::numeric_limits<double>::infinity();
    for (const auto& s : species)
        for (std::size_t m : s.members) {
            fmin = std::min(fmin, fit[m]);
            fmax = std::max(fmax, fit[m]);
        }
    const double floor_share = 0.1 * (fmax - fmin);
    std::vector<double> scores;
    for (const auto& s : species) {
        double score = 0.0;
        for (std::size_t m : s.members)
            score += fmax > fmin ? fit[m] - fmin + floor_share : 1.0;
        scores.push_back(score);
    }
    const auto counts = allocate_offspring(scores, size - elites);

    for (std::size_t s = 0; s < species.size(); ++s) {
        std::vector<std::size_t> members = species[s].members;
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
        auto pool_size = static_cast<std::size_t>(
            std::ceil(params.survival_fraction * static_cast<double>(members.size())));
        pool_size = std::clamp<std::size_t>(pool_size, 1, members.size());

        for (std::size_t k = 0; k < counts[s]; ++k) {
            std::size_t p1 = members[pick(rng, pool_size)];
            CppnGenome child;
            if (pool_size >= 2 && bernoulli(rng, params.crossover_rate)) {
                std::size_t p2 = p1;
                while (p2 == p1)
                    p2 = members[pick(rng, pool_size)];
                bool first_fitter = fit[p1] > fit[p2] || (fit[p1] == fit[p2] && p1 < p2);
                child = first_fitter ? crossover(scored[p1], scored[p2], rng)
                                     : crossover(scored[p2], scored[p1], rng);
            } else {
                child = scored[p1];
            }
            child = mutate(child, params, next.tracker, rng);
            child.set_fitness(0.0);
            next.genomes.push_back(std::move(child));
        }
    }

    next.species = std::move(species);
    speciate(next, params);
    return next;
}

} // namespace melai::neat
