#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace melai {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0)
{
    return std::normal_distribution<double>(mean, stddev)(rng);
}

inline bool bernoulli(Rng& rng, double p)
{
    if (p <= 0.0)
        return false;
    if (p >= 1.0)
        return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

/// Uniform index in [0, n). n must be positive.
inline std::size_t pick(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Independent stream derived from a parent seed and a list of tags.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
{
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto t : tags) {
        words.push_back(static_cast<std::uint32_t>(t));
        words.push_back(static_cast<std::uint32_t>(t >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

} // namespace melai
