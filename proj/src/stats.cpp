#include "melai/stats.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace melai::stats {

double quantile(std::span<const double> values, double q)
{
    if (values.empty())
        throw Error("quantile of an empty sample");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

std::vector<double> midranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]])
            ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty())
        throw Error("mann_whitney: both samples must be non-empty");
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    const std::size_t n = n1 + n2;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);

    MannWhitneyResult res;
    double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);
    const double dn1 = static_cast<double>(n1);
    const double dn2 = static_cast<double>(n2);
    res.u1 = r1 - dn1 * (dn1 + 1.0) / 2.0;
    res.u2 = dn1 * dn2 - res.u1;
    res.u = std::min(res.u1, res.u2);
    res.median_a = median(a);
    res.median_b = median(b);
    const double mu = dn1 * dn2 / 2.0;

    if (std::min(n1, n2) >= 8) {
        std::vector<double> sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        double tie_term = 0.0;
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j < n && sorted[j] == sorted[i])
                ++j;
            double t = static_cast<double>(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
        const double dn = static_cast<double>(n);
        double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
        if (var <= 0.0) {
            res.p = 1.0;
            return res;
        }
        res.z = (std::abs(res.u1 - mu) - 0.5) / std::sqrt(var);
        res.p = res.z <= 0.0 ? 1.0 : std::min(1.0, std::erfc(res.z / std::sqrt(2.0)));
        return res;
    }

    // Exact: distribution of the doubled rank sum of n1 values drawn from
    // the pooled mid-ranks, counted by dynamic programming.
    res.exact = true;
    std::vector<long> doubled(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        doubled[i] = std::lround(2.0 * ranks[i]);
        total += doubled[i];
    }
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = std::min(i + 1, n1); k >= 1; --k)
            for (long s = total; s >= doubled[i]; --s)
                ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - doubled[i])];
    double count_all = 0.0;
    double count_extreme = 0.0;
    const double observed = std::abs(res.u1 - mu);
    const double offset = dn1 * (dn1 + 1.0) / 2.0;
    for (long s = 0; s <= total; ++s) {
        double w = ways[n1][static_cast<std::size_t>(s)];
        if (w == 0.0)
            continue;
        count_all += w;
        double u = static_cast<double>(s) / 2.0 - offset;
        if (std::abs(u - mu) >= observed - 1e-9)
            count_extreme += w;
    }
    res.p = std::min(1.0, count_extreme / count_all);
    return res;
}

} // namespace melai::stats
