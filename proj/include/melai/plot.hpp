#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace melai::plot {

/// One curve: a median line and, where lower != upper, a shaded band.
struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> median;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Median and interquartile band of `samples[i]` at `x[i]`. Empty samples
/// are skipped.
Series quartile_series(const std::string& name, const std::vector<double>& x,
                       const std::vector<std::vector<double>>& samples);

void write_line_chart(std::ostream& os, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series);

struct Bars {
    std::string name;
    std::vector<double> values;
};

/// Grouped bars: one group per category, one bar per entry of `bars`.
void write_bar_chart(std::ostream& os, const std::string& title, const std::vector<std::string>& categories,
                     const std::vector<Bars>& bars);

} // namespace melai::plot
