#include "melai/results.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace melai::results {

namespace fs = std::filesystem;

std::size_t Table::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw Error("no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(const std::string& name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

double Table::number(std::size_t row, const std::string& name) const
{
    const std::string& cell = rows.at(row).at(column(name));
    try {
        return std::stod(cell);
    } catch (const std::exception&) {
        return std::nan("");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

} // namespace

Table read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    Table t;
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("'" + path.string() + "' is empty");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ParseError("'" + path.string() + "': row width differs from header");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::vector<fs::path> find_runs(const fs::path& dir)
{
    if (fs::exists(dir / "generations.csv"))
        return {dir};
    std::vector<fs::path> out;
    if (!fs::is_directory(dir))
        return out;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() == "generations.csv")
            out.push_back(entry.path().parent_path());
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<int> RunData::last_complete_generation() const
{
    std::optional<int> last;
    for (std::size_t r = 0; r < generations.rows.size(); ++r)
        if (generations.number(r, "truncated") == 0.0)
            last = static_cast<int>(generations.number(r, "generation"));
    return last;
}

std::optional<double> RunData::metric(const std::string& name, int generation) const
{
    for (std::size_t r = 0; r < generations.rows.size(); ++r)
        if (static_cast<int>(generations.number(r, "generation")) == generation) {
            double v = generations.number(r, name);
            if (std::isnan(v))
                return std::nullopt;
            return v;
        }
    return std::nullopt;
}

RunData load_run(const fs::path& dir)
{
    RunData d;
    d.dir = dir;
    d.generations = read_csv(dir / "generations.csv");
    if (fs::exists(dir / "individuals.csv"))
        d.individuals = read_csv(dir / "individuals.csv");
    return d;
}

std::vector<RunData> load_runs(const fs::path& dir)
{
    std::vector<RunData> out;
    for (const auto& p : find_runs(dir))
        out.push_back(load_run(p));
    return out;
}

std::optional<int> common_final_generation(const std::vector<const RunData*>& runs)
{
    std::optional<int> g;
    for (const auto* r : runs) {
        auto last = r->last_complete_generation();
        if (!last)
            return std::nullopt;
        g = g ? std::min(*g, *last) : *last;
    }
    return g;
}

Comparison compare_metric(const std::vector<RunData>& a, const std::vector<RunData>& b, const std::string& metric,
                          std::optional<int> generation)
{
    if (a.empty() || b.empty())
        throw Error("compare: both groups need at least one run");
    std::vector<const RunData*> all;
    for (const auto& r : a)
        all.push_back(&r);
    for (const auto& r : b)
        all.push_back(&r);
    if (!all.front()->generations.has_column(metric))
        throw Error("compare: unknown metric '" + metric + "'");
    Comparison c;
    auto g = generation ? generation : common_final_generation(all);
    if (!g)
        throw Error("compare: no generation is complete in every run");
    c.generation = *g;
    for (const auto& r : a)
        if (auto v = r.metric(metric, *g))
            c.a.push_back(*v);
    for (const auto& r : b)
        if (auto v = r.metric(metric, *g))
            c.b.push_back(*v);
    if (c.a.empty() || c.b.empty())
        throw Error("compare: metric '" + metric + "' has no values at generation " + std::to_string(*g));
    c.test = stats::mann_whitney(c.a, c.b);
    return c;
}

} // namespace melai::results
