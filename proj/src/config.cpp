#include "melai/config.hpp"

#include "melai/error.hpp"
#include "melai/random.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace melai::config {

namespace pt = boost::property_tree;
using experiment::RunConfig;

namespace {

struct Field {
    std::string section;
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

template <class T>
std::string format_value(const T& v)
{
    std::ostringstream os;
    if constexpr (std::is_same_v<T, bool>)
        os << (v ? "true" : "false");
    else
        os << std::setprecision(17) << v;
    return os.str();
}

template <class T>
T parse_value(const std::string& field, const std::string& text)
{
    std::string s = boost::trim_copy(text);
    if constexpr (std::is_same_v<T, bool>) {
        std::string l = boost::to_lower_copy(s);
        if (l == "true" || l == "1" || l == "yes")
            return true;
        if (l == "false" || l == "0" || l == "no")
            return false;
        throw ConfigError(field + ": expected a boolean, got '" + s + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
        return s;
    } else {
        try {
            return boost::lexical_cast<T>(s);
        } catch (const boost::bad_lexical_cast&) {
            throw ConfigError(field + ": cannot parse '" + s + "'");
        }
    }
}

template <class T>
Field field(const std::string& section, const std::string& key, T& ref)
{
    std::string name = section + "." + key;
    return {section, key, [&ref, name](const std::string& s) { ref = parse_value<T>(name, s); },
            [&ref] { return format_value(ref); }};
}

std::vector<Field> fields(RunConfig& c)
{
    std::vector<Field> f;
    f.push_back(field("run", "environment", c.environment));
    f.push_back(field("run", "environment_file", c.environment_file));
    f.push_back(field("run", "use_archive", c.use_archive));
    f.push_back(field("run", "per_body_budget", c.per_body_budget));
    f.push_back(field("run", "generations", c.generations));
    f.push_back(field("run", "total_budget", c.total_budget));
    f.push_back(field("run", "seed", c.seed));
    f.push_back(field("run", "replicate", c.replicate));
    f.push_back({"run", "archive_mode",
                 [&c](const std::string& s) { c.archive_mode = experiment::parse_archive_mode(boost::trim_copy(s)); },
                 [&c] { return experiment::to_string(c.archive_mode); }});
    f.push_back(field("run", "workers", c.workers));
    f.push_back(field("run", "learner_logs", c.learner_logs));

    auto& n = c.neat;
    f.push_back(field("neat", "population_size", n.population_size));
    f.push_back(field("neat", "add_node_rate", n.add_node_rate));
    f.push_back(field("neat", "add_connection_rate", n.add_connection_rate));
    f.push_back(field("neat", "weight_mutation_rate", n.weight_mutation_rate));
    f.push_back(field("neat", "weight_replace_rate", n.weight_replace_rate));
    f.push_back(field("neat", "weight_perturb_scale", n.weight_perturb_scale));
    f.push_back(field("neat", "activation_mutation_rate", n.activation_mutation_rate));
    f.push_back(field("neat", "weight_limit", n.weight_limit));
    f.push_back(field("neat", "init_weight_range", n.init_weight_range));
    f.push_back(field("neat", "crossover_rate", n.crossover_rate));
    f.push_back(field("neat", "excess_coeff", n.excess_coeff));
    f.push_back(field("neat", "disjoint_coeff", n.disjoint_coeff));
    f.push_back(field("neat", "weight_coeff", n.weight_coeff));
    f.push_back(field("neat", "compatibility_threshold", n.compatibility_threshold));
    f.push_back(field("neat", "elitism", n.elitism));
    f.push_back(field("neat", "stagnation_limit", n.stagnation_limit));
    f.push_back(field("neat", "survival_fraction", n.survival_fraction));

    auto& m = c.morph;
    f.push_back(field("morphogen", "grid_resolution", m.grid_resolution));
    f.push_back(field("morphogen", "skeleton_threshold", m.skeleton_threshold));
    f.push_back(field("morphogen", "organ_threshold", m.organ_threshold));
    f.push_back(field("morphogen", "max_head_active", m.max_head_active));
    f.push_back(field("morphogen", "max_total_active", m.max_total_active));
    f.push_back(field("morphogen", "max_active_per_subsegment", m.max_active_per_subsegment));

    f.push_back(field("controller", "hidden_size", c.hidden_size));

    auto& a = c.arena;
    f.push_back(field("arena", "control_rate_hz", a.control_rate_hz));
    f.push_back(field("arena", "sim_time_s", a.sim_time_s));
    f.push_back(field("arena", "wheel_max_speed", a.wheel_max_speed));
    f.push_back(field("arena", "joint_max_frequency", a.joint_max_frequency));
    f.push_back(field("arena", "joint_efficiency", a.joint_efficiency));
    f.push_back(field("arena", "sensor_fov_deg", a.sensor_fov_deg));
    f.push_back(field("arena", "sensor_range_m", a.sensor_range_m));
    f.push_back(field("arena", "max_linear_speed", a.max_linear_speed));
    f.push_back(field("arena", "max_angular_speed", a.max_angular_speed));
    f.push_back(field("arena", "moved_threshold_m", a.moved_threshold_m));
    f.push_back(field("arena", "min_footprint_radius_m", a.min_footprint_radius_m));
    f.push_back(field("arena", "max_footprint_radius_m", a.max_footprint_radius_m));

    auto& p = c.nipes;
    f.push_back(field("nipes", "sigma0", p.sigma0));
    f.push_back(field("nipes", "lambda0", p.lambda0));
    f.push_back(field("nipes", "eta0", p.eta0));
    f.push_back(field("nipes", "eta_decrement", p.eta_decrement));
    f.push_back(field("nipes", "novelty_k", p.novelty_k));
    f.push_back(field("nipes", "archive_add_probability", p.archive_add_probability));
    f.push_back(field("nipes", "archive_novelty_threshold", p.archive_novelty_threshold));
    f.push_back(field("nipes", "stagnation_window", p.stagnation_window));
    f.push_back(field("nipes", "stagnation_threshold", p.stagnation_threshold));
    f.push_back(field("nipes", "diversity_threshold", p.diversity_threshold));
    f.push_back(field("nipes", "trial_period", p.trial_period));
    f.push_back(field("nipes", "success_threshold", p.success_threshold));
    f.push_back(field("nipes", "init_mean_range", p.init_mean_range));
    f.push_back(field("nipes", "novelty_enabled", p.novelty_enabled));
    f.push_back(field("nipes", "restarts_enabled", p.restarts_enabled));
    return f;
}

pt::ptree parse_ini(std::istream& is)
{
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return tree;
}

RunConfig apply(const pt::ptree& tree, const std::set<std::string>& extra_sections)
{
    RunConfig c;
    auto binds = fields(c);
    std::map<std::string, std::map<std::string, Field*>> index;
    for (auto& f : binds)
        index[f.section][f.key] = &f;

    for (const auto& [section, body] : tree) {
        if (extra_sections.contains(section))
            continue;
        auto sit = index.find(section);
        if (sit == index.end())
            throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            auto kit = sit->second.find(key);
            if (kit == sit->second.end())
                throw ConfigError("config: unknown key " + section + "." + key);
            kit->second->set(value.data());
        }
    }
    auto run = tree.get_child_optional("run");
    if (!run || (!run->get_optional<std::string>("environment") && !run->get_optional<std::string>("environment_file")))
        throw ConfigError("run.environment: missing environment name");
    return c;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(","));
    std::vector<std::string> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (!p.empty())
            out.push_back(p);
    }
    return out;
}

} // namespace

RunConfig read_config(std::istream& is)
{
    RunConfig c = apply(parse_ini(is), {"matrix"});
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return read_config(in);
}

void write_config(std::ostream& os, const RunConfig& config)
{
    RunConfig copy = config;
    std::string section;
    std::ostringstream out;
    for (const auto& f : fields(copy)) {
        if (f.section != section) {
            if (!section.empty())
                out << '\n';
            section = f.section;
            out << '[' << section << "]\n";
        }
        out << f.key << " = " << f.get() << '\n';
    }
    os << out.str();
}

MatrixConfig read_matrix_config(std::istream& is)
{
    pt::ptree tree = parse_ini(is);
    MatrixConfig m;
    m.base = apply(tree, {"matrix"});
    if (auto sec = tree.get_child_optional("matrix")) {
        for (const auto& [key, value] : *sec) {
            const std::string v = value.data();
            if (key == "environments") {
                m.environments = split_list(v);
            } else if (key == "variants") {
                m.variants.clear();
                for (const auto& name : split_list(v)) {
                    std::string l = boost::to_lower_copy(name);
                    if (l == "mel")
                        m.variants.push_back(false);
                    else if (l == "melai")
                        m.variants.push_back(true);
                    else
                        throw ConfigError("matrix.variants: unknown variant '" + name + "'");
                }
            } else if (key == "splits") {
                m.splits.clear();
                for (const auto& item : split_list(v)) {
                    auto x = item.find('x');
                    if (x == std::string::npos)
                        throw ConfigError("matrix.splits: expected BUDGETxGENERATIONS, got '" + item + "'");
                    m.splits.push_back({parse_value<long>("matrix.splits", item.substr(0, x)),
                                        parse_value<int>("matrix.splits", item.substr(x + 1))});
                }
            } else if (key == "replicates") {
                m.replicates = parse_value<int>("matrix.replicates", v);
            } else if (key == "master_seed") {
                m.master_seed = parse_value<std::uint64_t>("matrix.master_seed", v);
            } else {
                throw ConfigError("config: unknown key matrix." + key);
            }
        }
    }
    if (m.environments.empty() || m.variants.empty() || m.splits.empty() || m.replicates < 1)
        throw ConfigError("matrix: environments, variants, splits and replicates must be non-empty");
    m.base.validate();
    return m;
}

MatrixConfig load_matrix_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return read_matrix_config(in);
}

std::uint64_t replicate_seed(std::uint64_t master_seed, int replicate)
{
    Rng rng = derive_rng(master_seed, {0x5eedULL, static_cast<std::uint64_t>(replicate)});
    return rng();
}

std::vector<MatrixEntry> expand_matrix(const MatrixConfig& matrix, int replicates)
{
    std::vector<MatrixEntry> out;
    for (const auto& env : matrix.environments)
        for (const auto& split : matrix.splits)
            for (bool use_archive : matrix.variants)
                for (int r = 0; r < replicates; ++r) {
                    MatrixEntry e;
                    e.config = matrix.base;
                    e.config.environment = env;
                    e.config.environment_file.clear();
                    e.config.use_archive = use_archive;
                    e.config.per_body_budget = split.per_body_budget;
                    e.config.generations = split.generations;
                    e.config.replicate = r;
                    e.config.seed = replicate_seed(matrix.master_seed, r);
                    e.name = env + "/" + e.config.variant() + "_" + std::to_string(split.per_body_budget) + "x" +
                             std::to_string(split.generations) + "/rep_" + std::to_string(r);
                    out.push_back(std::move(e));
                }
    return out;
}

} // namespace melai::config
