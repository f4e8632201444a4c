#include "melai/cppn.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <utility>

namespace melai::neat {

double activate(Activation fn, double x)
{
    switch (fn) {
    case Activation::Sigmoid:
        return 1.0 / (1.0 + std::exp(-x));
    case Activation::Sine:
        return std::sin(x);
    case Activation::Gaussian:
        return std::exp(-x * x);
    case Activation::Linear:
        return x;
    case Activation::Absolute:
        return std::abs(x);
    }
    return x;
}

std::string_view to_string(Activation fn)
{
    switch (fn) {
    case Activation::Sigmoid:
        return "sigmoid";
    case Activation::Sine:
        return "sine";
    case Activation::Gaussian:
        return "gaussian";
    case Activation::Linear:
        return "linear";
    case Activation::Absolute:
        return "absolute";
    }
    return "?";
}

std::string_view to_string(NodeRole role)
{
    switch (role) {
    case NodeRole::Input:
        return "input";
    case NodeRole::Hidden:
        return "hidden";
    case NodeRole::Output:
        return "output";
    }
    return "?";
}

Activation parse_activation(std::string_view name)
{
    for (Activation fn : kHiddenActivations)
        if (to_string(fn) == name)
            return fn;
    throw ParseError("unknown activation '" + std::string(name) + "'");
}

NodeRole parse_role(std::string_view name)
{
    for (NodeRole role : {NodeRole::Input, NodeRole::Hidden, NodeRole::Output})
        if (to_string(role) == name)
            return role;
    throw ParseError("unknown node role '" + std::string(name) + "'");
}

CppnGenome::CppnGenome() = default;

CppnGenome CppnGenome::minimal()
{
    CppnGenome g;
    for (int i = 0; i < kNumInputs; ++i)
        g.nodes_.push_back({i, NodeRole::Input, Activation::Linear});
    for (int i = 0; i < kNumOutputs; ++i)
        g.nodes_.push_back({kNumInputs + i, NodeRole::Output, Activation::Sigmoid});
    return g;
}

const NodeGene* CppnGenome::find_node(int id) const
{
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const NodeGene& n, int v) { return n.id < v; });
    return it != nodes_.end() && it->id == id ? &*it : nullptr;
}

NodeGene* CppnGenome::find_node(int id)
{
    return const_cast<NodeGene*>(std::as_const(*this).find_node(id));
}

const ConnectionGene* CppnGenome::find_connection(int source, int target) const
{
    for (const auto& c : connections_)
        if (c.source == source && c.target == target)
            return &c;
    return nullptr;
}

bool CppnGenome::has_innovation(int innovation) const
{
    auto it = std::lower_bound(
        connections_.begin(), connections_.end(), innovation,
        [](const ConnectionGene& c, int v) { return c.innovation < v; });
    return it != connections_.end() && it->innovation == innovation;
}

void CppnGenome::add_node(NodeGene node)
{
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node.id,
                               [](const NodeGene& n, int v) { return n.id < v; });
    if (it != nodes_.end() && it->id == node.id)
        throw StructuralError("duplicate node id " + std::to_string(node.id));
    nodes_.insert(it, node);
}

void CppnGenome::add_connection(ConnectionGene conn)
{
    auto it = std::lower_bound(
        connections_.begin(), connections_.end(), conn.innovation,
        [](const ConnectionGene& c, int v) { return c.innovation < v; });
    if (it != connections_.end() && it->innovation == conn.innovation)
        throw StructuralError("duplicate innovation " + std::to_string(conn.innovation));
    connections_.insert(it, conn);
}

void CppnGenome::set_output_activation(CppnOutput out, Activation fn)
{
    find_node(output_node_id(out))->activation = fn;
}

int CppnGenome::max_node_id() const
{
    return nodes_.empty() ? -1 : nodes_.back().id;
}

std::size_t CppnGenome::num_hidden() const
{
    return static_cast<std::size_t>(std::count_if(
        nodes_.begin(), nodes_.end(), [](const NodeGene& n) { return n.role == NodeRole::Hidden; }));
}

bool CppnGenome::creates_cycle(int source, int target) const
{
    if (source == target)
        return true;
    // Search forward from target; reaching source means target ~> source.
    std::vector<int> stack{target};
    std::set<int> seen{target};
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        for (const auto& c : connections_) {
            if (c.source != n)
                continue;
            if (c.target == source)
                return true;
            if (seen.insert(c.target).second)
                stack.push_back(c.target);
        }
    }
    return false;
}

void CppnGenome::validate() const
{
    int inputs = 0;
    int outputs = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (i > 0 && nodes_[i - 1].id >= n.id)
            throw StructuralError("node ids not strictly increasing");
        if (n.role == NodeRole::Input) {
            if (n.id >= kNumInputs)
                throw StructuralError("input node with id " + std::to_string(n.id));
            ++inputs;
        } else if (n.role == NodeRole::Output) {
            if (n.id < kNumInputs || n.id >= kNumInputs + kNumOutputs)
                throw StructuralError("output node with id " + std::to_string(n.id));
            ++outputs;
        } else if (n.id < kNumInputs + kNumOutputs) {
            throw StructuralError("hidden node uses reserved id " + std::to_string(n.id));
        }
    }
    if (inputs != kNumInputs || outputs != kNumOutputs)
        throw StructuralError("genome must have 4 inputs and 5 outputs");

    for (std::size_t i = 0; i < connections_.size(); ++i) {
        const auto& c = connections_[i];
        if (i > 0 && connections_[i - 1].innovation >= c.innovation)
            throw StructuralError("innovation ids not strictly increasing");
        const NodeGene* src = find_node(c.source);
        const NodeGene* dst = find_node(c.target);
        if (src == nullptr || dst == nullptr)
            throw StructuralError("dangling connection " + std::to_string(c.innovation));
        if (dst->role == NodeRole::Input)
            throw StructuralError("connection into input node");
        if (src->role == NodeRole::Output)
            throw StructuralError("connection out of output node");
        if (!std::isfinite(c.weight))
            throw StructuralError("non-finite weight on connection " + std::to_string(c.innovation));
    }

    // Kahn's algorithm over all genes detects cycles.
    std::map<int, int> indegree;
    for (const auto& n : nodes_)
        indegree[n.id] = 0;
    for (const auto& c : connections_)
        ++indegree[c.target];
    std::queue<int> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0)
            ready.push(id);
    std::size_t visited = 0;
    while (!ready.empty()) {
        int n = ready.front();
        ready.pop();
        ++visited;
        for (const auto& c : connections_)
            if (c.source == n && --indegree[c.target] == 0)
                ready.push(c.target);
    }
    if (visited != nodes_.size())
        throw StructuralError("CPPN contains a cycle");
}

Cppn::Cppn(const CppnGenome& genome)
{
    genome.validate();

    // Non-input nodes in topological order; ties broken by node id.
    std::map<int, int> indegree;
    for (const auto& n : genome.nodes())
        if (n.role != NodeRole::Input)
            indegree[n.id] = 0;
    for (const auto& c : genome.connections())
        if (c.enabled)
            ++indegree[c.target];

    std::map<int, int> slot_of;
    for (int i = 0; i < kNumInputs; ++i)
        slot_of[i] = i;

    std::set<int> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0)
            ready.insert(id);
    // Edges leaving inputs are already satisfied.
    std::map<int, int> pending = indegree;
    for (const auto& c : genome.connections())
        if (c.enabled && c.source < kNumInputs && --pending[c.target] == 0)
            ready.insert(c.target);

    std::vector<int> order;
    while (!ready.empty()) {
        int n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        slot_of[n] = kNumInputs + static_cast<int>(order.size()) - 1;
        for (const auto& c : genome.connections())
            if (c.enabled && c.source == n && --pending[c.target] == 0)
                ready.insert(c.target);
    }

    units_.reserve(order.size());
    for (int id : order) {
        Unit u{genome.find_node(id)->activation, {}};
        for (const auto& c : genome.connections())
            if (c.enabled && c.target == id)
                u.incoming.push_back({slot_of.at(c.source), c.weight});
        units_.push_back(std::move(u));
    }
    for (int k = 0; k < kNumOutputs; ++k)
        output_slots_[static_cast<std::size_t>(k)] = slot_of.at(kNumInputs + k);
}

std::array<double, kNumOutputs> Cppn::query(double x, double y, double z, double d) const
{
    std::vector<double> values(static_cast<std::size_t>(kNumInputs) + units_.size());
    values[0] = x;
    values[1] = y;
    values[2] = z;
    values[3] = d;
    for (std::size_t u = 0; u < units_.size(); ++u) {
        double sum = 0.0;
        for (const auto& e : units_[u].incoming)
            sum += e.weight * values[static_cast<std::size_t>(e.source_slot)];
        values[kNumInputs + u] = activate(units_[u].activation, sum);
    }
    std::array<double, kNumOutputs> out{};
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = values[static_cast<std::size_t>(output_slots_[k])];
    return out;
}

std::array<double, kNumOutputs> query_cppn(const CppnGenome& genome, double x, double y, double z,
                                           double d)
{
    return Cppn(genome).query(x, y, z, d);
}

void write_genome(std::ostream& os, const CppnGenome& genome)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "cppn 1\n";
    out << "fitness " << genome.fitness() << '\n';
    out << "nodes " << genome.nodes().size() << '\n';
    for (const auto& n : genome.nodes())
        out << n.id << ' ' << to_string(n.role) << ' ' << to_string(n.activation) << '\n';
    out << "connections " << genome.connections().size() << '\n';
    for (const auto& c : genome.connections())
        out << c.innovation << ' ' << c.source << ' ' << c.target << ' ' << c.weight << ' '
            << (c.enabled ? 1 : 0) << '\n';
    os << out.str();
}

namespace {

void expect_token(std::istream& is, std::string_view expected)
{
    std::string tok;
    if (!(is >> tok) || tok != expected)
        throw ParseError("expected '" + std::string(expected) + "', got '" + tok + "'");
}

} // namespace

CppnGenome read_genome(std::istream& is)
{
    expect_token(is, "cppn");
    int version = 0;
    is >> version;
    if (version != 1)
        throw ParseError("unsupported cppn format version");

    CppnGenome g;
    double fitness = 0.0;
    expect_token(is, "fitness");
    is >> fitness;
    g.set_fitness(fitness);

    std::size_t count = 0;
    expect_token(is, "nodes");
    is >> count;
    for (std::size_t i = 0; i < count; ++i) {
        NodeGene n;
        std::string role;
        std::string act;
        if (!(is >> n.id >> role >> act))
            throw ParseError("truncated node list");
        n.role = parse_role(role);
        n.activation = parse_activation(act);
        g.add_node(n);
    }
    expect_token(is, "connections");
    is >> count;
    for (std::size_t i = 0; i < count; ++i) {
        ConnectionGene c;
        int enabled = 0;
        if (!(is >> c.innovation >> c.source >> c.target >> c.weight >> enabled))
            throw ParseError("truncated connection list");
        c.enabled = enabled != 0;
        g.add_connection(c);
    }
    g.validate();
    return g;
}

} // namespace melai::neat
