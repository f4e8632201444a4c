#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace melai::neat {

inline constexpr int kNumInputs = 4;
inline constexpr int kNumOutputs = 5;

/// Output channels of the body-plan CPPN.
enum class CppnOutput : int { Skeleton = 0, Wheel = 1, Sensor = 2, Joint = 3, Caster = 4 };

enum class NodeRole : std::uint8_t { Input, Hidden, Output };

enum class Activation : std::uint8_t { Sigmoid, Sine, Gaussian, Linear, Absolute };

inline constexpr std::array<Activation, 5> kHiddenActivations = {
    Activation::Sigmoid, Activation::Sine, Activation::Gaussian, Activation::Linear,
    Activation::Absolute};

double activate(Activation fn, double x);

std::string_view to_string(Activation fn);
std::string_view to_string(NodeRole role);
Activation parse_activation(std::string_view name);
NodeRole parse_role(std::string_view name);

struct NodeGene {
    int id = 0;
    NodeRole role = NodeRole::Hidden;
    Activation activation = Activation::Sigmoid;

    friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct ConnectionGene {
    int innovation = 0;
    int source = 0;
    int target = 0;
    double weight = 0.0;
    bool enabled = true;

    friend bool operator==(const ConnectionGene&, const ConnectionGene&) = default;
};

/// NEAT genome of a 4-input / 5-output feed-forward CPPN.
///
/// Node ids 0..3 are the inputs (x, y, z, d), ids 4..8 the outputs in
/// CppnOutput order. Nodes are kept sorted by id and connections by
/// innovation number.
class CppnGenome {
public:
    CppnGenome();

    /// Genome with the fixed input/output nodes and no connections.
    static CppnGenome minimal();

    const std::vector<NodeGene>& nodes() const { return nodes_; }
    const std::vector<ConnectionGene>& connections() const { return connections_; }
    std::vector<ConnectionGene>& connections() { return connections_; }

    double fitness() const { return fitness_; }
    void set_fitness(double f) { fitness_ = f; }

    const NodeGene* find_node(int id) const;
    NodeGene* find_node(int id);
    const ConnectionGene* find_connection(int source, int target) const;
    bool has_innovation(int innovation) const;

    void add_node(NodeGene node);
    void add_connection(ConnectionGene conn);
    void set_output_activation(CppnOutput out, Activation fn);

    int max_node_id() const;
    std::size_t num_hidden() const;

    /// True when a path target -> ... -> source exists over all connection
    /// genes (enabled or not), i.e. adding source -> target closes a cycle.
    bool creates_cycle(int source, int target) const;

    /// Throws StructuralError when an invariant is broken.
    void validate() const;

    friend bool operator==(const CppnGenome&, const CppnGenome&) = default;

private:
    std::vector<NodeGene> nodes_;
    std::vector<ConnectionGene> connections_;
    double fitness_ = 0.0;
};

inline constexpr int output_node_id(CppnOutput out) { return kNumInputs + static_cast<int>(out); }

/// A genome compiled into evaluation order. Query is a stateless point
/// evaluation.
class Cppn {
public:
    explicit Cppn(const CppnGenome& genome);

    std::array<double, kNumOutputs> query(double x, double y, double z, double d) const;

private:
    struct Edge {
        int source_slot;
        double weight;
    };
    struct Unit {
        Activation activation;
        std::vector<Edge> incoming;
    };

    // Slots 0..3 are inputs, then units in topological order.
    std::vector<Unit> units_;
    std::array<int, kNumOutputs> output_slots_{};
};

std::array<double, kNumOutputs> query_cppn(const CppnGenome& genome, double x, double y, double z,
                                           double d);

/// Line-oriented text format; see docs/file_formats.md.
void write_genome(std::ostream& os, const CppnGenome& genome);
CppnGenome read_genome(std::istream& is);

} // namespace melai::neat
