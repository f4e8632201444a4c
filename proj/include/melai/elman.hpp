#pragma once

#include "melai/morphogen.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace melai::control {

/// Elman network sized to a robot type: two inputs per sensor, one output
/// per wheel and joint, a hidden layer and a self-recurrent context layer
/// fed back into the hidden layer. Every unit is a sigmoid.
///
/// Flat parameter layout:
///   W_in  (hidden x inputs, row-major)
///   W_ctx (hidden x hidden, row-major), context -> hidden
///   self  (hidden), context self-recurrence
///   W_out (outputs x hidden, row-major)
///   b_h   (hidden)
///   b_o   (outputs)
class ElmanController {
public:
    /// Throws StructuralError when the type has no actuator or hidden_size < 1.
    static ElmanController build(const morph::RobotType& type, int hidden_size);

    static std::size_t param_count(std::size_t inputs, std::size_t hidden, std::size_t outputs);

    const morph::RobotType& type() const { return type_; }
    std::size_t num_inputs() const { return inputs_; }
    std::size_t num_outputs() const { return outputs_; }
    std::size_t hidden_size() const { return hidden_; }
    std::size_t num_params() const { return params_.size(); }

    std::span<const double> params() const { return params_; }
    /// Replaces every weight and clears the context.
    void set_params(std::span<const double> theta);

    /// One control step; updates the context layer.
    void forward(std::span<const double> inputs, std::span<double> outputs);
    std::vector<double> forward(std::span<const double> inputs);

    void reset_context();
    std::span<const double> context() const { return context_; }

    friend bool operator==(const ElmanController&, const ElmanController&) = default;

private:
    ElmanController(const morph::RobotType& type, std::size_t hidden);

    morph::RobotType type_;
    std::size_t inputs_ = 0;
    std::size_t hidden_ = 0;
    std::size_t outputs_ = 0;
    std::vector<double> params_;
    std::vector<double> context_;
    std::vector<double> hidden_values_;
};

/// Type tuple, hidden size and weights; 17 significant digits.
void write_controller(std::ostream& os, const ElmanController& ctrl);
ElmanController read_controller(std::istream& is);

} // namespace melai::control
