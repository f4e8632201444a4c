#include "melai/elman.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace melai::control {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

ElmanController::ElmanController(const morph::RobotType& type, std::size_t hidden)
    : type_(type),
      inputs_(2 * static_cast<std::size_t>(type.num_sensors)),
      hidden_(hidden),
      outputs_(static_cast<std::size_t>(type.num_actuators())),
      params_(param_count(inputs_, hidden_, outputs_), 0.0),
      context_(hidden_, 0.0),
      hidden_values_(hidden_, 0.0)
{}

ElmanController ElmanController::build(const morph::RobotType& type, int hidden_size)
{
    if (hidden_size < 1)
        throw StructuralError("controller hidden size must be at least 1");
    if (type.num_sensors < 0 || type.num_wheels < 0 || type.num_joints < 0)
        throw StructuralError("negative organ count in robot type");
    if (type.num_actuators() == 0)
        throw StructuralError("robot type has no actuator to control");
    return ElmanController(type, static_cast<std::size_t>(hidden_size));
}

std::size_t ElmanController::param_count(std::size_t inputs, std::size_t hidden,
                                         std::size_t outputs)
{
    return hidden * inputs + hidden * hidden + hidden + outputs * hidden + hidden + outputs;
}

void ElmanController::set_params(std::span<const double> theta)
{
    if (theta.size() != params_.size())
        throw DimensionError("controller expects " + std::to_string(params_.size()) +
                             " parameters, got " + std::to_string(theta.size()));
    params_.assign(theta.begin(), theta.end());
    reset_context();
}

void ElmanController::reset_context()
{
    std::fill(context_.begin(), context_.end(), 0.0);
}

void ElmanController::forward(std::span<const double> inputs, std::span<double> outputs)
{
    if (inputs.size() != inputs_)
        throw DimensionError("controller expects " + std::to_string(inputs_) + " inputs, got " +
                             std::to_string(inputs.size()));
    if (outputs.size() != outputs_)
        throw DimensionError("controller output buffer has wrong size");

    const double* w_in = params_.data();
    const double* w_ctx = w_in + hidden_ * inputs_;
    const double* self = w_ctx + hidden_ * hidden_;
    const double* w_out = self + hidden_;
    const double* b_h = w_out + outputs_ * hidden_;
    const double* b_o = b_h + hidden_;

    for (std::size_t i = 0; i < hidden_; ++i) {
        double sum = b_h[i];
        const double* row_in = w_in + i * inputs_;
        for (std::size_t k = 0; k < inputs_; ++k)
            sum += row_in[k] * inputs[k];
        const double* row_ctx = w_ctx + i * hidden_;
        for (std::size_t m = 0; m < hidden_; ++m)
            sum += row_ctx[m] * context_[m];
        hidden_values_[i] = sigmoid(sum);
    }
    for (std::size_t i = 0; i < hidden_; ++i)
        context_[i] = sigmoid(hidden_values_[i] + self[i] * context_[i]);
    for (std::size_t o = 0; o < outputs_; ++o) {
        double sum = b_o[o];
        const double* row = w_out + o * hidden_;
        for (std::size_t i = 0; i < hidden_; ++i)
            sum += row[i] * hidden_values_[i];
        outputs[o] = sigmoid(sum);
    }
}

std::vector<double> ElmanController::forward(std::span<const double> inputs)
{
    std::vector<double> out(outputs_);
    forward(inputs, out);
    return out;
}

void write_controller(std::ostream& os, const ElmanController& ctrl)
{
    std::ostringstream out;
    out << std::setprecision(17);
    const auto& t = ctrl.type();
    out << "elman 1\n";
    out << "type " << t.num_sensors << ' ' << t.num_wheels << ' ' << t.num_joints << '\n';
    out << "hidden " << ctrl.hidden_size() << '\n';
    out << "params " << ctrl.num_params() << '\n';
    for (double w : ctrl.params())
        out << w << '\n';
    os << out.str();
}

ElmanController read_controller(std::istream& is)
{
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "elman" || version != 1)
        throw ParseError("expected 'elman 1' header");
    morph::RobotType t;
    if (!(is >> tag >> t.num_sensors >> t.num_wheels >> t.num_joints) || tag != "type")
        throw ParseError("expected 'type s w j'");
    int hidden = 0;
    if (!(is >> tag >> hidden) || tag != "hidden")
        throw ParseError("expected 'hidden h'");
    std::size_t count = 0;
    if (!(is >> tag >> count) || tag != "params")
        throw ParseError("expected 'params n'");
    ElmanController ctrl = ElmanController::build(t, hidden);
    if (count != ctrl.num_params())
        throw ParseError("parameter count does not match topology");
    std::vector<double> theta(count);
    for (double& w : theta)
        if (!(is >> w))
            throw ParseError("truncated parameter list");
    ctrl.set_params(theta);
    return ctrl;
}

} // namespace melai::control
