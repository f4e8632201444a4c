#include "melai/arena.hpp"

#include "melai/error.hpp"

#include <Eigen/QR>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace melai::arena {

namespace {

constexpr double kContactSlack = 1e-9;

Vec2 closest_point(Vec2 p, const Wall& w)
{
    Vec2 ab = w.b - w.a;
    double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? std::clamp(dot(p - w.a, ab) / len2, 0.0, 1.0) : 0.0;
    return w.a + t * ab;
}

Vec2 rotate(Vec2 v, double angle)
{
    double c = std::cos(angle);
    double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double wrap_angle(double a)
{
    return std::remainder(a, 2.0 * std::numbers::pi);
}

// Pushes a disc of radius r at `target` out of every wall it overlaps.
// Returns `from` when no penetration-free placement is found.
Vec2 resolve_contacts(Vec2 from, Vec2 target, double r, std::span<const Wall> walls)
{
    for (int iter = 0; iter < 8; ++iter) {
        bool pushed = false;
        for (const auto& w : walls) {
            Vec2 c = closest_point(target, w);
            Vec2 d = target - c;
            double dist = length(d);
            if (dist >= r)
                continue;
            Vec2 n;
            if (dist > 1e-12) {
                n = (1.0 / dist) * d;
            } else {
                Vec2 along = w.b - w.a;
                n = Vec2{-along.y, along.x};
                n = (1.0 / length(n)) * n;
                if (dot(from - c, n) < 0.0)
                    n = -1.0 * n;
            }
            target = c + (r + kContactSlack) * n;
            pushed = true;
        }
        if (!pushed)
            break;
    }
    for (const auto& w : walls)
        if (distance_to_wall(target, w) < r - 1e-9)
            return from;
    return target;
}

Vec2 json_vec2(const nlohmann::json& j)
{
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

double length(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

bool StepZone::contains(Vec2 p) const
{
    double cheb = std::max(std::abs(p.x - centre.x), std::abs(p.y - centre.y));
    return cheb >= inner && cheb < outer;
}

double Environment::diagonal() const { return length(upper - lower); }

std::vector<Wall> Environment::all_walls() const
{
    std::vector<Wall> out = walls;
    out.push_back({{lower.x, lower.y}, {upper.x, lower.y}});
    out.push_back({{upper.x, lower.y}, {upper.x, upper.y}});
    out.push_back({{upper.x, upper.y}, {lower.x, upper.y}});
    out.push_back({{lower.x, upper.y}, {lower.x, lower.y}});
    return out;
}

bool Environment::inside(Vec2 p) const
{
    return p.x >= lower.x && p.x <= upper.x && p.y >= lower.y && p.y <= upper.y;
}

void Environment::validate() const
{
    if (name.empty())
        throw ConfigError("environment: missing name");
    if (!(upper.x > lower.x && upper.y > lower.y))
        throw ConfigError("environment '" + name + "': empty bounds");
    if (!inside(beacon))
        throw ConfigError("environment '" + name + "': beacon outside bounds");
    if (!inside(start.position()))
        throw ConfigError("environment '" + name + "': start outside bounds");
    for (const auto& z : step_zones)
        if (!(z.outer > z.inner) || z.wheel_multiplier < 0.0 || z.joint_multiplier < 0.0)
            throw ConfigError("environment '" + name + "': invalid step zone");
}

Environment make_environment(std::string_view name)
{
    Environment env;
    env.name = std::string(name);
    const double quarter_turn = std::numbers::pi / 2.0;
    if (name == "amphitheatre") {
        // Three concentric steps between the start and the target.
        for (double inner : {0.2, 0.4, 0.6})
            env.step_zones.push_back({{0.0, 0.0}, inner, inner + 0.1, 0.5, 0.8});
        env.beacon = {0.0, 0.8};
        env.start = {0.0, 0.0, 0.0};
    } else if (name == "hard_race") {
        // Corner to corner around two interleaved baffles.
        env.walls = {{{-0.35, -1.0}, {-0.35, 0.25}}, {{0.35, 1.0}, {0.35, -0.25}}};
        env.beacon = {0.8, 0.8};
        env.start = {-0.75, -0.75, quarter_turn};
    } else if (name == "two_rooms") {
        // Divider with a gate; the target sits in a pocket behind a second wall.
        env.walls = {{{0.0, -1.0}, {0.0, 0.2}},
                     {{0.0, 0.75}, {0.0, 1.0}},
                     {{0.4, -0.3}, {1.0, -0.3}}};
        env.beacon = {0.75, -0.75};
        env.start = {-0.6, -0.6, quarter_turn};
    } else {
        throw ConfigError("unknown environment '" + std::string(name) + "'");
    }
    env.validate();
    return env;
}

Environment read_environment(std::istream& is)
{
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("environment file: ") + e.what());
    }
    Environment env;
    try {
        env.name = j.at("name").get<std::string>();
        const auto& b = j.at("bounds");
        env.lower = {b.at(0).get<double>(), b.at(1).get<double>()};
        env.upper = {b.at(2).get<double>(), b.at(3).get<double>()};
        env.beacon = json_vec2(j.at("beacon"));
        const auto& s = j.at("start");
        env.start = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
        for (const auto& w : j.value("walls", nlohmann::json::array()))
            env.walls.push_back({{w.at(0).get<double>(), w.at(1).get<double>()},
                                 {w.at(2).get<double>(), w.at(3).get<double>()}});
        for (const auto& z : j.value("step_zones", nlohmann::json::array()))
            env.step_zones.push_back({json_vec2(z.at("centre")), z.at("inner").get<double>(),
                                      z.at("outer").get<double>(),
                                      z.at("wheel_multiplier").get<double>(),
                                      z.at("joint_multiplier").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("environment file: ") + e.what());
    }
    env.validate();
    return env;
}

Environment load_environment(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open environment file '" + path + "'");
    return read_environment(in);
}

void write_environment(std::ostream& os, const Environment& env)
{
    nlohmann::ordered_json j;
    j["name"] = env.name;
    j["bounds"] = {env.lower.x, env.lower.y, env.upper.x, env.upper.y};
    j["beacon"] = {env.beacon.x, env.beacon.y};
    j["start"] = {env.start.x, env.start.y, env.start.heading};
    j["walls"] = nlohmann::ordered_json::array();
    for (const auto& w : env.walls)
        j["walls"].push_back({w.a.x, w.a.y, w.b.x, w.b.y});
    j["step_zones"] = nlohmann::ordered_json::array();
    for (const auto& z : env.step_zones)
        j["step_zones"].push_back({{"centre", {z.centre.x, z.centre.y}},
                                   {"inner", z.inner},
                                   {"outer", z.outer},
                                   {"wheel_multiplier", z.wheel_multiplier},
                                   {"joint_multiplier", z.joint_multiplier}});
    os << j.dump(2) << '\n';
}

std::size_t ArenaParams::control_steps() const
{
    return static_cast<std::size_t>(std::llround(sim_time_s * control_rate_hz));
}

void ArenaParams::validate() const
{
    if (!(control_rate_hz > 0.0) || !(sim_time_s > 0.0))
        throw ConfigError("arena: control rate and simulation time must be positive");
    if (!(wheel_max_speed >= 0.0) || !(joint_max_frequency > 0.0) || !(joint_efficiency >= 0.0))
        throw ConfigError("arena: actuator constants must be non-negative");
    if (!(sensor_fov_deg > 0.0) || !(sensor_range_m > 0.0))
        throw ConfigError("arena: sensor geometry must be positive");
    if (!(min_footprint_radius_m > 0.0) || max_footprint_radius_m < min_footprint_radius_m)
        throw ConfigError("arena: invalid footprint radius bounds");
}

RobotModel::RobotModel(double radius, std::vector<WheelMount> wheels,
                       std::vector<JointMount> joints, std::vector<SensorMount> sensors)
    : radius_(radius), wheels_(std::move(wheels)), joints_(std::move(joints)),
      sensors_(std::move(sensors))
{
    // Each wheel constrains the rim velocity along its rolling direction:
    // drive . (v + omega x p) = speed.
    Eigen::MatrixXd a(static_cast<Eigen::Index>(wheels_.size()), 3);
    for (std::size_t i = 0; i < wheels_.size(); ++i) {
        const auto& w = wheels_[i];
        auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = w.drive.x;
        a(r, 1) = w.drive.y;
        a(r, 2) = -w.drive.x * w.position.y + w.drive.y * w.position.x;
    }
    if (wheels_.empty())
        wheel_pinv_ = Eigen::MatrixXd::Zero(3, 0);
    else
        wheel_pinv_ = a.completeOrthogonalDecomposition().pseudoInverse();
}

RobotModel RobotModel::from_body(const morph::BodyPlan& plan, const ArenaParams& params)
{
    constexpr double cm = 0.01;
    const auto& voxels = plan.root().voxels;
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& v : voxels) {
        auto c = morph::voxel_centre_cm(v, plan.grid_resolution);
        cx += c.x;
        cy += c.y;
    }
    cx /= static_cast<double>(voxels.size());
    cy /= static_cast<double>(voxels.size());

    double radius = 0.0;
    auto extend = [&](double x, double y, double half) {
        for (double sx : {-1.0, 1.0})
            for (double sy : {-1.0, 1.0})
                radius = std::max(radius, std::hypot(x + sx * half - cx, y + sy * half - cy));
    };
    for (const auto& v : voxels) {
        auto c = morph::voxel_centre_cm(v, plan.grid_resolution);
        extend(c.x, c.y, plan.voxel_size_cm / 2.0);
    }
    for (const auto& s : plan.segments)
        if (s.id != 0)
            extend(s.centre.x, s.centre.y, s.side_cm / 2.0);
    radius = std::clamp(radius * cm, params.min_footprint_radius_m, params.max_footprint_radius_m);

    std::vector<WheelMount> wheels;
    std::vector<JointMount> joints;
    std::vector<SensorMount> sensors;
    for (const auto& o : plan.organs) {
        Vec2 pos{(o.position.x - cx) * cm, (o.position.y - cy) * cm};
        Vec2 horizontal{o.normal.x, o.normal.y};
        double h = length(horizontal);
        switch (o.kind) {
        case morph::OrganKind::Wheel: {
            Vec2 drive{};
            if (h > 1e-9) {
                // Axle along the normal; roll perpendicular to it, forward-facing.
                drive = {-horizontal.y / h, horizontal.x / h};
                if (drive.x < -1e-12 || (std::abs(drive.x) <= 1e-12 && drive.y < 0.0))
                    drive = -1.0 * drive;
            }
            wheels.push_back({pos, drive});
            break;
        }
        case morph::OrganKind::Joint:
            joints.push_back({pos, horizontal});
            break;
        case morph::OrganKind::Sensor:
            sensors.push_back({pos, h > 1e-9 ? std::atan2(horizontal.y, horizontal.x) : 0.0});
            break;
        case morph::OrganKind::Caster:
            break;
        }
    }
    return RobotModel(radius, std::move(wheels), std::move(joints), std::move(sensors));
}

Eigen::Vector3d RobotModel::wheel_twist(std::span<const double> speeds) const
{
    if (wheels_.empty())
        return Eigen::Vector3d::Zero();
    Eigen::Map<const Eigen::VectorXd> s(speeds.data(), static_cast<Eigen::Index>(wheels_.size()));
    return wheel_pinv_ * s;
}

double task_performance(Vec2 final_position, Vec2 beacon, double diagonal)
{
    return 1.0 - length(final_position - beacon) / diagonal;
}

double distance_to_wall(Vec2 p, const Wall& w) { return length(p - closest_point(p, w)); }

bool segments_intersect(Vec2 p, Vec2 q, const Wall& w)
{
    Vec2 r = q - p;
    Vec2 s = w.b - w.a;
    double denom = cross(r, s);
    Vec2 ap = w.a - p;
    if (std::abs(denom) < 1e-15) {
        if (std::abs(cross(ap, r)) > 1e-15)
            return false;
        // Collinear: overlap of projections.
        double rr = dot(r, r);
        if (rr == 0.0)
            return distance_to_wall(p, w) < 1e-12;
        double t0 = dot(ap, r) / rr;
        double t1 = t0 + dot(s, r) / rr;
        return std::max(t0, t1) >= 0.0 && std::min(t0, t1) <= 1.0;
    }
    double t = cross(ap, s) / denom;
    double u = cross(ap, r) / denom;
    return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

double ray_cast(Vec2 origin, double heading, std::span<const Wall> walls)
{
    Vec2 dir{std::cos(heading), std::sin(heading)};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : walls) {
        Vec2 s = w.b - w.a;
        double denom = cross(dir, s);
        if (std::abs(denom) < 1e-15)
            continue;
        Vec2 ao = w.a - origin;
        double t = cross(ao, s) / denom;
        double u = cross(ao, dir) / denom;
        if (t >= 0.0 && u >= 0.0 && u <= 1.0)
            best = std::min(best, t);
    }
    return best;
}

namespace {

RobotState step_with(const RobotState& state, const RobotModel& model, std::span<const double> commands,
                     const Environment& env, std::span<const Wall> walls, const ArenaParams& params,
                     double dt)
{
    if (commands.size() != model.num_actuators())
        throw DimensionError("step: one command per wheel and joint required");
    if (!(dt > 0.0))
        throw Error("step: dt must be positive");

    const std::size_t nw = model.wheels().size();
    Eigen::Vector3d wheel = model.wheel_twist(commands.subspan(0, nw));
    Eigen::Vector3d joint = Eigen::Vector3d::Zero();
    const double r2 = std::max(model.radius() * model.radius(), 1e-4);
    const double joint_gain = params.joint_efficiency * params.wheel_max_speed / params.joint_max_frequency;
    // Paddling joints share the load: the body moves with their mean thrust.
    const double joint_share = model.joints().empty() ? 0.0 : 1.0 / static_cast<double>(model.joints().size());
    for (std::size_t k = 0; k < model.joints().size(); ++k) {
        const auto& jm = model.joints()[k];
        double push = joint_share * joint_gain * commands[nw + k];
        joint.x() += push * jm.thrust.x;
        joint.y() += push * jm.thrust.y;
        joint.z() += push * cross(jm.position, jm.thrust) / r2;
    }

    RobotState next = state;
    Vec2 pos = state.pose.position();
    double heading = state.pose.heading;

    double wheel_mult = 1.0;
    double joint_mult = 1.0;
    for (const auto& z : env.step_zones)
        if (z.contains(pos)) {
            wheel_mult = std::min(wheel_mult, z.wheel_multiplier);
            joint_mult = std::min(joint_mult, z.joint_multiplier);
        }
    Eigen::Vector3d twist = wheel_mult * wheel + joint_mult * joint;
    double speed = std::hypot(twist.x(), twist.y());
    if (speed > params.max_linear_speed) {
        twist.x() *= params.max_linear_speed / speed;
        twist.y() *= params.max_linear_speed / speed;
        speed = params.max_linear_speed;
    }
    twist.z() = std::clamp(twist.z(), -params.max_angular_speed, params.max_angular_speed);

    if (speed == 0.0 && twist.z() == 0.0) {
        next.elapsed += dt;
        return next;
    }

    // Substeps keep each displacement well below the footprint radius.
    int substeps = std::max(1, static_cast<int>(std::ceil(speed * dt / (0.25 * model.radius()))));
    substeps = std::min(substeps, 64);
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
        const double dtheta = twist.z() * h;
        Vec2 body;
        if (std::abs(dtheta) < 1e-9) {
            body = {twist.x() * h, twist.y() * h};
        } else {
            double sn = std::sin(dtheta);
            double cs = 1.0 - std::cos(dtheta);
            body = {(twist.x() * sn - twist.y() * cs) / twist.z(),
                    (twist.x() * cs + twist.y() * sn) / twist.z()};
        }
        Vec2 target = pos + rotate(body, heading);
        pos = resolve_contacts(pos, target, model.radius(), walls);
        heading = wrap_angle(heading + dtheta);
    }
    next.pose = {pos.x, pos.y, heading};
    next.elapsed += dt;
    return next;
}

void sense_with(const RobotState& state, const RobotModel& model, const Environment& env,
                std::span<const Wall> walls, const ArenaParams& params, std::span<double> out)
{
    if (out.size() != 2 * model.sensors().size())
        throw DimensionError("sense: output buffer must hold two values per sensor");
    const double half_fov = params.sensor_fov_deg * std::numbers::pi / 360.0;
    const Vec2 centre = state.pose.position();
    for (std::size_t i = 0; i < model.sensors().size(); ++i) {
        const auto& sm = model.sensors()[i];
        Vec2 p = centre + rotate(sm.position, state.pose.heading);
        double heading = state.pose.heading + sm.heading;

        Vec2 to_beacon = env.beacon - p;
        bool in_cone = length(to_beacon) < 1e-12 ||
                       std::abs(wrap_angle(std::atan2(to_beacon.y, to_beacon.x) - heading)) <= half_fov;
        bool occluded = std::any_of(walls.begin(), walls.end(), [&](const Wall& w) {
            return segments_intersect(p, env.beacon, w);
        });
        out[2 * i] = in_cone && !occluded ? 1.0 : 0.0;

        double range = ray_cast(p, heading, walls);
        out[2 * i + 1] = std::min(range, params.sensor_range_m) / params.sensor_range_m;
    }
}

} // namespace

RobotState step(const RobotState& state, const RobotModel& model, std::span<const double> commands,
                const Environment& env, const ArenaParams& params, double dt)
{
    const auto walls = env.all_walls();
    return step_with(state, model, commands, env, walls, params, dt);
}

void sense(const RobotState& state, const RobotModel& model, const Environment& env,
           const ArenaParams& params, std::span<double> out)
{
    const auto walls = env.all_walls();
    sense_with(state, model, env, walls, params, out);
}

std::vector<double> sense(const RobotState& state, const RobotModel& model, const Environment& env,
                          const ArenaParams& params)
{
    std::vector<double> out(2 * model.sensors().size());
    sense(state, model, env, params, out);
    return out;
}

void map_actuation(std::span<const double> outputs, std::size_t num_wheels,
                   const ArenaParams& params, std::span<double> commands)
{
    if (commands.size() != outputs.size() || num_wheels > outputs.size())
        throw DimensionError("map_actuation: size mismatch");
    for (std::size_t i = 0; i < outputs.size(); ++i)
        commands[i] = i < num_wheels ? (2.0 * outputs[i] - 1.0) * params.wheel_max_speed
                                     : outputs[i] * params.joint_max_frequency;
}

RolloutResult evaluate(const RobotModel& model, const Policy& policy, const Environment& env,
                       const ArenaParams& params, bool record_trajectory)
{
    params.validate();
    RobotState state{env.start, 0.0};
    RolloutResult result;
    if (record_trajectory)
        result.trajectory.emplace_back(0.0, state.pose);

    if (model.num_actuators() > 0) {
        const double dt = 1.0 / params.control_rate_hz;
        const std::size_t steps = params.control_steps();
        std::vector<double> inputs(2 * model.sensors().size());
        std::vector<double> outputs(model.num_actuators());
        std::vector<double> commands(model.num_actuators());
        const auto walls = env.all_walls();
        for (std::size_t k = 0; k < steps; ++k) {
            sense_with(state, model, env, walls, params, inputs);
            policy(inputs, outputs);
            map_actuation(outputs, model.wheels().size(), params, commands);
            state = step_with(state, model, commands, env, walls, params, dt);
            if (record_trajectory)
                result.trajectory.emplace_back(state.elapsed, state.pose);
        }
    }

    result.final_position = state.pose.position();
    result.final_heading = state.pose.heading;
    result.task_performance = task_performance(result.final_position, env.beacon, env.diagonal());
    result.moved = length(result.final_position - env.start.position()) > params.moved_threshold_m;
    return result;
}

RolloutResult evaluate(const RobotModel& model, control::ElmanController& ctrl,
                       const Environment& env, const ArenaParams& params, bool record_trajectory)
{
    if (ctrl.num_inputs() != 2 * model.sensors().size() ||
        ctrl.num_outputs() != model.num_actuators())
        throw StructuralError("controller topology does not match the robot");
    ctrl.reset_context();
    return evaluate(
        model,
        [&ctrl](std::span<const double> in, std::span<double> out) { ctrl.forward(in, out); },
        env, params, record_trajectory);
}

RolloutResult evaluate(const morph::BodyPlan& plan, control::ElmanController& ctrl,
                       const Environment& env, const ArenaParams& params, bool record_trajectory)
{
    return evaluate(RobotModel::from_body(plan, params), ctrl, env, params, record_trajectory);
}

void write_trajectory_csv(std::ostream& os, const RolloutResult& result)
{
    std::ostringstream out;
    out << std::setprecision(10);
    out << "t,x,y,heading\n";
    for (const auto& [t, p] : result.trajectory)
        out << t << ',' << p.x << ',' << p.y << ',' << p.heading << '\n';
    os << out.str();
}

void write_arena_svg(std::ostream& os, const Environment& env, std::span<const RolloutResult> rollouts)
{
    constexpr double scale = 200.0;
    constexpr double margin = 10.0;
    const double w = (env.upper.x - env.lower.x) * scale + 2 * margin;
    const double hgt = (env.upper.y - env.lower.y) * scale + 2 * margin;
    auto px = [&](double x) { return margin + (x - env.lower.x) * scale; };
    auto py = [&](double y) { return margin + (env.upper.y - y) * scale; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt
       << "\" viewBox=\"0 0 " << w << ' ' << hgt << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& z : env.step_zones) {
        // Draw the ring as outer square minus inner square.
        double o = z.outer;
        double i = z.inner;
        os << "<path fill=\"#eee4cc\" fill-rule=\"evenodd\" d=\"M" << px(z.centre.x - o) << ','
           << py(z.centre.y - o) << " H" << px(z.centre.x + o) << " V" << py(z.centre.y + o)
           << " H" << px(z.centre.x - o) << " Z M" << px(z.centre.x - i) << ','
           << py(z.centre.y - i) << " H" << px(z.centre.x + i) << " V" << py(z.centre.y + i)
           << " H" << px(z.centre.x - i) << " Z\"/>\n";
    }
    for (const auto& wall : env.all_walls())
        os << "<line x1=\"" << px(wall.a.x) << "\" y1=\"" << py(wall.a.y) << "\" x2=\""
           << px(wall.b.x) << "\" y2=\"" << py(wall.b.y)
           << "\" stroke=\"black\" stroke-width=\"4\"/>\n";
    os << "<circle cx=\"" << px(env.beacon.x) << "\" cy=\"" << py(env.beacon.y) << "\" r=\""
       << 0.14 * scale << "\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    os << "<circle cx=\"" << px(env.beacon.x) << "\" cy=\"" << py(env.beacon.y)
       << "\" r=\"5\" fill=\"#d62728\"/>\n";
    os << "<circle cx=\"" << px(env.start.x) << "\" cy=\"" << py(env.start.y)
       << "\" r=\"5\" fill=\"#1f77b4\"/>\n";
    for (const auto& r : rollouts) {
        if (r.trajectory.empty())
            continue;
        os << "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\" points=\"";
        for (const auto& [t, p] : r.trajectory)
            os << px(p.x) << ',' << py(p.y) << ' ';
        os << "\"/>\n";
    }
    os << "</svg>\n";
}

} // namespace melai::arena
