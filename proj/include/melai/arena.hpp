#pragma once

#include "melai/elman.hpp"
#include "melai/morphogen.hpp"

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace melai::arena {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double length(Vec2 a);

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const Pose&, const Pose&) = default;
};

struct Wall {
    Vec2 a;
    Vec2 b;

    friend bool operator==(const Wall&, const Wall&) = default;
};

/// Square ring around `centre` (Chebyshev distance in [inner, outer)) that
/// slows traversal, standing in for a climbable step.
struct StepZone {
    Vec2 centre;
    double inner = 0.0;
    double outer = 0.0;
    double wheel_multiplier = 1.0;
    double joint_multiplier = 1.0;

    bool contains(Vec2 p) const;
    friend bool operator==(const StepZone&, const StepZone&) = default;
};

struct Environment {
    std::string name;
    Vec2 lower{-1.0, -1.0};
    Vec2 upper{1.0, 1.0};
    std::vector<Wall> walls;
    std::vector<StepZone> step_zones;
    Vec2 beacon;
    Pose start;

    double diagonal() const;
    /// Interior walls followed by the four boundary walls.
    std::vector<Wall> all_walls() const;
    bool inside(Vec2 p) const;

    void validate() const;
    friend bool operator==(const Environment&, const Environment&) = default;
};

inline constexpr std::string_view kEnvironmentNames[] = {"amphitheatre", "hard_race", "two_rooms"};

/// Built-in layouts; identical to data/environments/*.json.
Environment make_environment(std::string_view name);

Environment read_environment(std::istream& is);
Environment load_environment(const std::string& path);
void write_environment(std::ostream& os, const Environment& env);

struct ArenaParams {
    double control_rate_hz = 10.0;
    double sim_time_s = 60.0;
    double wheel_max_speed = 0.15;     // m/s
    double joint_max_frequency = 1.0;  // Hz
    double joint_efficiency = 0.3;     // relative to a wheel at full speed
    double sensor_fov_deg = 60.0;
    double sensor_range_m = 2.0;
    double max_linear_speed = 0.3;     // m/s
    double max_angular_speed = 6.0;    // rad/s
    double moved_threshold_m = 0.01;
    double min_footprint_radius_m = 0.01;
    double max_footprint_radius_m = 0.2;

    std::size_t control_steps() const;
    void validate() const;
};

struct WheelMount {
    Vec2 position;  // body frame, m
    Vec2 drive;     // unit rolling direction, zero for a wheel without ground traction
};

struct JointMount {
    Vec2 position;
    Vec2 thrust;  // horizontal part of the mount normal
};

struct SensorMount {
    Vec2 position;
    double heading = 0.0;  // body frame, rad
};

/// Kinematic view of a body-plan: circular footprint and organ mounts in
/// the body frame (x forward, y left).
class RobotModel {
public:
    RobotModel() = default;
    RobotModel(double radius, std::vector<WheelMount> wheels, std::vector<JointMount> joints,
               std::vector<SensorMount> sensors);

    static RobotModel from_body(const morph::BodyPlan& plan, const ArenaParams& params);

    double radius() const { return radius_; }
    const std::vector<WheelMount>& wheels() const { return wheels_; }
    const std::vector<JointMount>& joints() const { return joints_; }
    const std::vector<SensorMount>& sensors() const { return sensors_; }
    std::size_t num_actuators() const { return wheels_.size() + joints_.size(); }

    /// Least-squares body twist (vx, vy, omega) from wheel rim speeds.
    Eigen::Vector3d wheel_twist(std::span<const double> speeds) const;

private:
    double radius_ = 0.05;
    std::vector<WheelMount> wheels_;
    std::vector<JointMount> joints_;
    std::vector<SensorMount> sensors_;
    Eigen::MatrixXd wheel_pinv_;
};

struct RobotState {
    Pose pose;
    double elapsed = 0.0;
};

/// 1 - |p_f - p_b| / D.
double task_performance(Vec2 final_position, Vec2 beacon, double diagonal);

/// Distance from a point to the closest point of a wall.
double distance_to_wall(Vec2 p, const Wall& w);
bool segments_intersect(Vec2 p, Vec2 q, const Wall& w);
/// Distance along the ray to the first wall, or +inf.
double ray_cast(Vec2 origin, double heading, std::span<const Wall> walls);

/// Advances the robot by dt under physical commands: wheel rim speeds (m/s)
/// followed by joint oscillation frequencies (Hz).
RobotState step(const RobotState& state, const RobotModel& model, std::span<const double> commands,
                const Environment& env, const ArenaParams& params, double dt);

/// Per sensor: beacon bit (in the cone and not occluded), normalised range
/// to the nearest wall along the sensor axis.
std::vector<double> sense(const RobotState& state, const RobotModel& model, const Environment& env,
                          const ArenaParams& params);
void sense(const RobotState& state, const RobotModel& model, const Environment& env,
           const ArenaParams& params, std::span<double> out);

/// Controller outputs in (0,1) -> physical commands.
void map_actuation(std::span<const double> outputs, std::size_t num_wheels,
                   const ArenaParams& params, std::span<double> commands);

struct RolloutResult {
    double task_performance = 0.0;
    Vec2 final_position;
    double final_heading = 0.0;
    bool moved = false;
    std::vector<std::pair<double, Pose>> trajectory;  // (t, pose), filled on request
};

/// Maps sensor inputs to controller-style outputs in (0,1).
using Policy = std::function<void(std::span<const double>, std::span<double>)>;

RolloutResult evaluate(const RobotModel& model, const Policy& policy, const Environment& env,
                       const ArenaParams& params, bool record_trajectory = false);

/// Resets the controller context, then runs sense -> forward -> step at the
/// control rate for sim_time.
RolloutResult evaluate(const morph::BodyPlan& plan, control::ElmanController& ctrl,
                       const Environment& env, const ArenaParams& params,
                       bool record_trajectory = false);
RolloutResult evaluate(const RobotModel& model, control::ElmanController& ctrl,
                       const Environment& env, const ArenaParams& params,
                       bool record_trajectory = false);

void write_trajectory_csv(std::ostream& os, const RolloutResult& result);
void write_arena_svg(std::ostream& os, const Environment& env,
                     std::span<const RolloutResult> rollouts = {});

} // namespace melai::arena
