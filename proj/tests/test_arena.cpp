#include "melai/arena.hpp"
#include "melai/error.hpp"
#include "melai/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace melai;
using namespace melai::arena;

namespace {

RobotModel differential(double half_track, std::vector<SensorMount> sensors = {})
{
    return RobotModel(0.05, {{{0.0, half_track}, {1.0, 0.0}}, {{0.0, -half_track}, {1.0, 0.0}}}, {},
                      std::move(sensors));
}

Environment open_arena(double half = 1.0)
{
    Environment e;
    e.name = "open";
    e.lower = {-half, -half};
    e.upper = {half, half};
    e.beacon = {0.5, 0.5};
    e.start = {0.0, 0.0, 0.0};
    return e;
}

} // namespace

TEST(Arena, TaskPerformanceExamples)
{
    const double diag = std::sqrt(8.0);
    EXPECT_DOUBLE_EQ(task_performance({0.3, -0.2}, {0.3, -0.2}, diag), 1.0);
    EXPECT_NEAR(task_performance({-1, -1}, {1, 1}, diag), 0.0, 1e-15);
    double f = task_performance({0.0, 0.0}, {0.14, 0.0}, diag);
    EXPECT_NEAR(f, 1.0 - 0.14 / 2.8284271247461903, 1e-15);
    EXPECT_GE(f, 0.95);
    EXPECT_DOUBLE_EQ(open_arena().diagonal(), diag);
}

TEST(Arena, ZeroActuationKeepsPose)
{
    Environment env = open_arena();
    ArenaParams ap;
    RobotState s{{0.1, -0.2, 0.7}, 0.0};
    std::vector<double> cmd{0.0, 0.0};
    auto next = step(s, differential(0.04), cmd, env, ap, 0.1);
    EXPECT_EQ(next.pose, s.pose);
}

TEST(Arena, StraightAndRotationClosedForms)
{
    Environment env = open_arena();
    ArenaParams ap;
    RobotState s{{0.0, 0.0, 1.1}, 0.0};
    auto model = differential(0.05);
    auto fwd = step(s, model, std::vector<double>{0.1, 0.1}, env, ap, 0.1);
    EXPECT_NEAR(fwd.pose.x, 0.01 * std::cos(1.1), 1e-9);
    EXPECT_NEAR(fwd.pose.y, 0.01 * std::sin(1.1), 1e-9);
    EXPECT_NEAR(fwd.pose.heading, 1.1, 1e-12);
    auto spin = step(s, model, std::vector<double>{0.1, -0.1}, env, ap, 0.1);
    EXPECT_NEAR(spin.pose.x, 0.0, 1e-9);
    EXPECT_NEAR(spin.pose.y, 0.0, 1e-9);
    EXPECT_NEAR(spin.pose.heading, 1.1 - 0.1 / 0.05 * 0.1, 1e-12);
}

TEST(Arena, WheelTwistLeastSquares)
{
    auto model = differential(0.05);
    Eigen::Vector3d t = model.wheel_twist(std::vector<double>{0.04, 0.1});
    EXPECT_NEAR(t(0), 0.07, 1e-12);
    EXPECT_NEAR(t(1), 0.0, 1e-12);
    EXPECT_NEAR(t(2), (0.1 - 0.04) / 0.1, 1e-12);
}

TEST(Arena, ConstantControllerFollowsClosedForm)
{
    Environment env = open_arena();
    ArenaParams ap;
    auto model = differential(0.05);
    // Equal outputs: straight line at (2o - 1) vmax for 60 s.
    auto straight = evaluate(model, [](auto, std::span<double> out) { out[0] = out[1] = 0.55; }, env, ap);
    double v = (2 * 0.55 - 1) * ap.wheel_max_speed;
    EXPECT_NEAR(straight.final_position.x, v * ap.sim_time_s, 1e-6);
    EXPECT_NEAR(straight.final_position.y, 0.0, 1e-6);
    EXPECT_TRUE(straight.moved);

    // Unequal outputs: circular arc.
    auto arc = evaluate(
        model,
        [](auto, std::span<double> out) {
            out[0] = 0.52;
            out[1] = 0.54;
        },
        env, ap);
    double vl = (2 * 0.52 - 1) * ap.wheel_max_speed;
    double vr = (2 * 0.54 - 1) * ap.wheel_max_speed;
    double vc = (vl + vr) / 2;
    double w = (vr - vl) / 0.1;
    double t = ap.sim_time_s;
    EXPECT_NEAR(arc.final_position.x, vc / w * std::sin(w * t), 1e-6);
    EXPECT_NEAR(arc.final_position.y, vc / w * (1 - std::cos(w * t)), 1e-6);
}

TEST(Arena, ZeroWeightControllerOnWheelsIsStationary)
{
    morph::BodyPlan plan;
    plan.grid_resolution = 11;
    plan.voxel_size_cm = 23.0 / 11;
    plan.segments.push_back({0, -1, {{5, 5, 5}}, {}, 0.0});
    plan.organs.push_back({0, morph::OrganKind::Wheel, {0, 1.05, 0}, {0, 1, 0}, 0, {5, 5, 5}, 1.0});
    plan.organs.push_back({1, morph::OrganKind::Wheel, {0, -1.05, 0}, {0, -1, 0}, 0, {5, 5, 5}, 1.0});
    plan.type = morph::robot_type(plan);
    auto ctrl = control::ElmanController::build(plan.type, 4);
    auto env = make_environment("amphitheatre");
    auto r = evaluate(plan, ctrl, env, ArenaParams{});
    EXPECT_FALSE(r.moved);
    EXPECT_EQ(r.final_position, env.start.position());
}

TEST(Arena, NoActuatorsScoresStartPose)
{
    morph::BodyPlan plan;
    plan.grid_resolution = 11;
    plan.voxel_size_cm = 23.0 / 11;
    plan.segments.push_back({0, -1, {{5, 5, 5}}, {}, 0.0});
    auto model = RobotModel::from_body(plan, ArenaParams{});
    auto env = make_environment("hard_race");
    auto r = evaluate(model, [](auto, auto) {}, env, ArenaParams{});
    EXPECT_FALSE(r.moved);
    EXPECT_DOUBLE_EQ(r.task_performance, task_performance(env.start.position(), env.beacon, env.diagonal()));
}

TEST(Arena, RolloutIsDeterministic)
{
    Rng rng(3);
    auto model = differential(0.04, {{{0.05, 0.0}, 0.0}});
    auto ctrl = control::ElmanController::build({1, 2, 0}, 5);
    std::vector<double> theta(ctrl.num_params());
    for (auto& v : theta)
        v = uniform(rng, -2, 2);
    ctrl.set_params(theta);
    auto env = make_environment("two_rooms");
    auto a = evaluate(model, ctrl, env, ArenaParams{}, true);
    auto b = evaluate(model, ctrl, env, ArenaParams{}, true);
    EXPECT_EQ(a.final_position, b.final_position);
    EXPECT_EQ(a.task_performance, b.task_performance);
    EXPECT_EQ(a.trajectory.size(), 601u);
}

TEST(Arena, SensorRangeAndOcclusion)
{
    ArenaParams ap;
    auto model = differential(0.04, {{{0.0, 0.0}, 0.0}});

    Environment wide = open_arena(5.0);
    auto far = sense({{0.0, 0.0, 0.0}, 0.0}, model, wide, ap);
    EXPECT_EQ(far[1], 1.0);

    Environment env = open_arena();
    auto near = sense({{0.5, 0.0, 0.0}, 0.0}, model, env, ap);
    EXPECT_NEAR(near[1], 0.25, 1e-12);

    env.beacon = {0.8, 0.0};
    EXPECT_EQ(sense({{0.0, 0.0, 0.0}, 0.0}, model, env, ap)[0], 1.0);
    env.walls.push_back({{0.4, -0.1}, {0.4, 0.1}});
    auto blocked = sense({{0.0, 0.0, 0.0}, 0.0}, model, env, ap);
    EXPECT_EQ(blocked[0], 0.0);
    EXPECT_NEAR(blocked[1], 0.2, 1e-12);
    // Beacon 40 degrees off-axis lies outside the 60 degree cone.
    env.walls.clear();
    double a = 40.0 * std::numbers::pi / 180.0;
    env.beacon = {0.5 * std::cos(a), 0.5 * std::sin(a)};
    EXPECT_EQ(sense({{0.0, 0.0, 0.0}, 0.0}, model, env, ap)[0], 0.0);
}

TEST(Arena, RayCastGeometry)
{
    std::vector<Wall> walls{{{1.0, -1.0}, {1.0, 1.0}}};
    EXPECT_NEAR(ray_cast({0, 0}, 0.0, walls), 1.0, 1e-12);
    EXPECT_NEAR(ray_cast({0, 0}, std::numbers::pi / 4, walls), std::sqrt(2.0), 1e-12);
    EXPECT_TRUE(std::isinf(ray_cast({0, 0}, std::numbers::pi, walls)));
    EXPECT_NEAR(distance_to_wall({0.5, 2.0}, walls[0]), std::hypot(0.5, 1.0), 1e-12);
}

TEST(Arena, TwoRoomsIsDeceptive)
{
    auto env = make_environment("two_rooms");
    bool crosses = false;
    for (const auto& w : env.walls)
        crosses = crosses || segments_intersect(env.start.position(), env.beacon, w);
    EXPECT_TRUE(crosses);
}

TEST(Arena, WallsStopTheRobot)
{
    Environment env = open_arena();
    env.walls.push_back({{0.3, -1.0}, {0.3, 1.0}});
    ArenaParams ap;
    auto model = differential(0.04);
    RobotState s{{0.0, 0.0, 0.0}, 0.0};
    for (int i = 0; i < 200; ++i)
        s = step(s, model, std::vector<double>{0.15, 0.15}, env, ap, 0.1);
    EXPECT_NEAR(s.pose.x, 0.3 - model.radius(), 1e-6);
    EXPECT_GE(distance_to_wall(s.pose.position(), env.walls[0]), model.radius() - 1e-9);
}

TEST(Arena, ActuationMapping)
{
    ArenaParams ap;
    std::vector<double> out{0.0, 0.5, 1.0, 0.25};
    std::vector<double> cmd(4);
    map_actuation(out, 3, ap, cmd);
    EXPECT_DOUBLE_EQ(cmd[0], -ap.wheel_max_speed);
    EXPECT_DOUBLE_EQ(cmd[1], 0.0);
    EXPECT_DOUBLE_EQ(cmd[2], ap.wheel_max_speed);
    EXPECT_DOUBLE_EQ(cmd[3], 0.25 * ap.joint_max_frequency);
    EXPECT_EQ(ap.control_steps(), 600u);
}

TEST(Arena, EnvironmentJsonRoundTrip)
{
    for (auto name : kEnvironmentNames) {
        auto env = make_environment(name);
        std::stringstream ss;
        write_environment(ss, env);
        EXPECT_EQ(read_environment(ss), env) << name;
    }
    EXPECT_THROW(make_environment("maze"), Error);
}

TEST(Arena, ShippedLayoutsMatchBuiltIns)
{
    for (auto name : kEnvironmentNames) {
        std::string path = std::string(MELAI_DATA_DIR) + "/environments/" + std::string(name) + ".json";
        EXPECT_EQ(load_environment(path), make_environment(name)) << path;
    }
}
