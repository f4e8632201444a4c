#pragma once

#include "melai/cppn.hpp"

#include <compare>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace melai::morph {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Voxel {
    int i = 0;
    int j = 0;
    int k = 0;

    friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

enum class OrganKind : int { Wheel = 0, Sensor = 1, Joint = 2, Caster = 3 };

std::string_view to_string(OrganKind kind);

inline bool is_active(OrganKind kind) { return kind != OrganKind::Caster; }

/// (num_sensors, num_wheels, num_joints); casters are passive and not counted.
struct RobotType {
    int num_sensors = 0;
    int num_wheels = 0;
    int num_joints = 0;

    int num_actuators() const { return num_wheels + num_joints; }
    int num_active() const { return num_sensors + num_wheels + num_joints; }

    friend auto operator<=>(const RobotType&, const RobotType&) = default;
};

struct Organ {
    int id = 0;
    OrganKind kind = OrganKind::Wheel;
    /// Mount point on the skeleton surface, body frame, cm.
    Vec3 position;
    /// Unit outward surface normal.
    Vec3 normal;
    int segment_id = 0;
    /// Root segment: the host voxel. Sub-segments: {face, 0, 0}.
    Voxel site;
    /// CPPN output that produced the organ; higher survives the filter first.
    double strength = 0.0;

    friend bool operator==(const Organ&, const Organ&) = default;
};

/// Segment 0 is the root skeleton (voxel set, contains the head). Other
/// segments are 4 cm cuboids hanging off a joint organ.
struct Segment {
    int id = 0;
    int parent_joint = -1;
    std::vector<Voxel> voxels;
    /// Cuboid centre, body frame, cm (sub-segments only).
    Vec3 centre;
    double side_cm = 0.0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct BodyPlan {
    int grid_resolution = 0;
    double voxel_size_cm = 0.0;
    Voxel head;
    std::vector<Segment> segments;
    std::vector<Organ> organs;
    RobotType type;

    const Segment& root() const { return segments.front(); }
    const Segment* find_segment(int id) const;

    friend bool operator==(const BodyPlan&, const BodyPlan&) = default;
};

struct MorphParams {
    int grid_resolution = 11;
    double skeleton_threshold = 0.5;
    double organ_threshold = 0.5;
    int max_head_active = 8;
    int max_total_active = 16;
    int max_active_per_subsegment = 1;

    void validate() const;
};

inline constexpr double kMaxSkeletonCm = 23.0;
inline constexpr double kSubSegmentSideCm = 4.0;
inline constexpr double kJointLengthCm = 2.0;

/// Receives every CPPN query issued during decoding (x, y, z, d).
using QueryObserver = std::function<void(double, double, double, double)>;

/// Raw decode; the result may violate manufacturability caps. Throws
/// DegenerateBodyError when no skeleton voxel is expressed.
BodyPlan decode(const neat::CppnGenome& genome, const MorphParams& params,
                const QueryObserver& observer = {});

/// Removes organs failing the manufacturability tests and enforces the
/// active-organ caps. Idempotent.
BodyPlan manufacturability_filter(const BodyPlan& plan, const MorphParams& params = {});

RobotType robot_type(const BodyPlan& plan);

/// decode + manufacturability_filter + type.
BodyPlan develop(const neat::CppnGenome& genome, const MorphParams& params);

/// Number of distinct type tuples the caps allow.
int reachable_type_count(const MorphParams& params = {});

/// Centre of a root voxel in the body frame, cm.
Vec3 voxel_centre_cm(const Voxel& v, int resolution);

/// CPPN coordinate of a body-frame point: voxel centres map onto the
/// [-1, 1] lattice; points outside are clamped.
Vec3 normalized_coordinate(const Vec3& p_cm, int resolution);

void write_body_plan(std::ostream& os, const BodyPlan& plan);
/// Top-down projection of skeleton, sub-segments and organs.
void write_body_svg(std::ostream& os, const BodyPlan& plan);

} // namespace melai::morph
