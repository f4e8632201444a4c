#include "melai/morphogen.hpp"

#include "melai/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace melai::morph {

namespace {

constexpr std::array<OrganKind, 4> kOrganKinds = {OrganKind::Wheel, OrganKind::Sensor,
                                                  OrganKind::Joint, OrganKind::Caster};

// Face directions; bottom first so that a tie favours ground contact.
constexpr std::array<std::array<int, 3>, 6> kFaces = {{
    {0, 0, -1}, {0, 0, 1}, {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}}};

neat::CppnOutput output_for(OrganKind kind)
{
    switch (kind) {
    case OrganKind::Wheel:
        return neat::CppnOutput::Wheel;
    case OrganKind::Sensor:
        return neat::CppnOutput::Sensor;
    case OrganKind::Joint:
        return neat::CppnOutput::Joint;
    case OrganKind::Caster:
        return neat::CppnOutput::Caster;
    }
    return neat::CppnOutput::Caster;
}

Vec3 add(const Vec3& a, const Vec3& b, double scale = 1.0)
{
    return {a.x + scale * b.x, a.y + scale * b.y, a.z + scale * b.z};
}

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

Vec3 face_vec(std::size_t f)
{
    return {static_cast<double>(kFaces[f][0]), static_cast<double>(kFaces[f][1]),
            static_cast<double>(kFaces[f][2])};
}

class VoxelSet {
public:
    explicit VoxelSet(int n) : n_(n), bits_(static_cast<std::size_t>(n * n * n), false) {}

    bool inside(int i, int j, int k) const
    {
        return i >= 0 && j >= 0 && k >= 0 && i < n_ && j < n_ && k < n_;
    }
    bool contains(int i, int j, int k) const { return inside(i, j, k) && bits_[index(i, j, k)]; }
    bool contains(const Voxel& v) const { return contains(v.i, v.j, v.k); }
    void insert(const Voxel& v) { bits_[index(v.i, v.j, v.k)] = true; }

private:
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>((i * n_ + j) * n_ + k);
    }
    int n_;
    std::vector<bool> bits_;
};

std::vector<Voxel> largest_component(const std::vector<Voxel>& cells, int n)
{
    VoxelSet present(n);
    for (const auto& v : cells)
        present.insert(v);
    VoxelSet seen(n);
    std::vector<Voxel> best;
    for (const auto& start : cells) {
        if (seen.contains(start))
            continue;
        std::vector<Voxel> comp;
        std::vector<Voxel> stack{start};
        seen.insert(start);
        while (!stack.empty()) {
            Voxel v = stack.back();
            stack.pop_back();
            comp.push_back(v);
            for (const auto& f : kFaces) {
                Voxel w{v.i + f[0], v.j + f[1], v.k + f[2]};
                if (present.contains(w) && !seen.contains(w)) {
                    seen.insert(w);
                    stack.push_back(w);
                }
            }
        }
        if (comp.size() > best.size())
            best = std::move(comp);
    }
    std::sort(best.begin(), best.end());
    return best;
}

// Exposed faces of a voxel as indices into kFaces.
std::vector<std::size_t> exposed_faces(const VoxelSet& skeleton, const Voxel& v)
{
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < kFaces.size(); ++f)
        if (!skeleton.contains(v.i + kFaces[f][0], v.j + kFaces[f][1], v.k + kFaces[f][2]))
            out.push_back(f);
    return out;
}

Vec3 outward_normal(const std::vector<std::size_t>& faces)
{
    Vec3 sum;
    for (std::size_t f : faces)
        sum = add(sum, face_vec(f));
    double len = norm(sum);
    if (len < 1e-12)
        return face_vec(faces.front());
    return {sum.x / len, sum.y / len, sum.z / len};
}

bool higher_priority(const Organ& a, const Organ& b)
{
    if (a.strength != b.strength)
        return a.strength > b.strength;
    if (a.segment_id != b.segment_id)
        return a.segment_id < b.segment_id;
    if (a.site != b.site)
        return a.site < b.site;
    if (a.kind != b.kind)
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.id < b.id;
}

struct Box {
    Vec3 lo;
    Vec3 hi;
};

bool overlaps(const Box& a, const Box& b)
{
    constexpr double eps = 1e-9;
    return a.lo.x < b.hi.x - eps && b.lo.x < a.hi.x - eps && a.lo.y < b.hi.y - eps &&
           b.lo.y < a.hi.y - eps && a.lo.z < b.hi.z - eps && b.lo.z < a.hi.z - eps;
}

Box cube_box(const Vec3& c, double side)
{
    double h = side / 2.0;
    return {{c.x - h, c.y - h, c.z - h}, {c.x + h, c.y + h, c.z + h}};
}

} // namespace

std::string_view to_string(OrganKind kind)
{
    switch (kind) {
    case OrganKind::Wheel:
        return "wheel";
    case OrganKind::Sensor:
        return "sensor";
    case OrganKind::Joint:
        return "joint";
    case OrganKind::Caster:
        return "caster";
    }
    return "?";
}

const Segment* BodyPlan::find_segment(int id) const
{
    for (const auto& s : segments)
        if (s.id == id)
            return &s;
    return nullptr;
}

void MorphParams::validate() const
{
    if (grid_resolution < 3)
        throw ConfigError("morphogen.grid_resolution must be at least 3");
    if (max_head_active < 0 || max_total_active < 0 || max_active_per_subsegment < 0)
        throw ConfigError("morphogen organ caps must be non-negative");
}

Vec3 voxel_centre_cm(const Voxel& v, int resolution)
{
    double s = kMaxSkeletonCm / resolution;
    double h = kMaxSkeletonCm / 2.0;
    return {-h + (v.i + 0.5) * s, -h + (v.j + 0.5) * s, -h + (v.k + 0.5) * s};
}

Vec3 normalized_coordinate(const Vec3& p, int resolution)
{
    double half = kMaxSkeletonCm / 2.0 - kMaxSkeletonCm / resolution / 2.0;
    auto c = [&](double v) { return std::clamp(v / half, -1.0, 1.0); };
    return {c(p.x), c(p.y), c(p.z)};
}

BodyPlan decode(const neat::CppnGenome& genome, const MorphParams& params,
                const QueryObserver& observer)
{
    params.validate();
    const neat::Cppn net(genome);
    const int n = params.grid_resolution;
    const double s = kMaxSkeletonCm / n;
    const double sqrt3 = std::sqrt(3.0);

    auto query = [&](double x, double y, double z) {
        double d = std::sqrt(x * x + y * y + z * z) / sqrt3;
        if (observer)
            observer(x, y, z, d);
        return net.query(x, y, z, d);
    };

    std::map<Voxel, std::array<double, neat::kNumOutputs>> outputs;
    std::vector<Voxel> skeleton_cells;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                auto lattice = [n](int a) { return -1.0 + 2.0 * a / (n - 1); };
                auto out = query(lattice(i), lattice(j), lattice(k));
                if (out[static_cast<int>(neat::CppnOutput::Skeleton)] > params.skeleton_threshold) {
                    skeleton_cells.push_back({i, j, k});
                    outputs[{i, j, k}] = out;
                }
            }
    if (skeleton_cells.empty())
        throw DegenerateBodyError("CPPN expresses no skeleton voxel");

    BodyPlan plan;
    plan.grid_resolution = n;
    plan.voxel_size_cm = s;

    Segment root;
    root.id = 0;
    root.voxels = largest_component(skeleton_cells, n);
    VoxelSet skeleton(n);
    for (const auto& v : root.voxels)
        skeleton.insert(v);

    const double mid = (n - 1) / 2.0;
    auto centre_dist = [mid](const Voxel& v) {
        return (v.i - mid) * (v.i - mid) + (v.j - mid) * (v.j - mid) + (v.k - mid) * (v.k - mid);
    };
    plan.head = *std::min_element(root.voxels.begin(), root.voxels.end(),
                                  [&](const Voxel& a, const Voxel& b) {
                                      return centre_dist(a) < centre_dist(b);
                                  });
    plan.segments.push_back(root);

    int next_id = 0;
    for (const auto& v : plan.segments.front().voxels) {
        auto faces = exposed_faces(skeleton, v);
        if (faces.empty())
            continue;
        Vec3 normal = outward_normal(faces);
        Vec3 pos = add(voxel_centre_cm(v, n), normal, s / 2.0);
        const auto& out = outputs.at(v);
        for (OrganKind kind : kOrganKinds) {
            double value = out[static_cast<int>(output_for(kind))];
            if (value > params.organ_threshold)
                plan.organs.push_back({next_id++, kind, pos, normal, 0, v, value});
        }
    }

    // One cuboid per root joint; its free faces are queried for organs.
    const std::size_t root_organs = plan.organs.size();
    int next_segment = 1;
    for (std::size_t o = 0; o < root_organs; ++o) {
        if (plan.organs[o].kind != OrganKind::Joint)
            continue;
        const Organ joint = plan.organs[o];
        Segment seg;
        seg.id = next_segment++;
        seg.parent_joint = joint.id;
        seg.side_cm = kSubSegmentSideCm;
        seg.centre = add(joint.position, joint.normal, kJointLengthCm + kSubSegmentSideCm / 2.0);

        std::size_t attached = 0;
        double most_negative = 2.0;
        for (std::size_t f = 0; f < kFaces.size(); ++f) {
            Vec3 fv = face_vec(f);
            double dot = fv.x * joint.normal.x + fv.y * joint.normal.y + fv.z * joint.normal.z;
            if (dot < most_negative - 1e-12) {
                most_negative = dot;
                attached = f;
            }
        }
        for (std::size_t f = 0; f < kFaces.size(); ++f) {
            if (f == attached)
                continue;
            Vec3 fv = face_vec(f);
            Vec3 centre = add(seg.centre, fv, kSubSegmentSideCm / 2.0);
            Vec3 q = normalized_coordinate(centre, n);
            auto out = query(q.x, q.y, q.z);
            for (OrganKind kind : kOrganKinds) {
                double value = out[static_cast<int>(output_for(kind))];
                if (value > params.organ_threshold)
                    plan.organs.push_back(
                        {next_id++, kind, centre, fv, seg.id, {static_cast<int>(f), 0, 0}, value});
            }
        }
        plan.segments.push_back(std::move(seg));
    }

    plan.type = robot_type(plan);
    return plan;
}

BodyPlan manufacturability_filter(const BodyPlan& plan, const MorphParams& params)
{
    const int n = plan.grid_resolution;
    VoxelSet skeleton(n);
    for (const auto& v : plan.root().voxels)
        skeleton.insert(v);

    std::set<int> removed;
    std::map<int, int> child_of_joint;
    for (const auto& seg : plan.segments)
        if (seg.parent_joint >= 0)
            child_of_joint[seg.parent_joint] = seg.id;
    std::set<int> dead_segments;

    auto remove = [&](const Organ& o) {
        if (!removed.insert(o.id).second)
            return;
        if (o.kind != OrganKind::Joint)
            return;
        auto it = child_of_joint.find(o.id);
        if (it == child_of_joint.end())
            return;
        dead_segments.insert(it->second);
        for (const auto& other : plan.organs)
            if (other.segment_id == it->second)
                removed.insert(other.id);
    };
    auto alive = [&](const Organ& o) { return removed.count(o.id) == 0; };

    std::vector<Organ> by_priority = plan.organs;
    std::stable_sort(by_priority.begin(), by_priority.end(), higher_priority);

    // Surface attachment and segment existence.
    for (const auto& o : by_priority) {
        if (o.segment_id == 0) {
            bool on_surface = skeleton.contains(o.site) && !exposed_faces(skeleton, o.site).empty();
            if (!on_surface)
                remove(o);
        } else {
            const Segment* seg = plan.find_segment(o.segment_id);
            if (seg == nullptr || o.site.i < 0 || o.site.i >= 6)
                remove(o);
        }
    }

    // Wheels need a downward-facing mount to reach the ground.
    for (const auto& o : by_priority)
        if (alive(o) && o.kind == OrganKind::Wheel && !(o.normal.z < -1e-9))
            remove(o);

    // Sub-segment cuboids must not collide with the skeleton or each other.
    std::vector<Box> solid;
    for (const auto& v : plan.root().voxels)
        solid.push_back(cube_box(voxel_centre_cm(v, n), plan.voxel_size_cm));
    std::vector<Box> cuboids;
    for (const auto& o : by_priority) {
        if (!alive(o) || o.kind != OrganKind::Joint || o.segment_id != 0)
            continue;
        auto it = child_of_joint.find(o.id);
        if (it == child_of_joint.end())
            continue;
        const Segment* seg = plan.find_segment(it->second);
        Box box = cube_box(seg->centre, seg->side_cm);
        bool hit = std::any_of(solid.begin(), solid.end(), [&](const Box& b) { return overlaps(box, b); }) ||
                   std::any_of(cuboids.begin(), cuboids.end(), [&](const Box& b) { return overlaps(box, b); });
        if (hit)
            remove(o);
        else
            cuboids.push_back(box);
    }

    // One organ per mount site.
    std::set<std::pair<int, Voxel>> occupied;
    for (const auto& o : by_priority) {
        if (!alive(o))
            continue;
        if (!occupied.insert({o.segment_id, o.site}).second)
            remove(o);
    }

    // Daisy-chain limit on each sub-segment.
    std::map<int, int> per_segment;
    for (const auto& o : by_priority) {
        if (!alive(o) || o.segment_id == 0 || !is_active(o.kind))
            continue;
        if (++per_segment[o.segment_id] > params.max_active_per_subsegment)
            remove(o);
    }

    // Head connector limit.
    int head_active = 0;
    for (const auto& o : by_priority) {
        if (!alive(o) || o.segment_id != 0 || !is_active(o.kind))
            continue;
        if (++head_active > params.max_head_active)
            remove(o);
    }

    int total_active = 0;
    for (const auto& o : by_priority) {
        if (!alive(o) || !is_active(o.kind))
            continue;
        if (++total_active > params.max_total_active)
            remove(o);
    }

    BodyPlan out = plan;
    out.organs.clear();
    for (const auto& o : plan.organs)
        if (alive(o))
            out.organs.push_back(o);
    std::erase_if(out.segments, [&](const Segment& s) {
        return s.id != 0 && (dead_segments.count(s.id) > 0 || removed.count(s.parent_joint) > 0);
    });
    out.type = robot_type(out);
    return out;
}

RobotType robot_type(const BodyPlan& plan)
{
    RobotType t;
    for (const auto& o : plan.organs) {
        switch (o.kind) {
        case OrganKind::Wheel:
            ++t.num_wheels;
            break;
        case OrganKind::Sensor:
            ++t.num_sensors;
            break;
        case OrganKind::Joint:
            ++t.num_joints;
            break;
        case OrganKind::Caster:
            break;
        }
    }
    return t;
}

BodyPlan develop(const neat::CppnGenome& genome, const MorphParams& params)
{
    return manufacturability_filter(decode(genome, params), params);
}

int reachable_type_count(const MorphParams& params)
{
    // Root holds up to max_head_active organs; each root joint may carry
    // up to max_active_per_subsegment more on its cuboid.
    std::set<RobotType> types;
    const int head = params.max_head_active;
    for (int s = 0; s <= head; ++s)
        for (int w = 0; s + w <= head; ++w)
            for (int j = 0; s + w + j <= head; ++j) {
                int extra = j * params.max_active_per_subsegment;
                for (int a = 0; a <= extra; ++a)
                    for (int b = 0; a + b <= extra; ++b)
                        for (int c = 0; a + b + c <= extra; ++c) {
                            RobotType t{s + a, w + b, j + c};
                            if (t.num_active() <= params.max_total_active)
                                types.insert(t);
                        }
            }
    return static_cast<int>(types.size());
}

void write_body_plan(std::ostream& os, const BodyPlan& plan)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "bodyplan 1\n";
    out << "grid " << plan.grid_resolution << ' ' << plan.voxel_size_cm << '\n';
    out << "head " << plan.head.i << ' ' << plan.head.j << ' ' << plan.head.k << '\n';
    out << "type " << plan.type.num_sensors << ' ' << plan.type.num_wheels << ' '
        << plan.type.num_joints << '\n';
    for (const auto& seg : plan.segments) {
        if (seg.id == 0) {
            out << "segment 0 root " << seg.voxels.size() << '\n';
            for (const auto& v : seg.voxels)
                out << "voxel " << v.i << ' ' << v.j << ' ' << v.k << '\n';
        } else {
            out << "segment " << seg.id << " cuboid " << seg.parent_joint << ' ' << seg.centre.x
                << ' ' << seg.centre.y << ' ' << seg.centre.z << ' ' << seg.side_cm << '\n';
        }
    }
    out << "organs " << plan.organs.size() << '\n';
    for (const auto& o : plan.organs)
        out << "organ " << o.id << ' ' << to_string(o.kind) << ' ' << o.segment_id << ' '
            << o.position.x << ' ' << o.position.y << ' ' << o.position.z << ' ' << o.normal.x
            << ' ' << o.normal.y << ' ' << o.normal.z << ' ' << o.strength << '\n';
    os << out.str();
}

void write_body_svg(std::ostream& os, const BodyPlan& plan)
{
    constexpr double scale = 12.0; // px per cm
    constexpr double extent = 20.0; // cm shown on each side of the origin
    auto px = [](double cm) { return (cm + extent) * scale; };
    auto py = [](double cm) { return (extent - cm) * scale; };
    const double size = 2 * extent * scale;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
       << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    std::set<std::pair<int, int>> columns;
    for (const auto& v : plan.root().voxels)
        columns.insert({v.i, v.j});
    const double s = plan.voxel_size_cm;
    for (auto [i, j] : columns) {
        Vec3 c = voxel_centre_cm({i, j, 0}, plan.grid_resolution);
        os << "<rect x=\"" << px(c.x - s / 2) << "\" y=\"" << py(c.y + s / 2) << "\" width=\""
           << s * scale << "\" height=\"" << s * scale
           << "\" fill=\"#c8c8c8\" stroke=\"#888\" stroke-width=\"0.5\"/>\n";
    }
    for (const auto& seg : plan.segments) {
        if (seg.id == 0)
            continue;
        double h = seg.side_cm / 2;
        os << "<rect x=\"" << px(seg.centre.x - h) << "\" y=\"" << py(seg.centre.y + h)
           << "\" width=\"" << seg.side_cm * scale << "\" height=\"" << seg.side_cm * scale
           << "\" fill=\"#e0d0b0\" stroke=\"#806040\"/>\n";
    }
    for (const auto& o : plan.organs) {
        const char* colour = "#333";
        switch (o.kind) {
        case OrganKind::Wheel:
            colour = "#1f77b4";
            break;
        case OrganKind::Sensor:
            colour = "#d62728";
            break;
        case OrganKind::Joint:
            colour = "#2ca02c";
            break;
        case OrganKind::Caster:
            colour = "#7f7f7f";
            break;
        }
        os << "<circle cx=\"" << px(o.position.x) << "\" cy=\"" << py(o.position.y)
           << "\" r=\"5\" fill=\"" << colour << "\"><title>" << to_string(o.kind)
           << "</title></circle>\n";
    }
    os << "</svg>\n";
}

} // namespace melai::morph
