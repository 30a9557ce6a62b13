#include "pmem/scene_sim.hpp"

#include "pmem/errors.hpp"
#include "pmem/parallel.hpp"
#include "pmem/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace pmem {
namespace {

using nlohmann::json;

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("scene spec: expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

bool color_valid(const Vec3& c) { return c.allFinite() && c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0; }

constexpr double kHitEpsilon = 1e-9;

// Slab test; returns entry distance and entry-face normal for rays starting outside.
std::optional<RayHit> intersect_box(const Box& box, const Vec3& o, const Vec3& d) {
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int near_axis = -1;
    bool near_positive_face = false;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
            continue;
        }
        double t0 = (box.min[a] - o[a]) / d[a];
        double t1 = (box.max[a] - o[a]) / d[a];
        bool positive = false;  // face hit first is the min face
        if (t0 > t1) {
            std::swap(t0, t1);
            positive = true;
        }
        if (t0 > t_near) {
            t_near = t0;
            near_axis = a;
            near_positive_face = positive;
        }
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return std::nullopt;
    }
    if (near_axis < 0 || t_near <= kHitEpsilon) return std::nullopt;
    RayHit hit;
    hit.distance = t_near;
    hit.normal = Vec3::Zero();
    hit.normal[near_axis] = near_positive_face ? 1.0 : -1.0;
    hit.color = box.face_colors[static_cast<std::size_t>(near_axis * 2 + (near_positive_face ? 1 : 0))];
    return hit;
}

}  // namespace

bool Scene::contains(const Vec3& p) const {
    return (p.array() >= bounds_min.array()).all() && (p.array() <= bounds_max.array()).all();
}

SceneSpec scene_spec_from_json(std::string_view json_text) {
    const json j = json::parse(json_text);
    SceneSpec spec;
    if (j.contains("bounds")) {
        spec.bounds_min = vec3_from_json(j.at("bounds").at("min"));
        spec.bounds_max = vec3_from_json(j.at("bounds").at("max"));
    }
    if (j.contains("boxes")) {
        for (const json& jb : j.at("boxes")) {
            Box box;
            box.min = vec3_from_json(jb.at("min"));
            box.max = vec3_from_json(jb.at("max"));
            if (jb.contains("colors")) {
                const json& colors = jb.at("colors");
                if (colors.size() != 6) throw std::invalid_argument("scene spec: box colors needs 6 entries");
                for (std::size_t f = 0; f < 6; ++f) box.face_colors[f] = vec3_from_json(colors[f]);
            } else {
                box.face_colors.fill(vec3_from_json(jb.value("color", json::array({0.5, 0.5, 0.5}))));
            }
            spec.boxes.push_back(box);
        }
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("random")) {
        const json& r = j.at("random");
        spec.random.n_boxes = r.value("n_boxes", 0);
        if (r.contains("size_range")) {
            spec.random.size_min = r.at("size_range").at(0).get<double>();
            spec.random.size_max = r.at("size_range").at(1).get<double>();
        }
    }
    if (j.contains("floor_color")) spec.floor_color = vec3_from_json(j.at("floor_color"));
    if (j.contains("wall_color")) spec.wall_color = vec3_from_json(j.at("wall_color"));
    if (j.contains("sky_color")) spec.sky_color = vec3_from_json(j.at("sky_color"));
    spec.max_range = j.value("max_range", spec.max_range);
    return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
    json j;
    j["bounds"] = {{"min", vec3_to_json(spec.bounds_min)}, {"max", vec3_to_json(spec.bounds_max)}};
    j["boxes"] = json::array();
    for (const Box& box : spec.boxes) {
        json colors = json::array();
        for (const Vec3& c : box.face_colors) colors.push_back(vec3_to_json(c));
        j["boxes"].push_back({{"min", vec3_to_json(box.min)}, {"max", vec3_to_json(box.max)}, {"colors", colors}});
    }
    j["seed"] = spec.seed;
    j["random"] = {{"n_boxes", spec.random.n_boxes},
                   {"size_range", json::array({spec.random.size_min, spec.random.size_max})}};
    j["floor_color"] = vec3_to_json(spec.floor_color);
    j["wall_color"] = vec3_to_json(spec.wall_color);
    j["sky_color"] = vec3_to_json(spec.sky_color);
    j["max_range"] = spec.max_range;
    return j.dump(2);
}

Scene build_scene(const SceneSpec& spec) {
    require((spec.bounds_max.array() > spec.bounds_min.array()).all(), "build_scene: empty bounds");
    require(spec.max_range > 0.0, "build_scene: max_range must be positive");
    for (const Vec3* c : {&spec.floor_color, &spec.wall_color, &spec.sky_color})
        require(color_valid(*c), "build_scene: colors must lie in [0,1]");

    Scene scene;
    scene.bounds_min = spec.bounds_min;
    scene.bounds_max = spec.bounds_max;
    scene.floor_color = spec.floor_color;
    scene.wall_color = spec.wall_color;
    scene.sky_color = spec.sky_color;
    scene.max_range = spec.max_range;

    for (const Box& box : spec.boxes) {
        require((box.min.array() < box.max.array()).all(), "build_scene: box min must be below max");
        if (!scene.contains(box.min) || !scene.contains(box.max)) throw Error("build_scene: box outside scene bounds");
        for (const Vec3& c : box.face_colors) require(color_valid(c), "build_scene: colors must lie in [0,1]");
        scene.boxes.push_back(box);
    }

    if (spec.random.n_boxes > 0) {
        require(spec.random.size_min > 0.0 && spec.random.size_min <= spec.random.size_max,
                "build_scene: invalid random size range");
        Rng rng(spec.seed);
        const Vec3 extent = spec.bounds_max - spec.bounds_min;
        for (int i = 0; i < spec.random.n_boxes; ++i) {
            Vec3 size;
            for (int a = 0; a < 3; ++a) size[a] = std::min(rng.uniform(spec.random.size_min, spec.random.size_max), extent[a]);
            Box box;
            box.min.x() = spec.bounds_min.x() + rng.uniform() * (extent.x() - size.x());
            box.min.y() = spec.bounds_min.y();
            box.min.z() = spec.bounds_min.z() + rng.uniform() * (extent.z() - size.z());
            box.max = box.min + size;
            const Vec3 base(rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95));
            for (Vec3& c : box.face_colors) {
                c = (base + Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)))
                        .cwiseMax(0.0)
                        .cwiseMin(1.0);
            }
            scene.boxes.push_back(box);
        }
    }
    return scene;
}

SceneSpec random_room_spec(std::uint64_t seed, double size, int n_boxes) {
    SceneSpec spec;
    spec.bounds_min = Vec3(0.0, 0.0, 0.0);
    spec.bounds_max = Vec3(size, 3.0, size);
    spec.seed = seed;
    spec.random.n_boxes = n_boxes;
    spec.random.size_min = 0.4;
    spec.random.size_max = std::max(0.5, size / 6.0);
    return spec;
}

std::optional<RayHit> raycast(const Scene& scene, const Vec3& o, const Vec3& d) {
    std::optional<RayHit> best;
    auto consider = [&](double t, const Vec3& normal, const Vec3& color) {
        if (t > kHitEpsilon && (!best || t < best->distance)) best = RayHit{t, normal, color};
    };

    const Vec3& lo = scene.bounds_min;
    const Vec3& hi = scene.bounds_max;
    if (d.y() < 0.0) {
        const double t = (lo.y() - o.y()) / d.y();
        const Vec3 p = o + t * d;
        if (p.x() >= lo.x() && p.x() <= hi.x() && p.z() >= lo.z() && p.z() <= hi.z())
            consider(t, Vec3::UnitY(), scene.floor_color);
    }
    for (int a : {0, 2}) {
        if (d[a] == 0.0) continue;
        const double wall = d[a] > 0.0 ? hi[a] : lo[a];
        const double t = (wall - o[a]) / d[a];
        const Vec3 p = o + t * d;
        const int other = a == 0 ? 2 : 0;
        if (p.y() >= lo.y() && p.y() <= hi.y() && p[other] >= lo[other] && p[other] <= hi[other]) {
            Vec3 normal = Vec3::Zero();
            normal[a] = d[a] > 0.0 ? -1.0 : 1.0;
            consider(t, normal, scene.wall_color);
        }
    }
    for (const Box& box : scene.boxes) {
        if (auto hit = intersect_box(box, o, d)) consider(hit->distance, hit->normal, hit->color);
    }
    return best;
}

RgbdFrame render(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& K) {
    K.validate();
    if (!scene.contains(pose.translation)) throw Error("render: camera outside scene bounds");
    RgbdFrame frame(K.width, K.height);
    parallel_for(static_cast<std::size_t>(K.height), [&](std::size_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < K.width; ++u) {
            // camera-frame ray has z = 1, so the hit distance is the depth
            const Vec3 dir = pose.rotation * K.ray(u + 0.5, v + 0.5);
            const auto hit = raycast(scene, pose.translation, dir);
            Vec3 color = scene.sky_color;
            double depth = 0.0;
            if (hit && hit->distance <= scene.max_range) {
                const double lambert = std::abs(hit->normal.dot(dir.normalized()));
                color = hit->color * lambert;
                depth = hit->distance;
            }
            for (int c = 0; c < 3; ++c) frame.color(u, v, c) = static_cast<float>(std::clamp(color[c], 0.0, 1.0));
            frame.depth_at(u, v) = static_cast<float>(depth);
        }
    });
    return frame;
}

std::array<int, 2> OccupancyGrid::cell_of(double x, double z) const {
    return {static_cast<int>(std::floor((x - origin_x) / cell)), static_cast<int>(std::floor((z - origin_z) / cell))};
}

Vec2 OccupancyGrid::center(int ix, int iz) const {
    return {origin_x + (ix + 0.5) * cell, origin_z + (iz + 0.5) * cell};
}

std::size_t OccupancyGrid::navigable_count() const {
    return static_cast<std::size_t>(std::count(navigable.begin(), navigable.end(), std::uint8_t{1}));
}

OccupancyGrid occupancy(const Scene& scene, double cell, const OccupancyOptions& options) {
    require(cell > 0.0, "occupancy: cell must be positive");
    OccupancyGrid grid;
    grid.origin_x = scene.bounds_min.x();
    grid.origin_z = scene.bounds_min.z();
    grid.cell = cell;
    grid.floor_y = scene.floor_y();
    grid.nx = static_cast<int>(std::ceil((scene.bounds_max.x() - scene.bounds_min.x()) / cell - 1e-9));
    grid.nz = static_cast<int>(std::ceil((scene.bounds_max.z() - scene.bounds_min.z()) / cell - 1e-9));
    grid.navigable.assign(static_cast<std::size_t>(grid.nx) * grid.nz, 1);

    const double body_top = grid.floor_y + options.agent_height;
    for (const Box& box : scene.boxes) {
        if (box.max.y() <= grid.floor_y || box.min.y() >= body_top) continue;
        const double x0 = box.min.x() - options.agent_radius, x1 = box.max.x() + options.agent_radius;
        const double z0 = box.min.z() - options.agent_radius, z1 = box.max.z() + options.agent_radius;
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double cx0 = grid.origin_x + ix * cell, cx1 = cx0 + cell;
            if (cx1 <= x0 || cx0 >= x1) continue;
            for (int iz = 0; iz < grid.nz; ++iz) {
                const double cz0 = grid.origin_z + iz * cell, cz1 = cz0 + cell;
                if (cz1 <= z0 || cz0 >= z1) continue;
                grid.navigable[static_cast<std::size_t>(ix) * grid.nz + iz] = 0;
            }
        }
    }
    return grid;
}

namespace {

// BFS predecessor search; returns the cell path from start to goal inclusive,
// or an empty vector when unreachable.
std::vector<std::array<int, 2>> bfs_cells(const OccupancyGrid& occ, std::array<int, 2> start,
                                          std::array<int, 2> goal) {
    constexpr int kSteps[4][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}};
    const auto id = [&](int ix, int iz) { return static_cast<std::size_t>(ix) * occ.nz + iz; };
    std::vector<std::int64_t> parent(occ.navigable.size(), -1);
    std::deque<std::array<int, 2>> queue{start};
    parent[id(start[0], start[1])] = static_cast<std::int64_t>(id(start[0], start[1]));
    while (!queue.empty()) {
        const auto [x, z] = queue.front();
        queue.pop_front();
        if (x == goal[0] && z == goal[1]) break;
        for (const auto& s : kSteps) {
            const int nx = x + s[0], nz = z + s[1];
            if (!occ.is_navigable(nx, nz) || parent[id(nx, nz)] >= 0) continue;
            parent[id(nx, nz)] = static_cast<std::int64_t>(id(x, z));
            queue.push_back({nx, nz});
        }
    }
    if (parent[id(goal[0], goal[1])] < 0) return {};
    std::vector<std::array<int, 2>> path;
    for (std::size_t cur = id(goal[0], goal[1]);;) {
        path.push_back({static_cast<int>(cur / occ.nz), static_cast<int>(cur % occ.nz)});
        const auto p = static_cast<std::size_t>(parent[cur]);
        if (p == cur) break;
        cur = p;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi + 1e-12) a += 2.0 * std::numbers::pi;
    return a;
}

}  // namespace

ActionChunk shortest_path_actions(const OccupancyGrid& occ, const CameraPose& start, const Vec2& goal,
                                  const ActionMagnitudes& magnitudes, std::size_t max_actions) {
    const auto start_cell = occ.cell_of(start.translation.x(), start.translation.z());
    const auto goal_cell = occ.cell_of(goal.x(), goal.y());
    require(occ.is_navigable(start_cell[0], start_cell[1]), "shortest_path_actions: start cell not navigable");
    require(occ.is_navigable(goal_cell[0], goal_cell[1]), "shortest_path_actions: goal cell not navigable");

    const double moves_per_cell = occ.cell / magnitudes.step;
    const long forward_per_cell = std::lround(moves_per_cell);
    require(forward_per_cell >= 1 && std::abs(moves_per_cell - forward_per_cell) < 1e-6,
            "shortest_path_actions: cell size must be a multiple of the step");

    const auto path = bfs_cells(occ, start_cell, goal_cell);
    if (path.empty()) throw Error("no path");

    ActionChunk actions;
    double yaw = start.yaw();
    for (std::size_t i = 1; i < path.size() && actions.size() < max_actions; ++i) {
        const int dx = path[i][0] - path[i - 1][0];
        const int dz = path[i][1] - path[i - 1][1];
        const double target = std::atan2(static_cast<double>(dx), static_cast<double>(dz));
        const double delta = wrap_angle(target - yaw);
        const double turns_exact = std::abs(delta) / magnitudes.turn;
        const long turns = std::lround(turns_exact);
        require(std::abs(turns_exact - turns) < 1e-6,
                "shortest_path_actions: heading not reachable with the turn magnitude");
        const ActionKind turn_kind = delta >= 0.0 ? ActionKind::TurnLeft : ActionKind::TurnRight;
        for (long k = 0; k < turns; ++k) actions.push_back(magnitudes.make(turn_kind));
        yaw = target;
        for (long k = 0; k < forward_per_cell; ++k) actions.push_back(magnitudes.make(ActionKind::MoveForward));
    }
    if (actions.size() > max_actions) actions.resize(max_actions);
    return actions;
}

Trajectory collect_trajectory(const Scene& scene, const CameraIntrinsics& K, std::uint64_t seed,
                              const CollectOptions& options) {
    require(options.stride >= 1, "collect_trajectory: stride must be >= 1");
    require(options.turnaround_prob >= 0.0 && options.turnaround_prob <= 1.0,
            "collect_trajectory: turnaround_prob must be in [0,1]");
    const OccupancyGrid occ = occupancy(scene, options.cell, options.occupancy);

    std::vector<std::array<int, 2>> cells;
    for (int ix = 0; ix < occ.nx; ++ix)
        for (int iz = 0; iz < occ.nz; ++iz)
            if (occ.is_navigable(ix, iz)) cells.push_back({ix, iz});
    require(cells.size() >= 2, "collect_trajectory: scene needs at least two navigable cells");

    Rng rng(seed);
    const auto start_cell = cells[rng.below(cells.size())];
    const double quarter = std::numbers::pi / 2.0;
    const double quarter_turns = quarter / options.magnitudes.turn;
    double yaw = 0.0;
    if (std::abs(quarter_turns - std::round(quarter_turns)) < 1e-9)
        yaw = static_cast<double>(rng.below(4)) * quarter - std::numbers::pi;
    const Vec2 start_xz = occ.center(start_cell[0], start_cell[1]);
    const CameraPose start =
        CameraPose::upright(Vec3(start_xz.x(), scene.floor_y() + options.camera_height, start_xz.y()), yaw);

    Trajectory traj;
    traj.start_pose = start;
    traj.stride = options.stride;

    if (rng.uniform() < options.turnaround_prob) {
        const long full_turn = std::lround(2.0 * std::numbers::pi / options.magnitudes.turn);
        for (long k = 0; k < full_turn; ++k) traj.actions.push_back(options.magnitudes.make(ActionKind::TurnLeft));
    }

    ActionChunk path;
    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        const auto goal_cell = cells[rng.below(cells.size())];
        try {
            path = shortest_path_actions(occ, start, occ.center(goal_cell[0], goal_cell[1]), options.magnitudes,
                                         options.max_actions);
            found = true;
        } catch (const Error&) {
            // unreachable goal: resample
        }
    }
    if (!found) throw Error("no path");
    traj.actions.insert(traj.actions.end(), path.begin(), path.end());
    if (traj.actions.size() > options.max_actions) traj.actions.resize(options.max_actions);

    traj.poses.push_back(start);
    const auto rest = compose_chunk(start, traj.actions);
    traj.poses.insert(traj.poses.end(), rest.begin(), rest.end());
    for (std::size_t step = 0; step < traj.poses.size(); step += static_cast<std::size_t>(options.stride)) {
        traj.frame_steps.push_back(step);
        traj.frames.push_back(render(scene, traj.poses[step], K));
    }
    return traj;
}

}  // namespace pmem
