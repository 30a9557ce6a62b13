#pragma once

// Synthetic box-world scenes, an RGB-D raycaster, a ground-plane occupancy
// grid and shortest-path trajectory collection.

#include "pmem/frame.hpp"
#include "pmem/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pmem {

/// Face order: -x, +x, -y, +y, -z, +z.
struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();
    std::array<Vec3, 6> face_colors{};
};

struct Scene {
    Vec3 bounds_min = Vec3::Zero();
    Vec3 bounds_max = Vec3::Ones();
    std::vector<Box> boxes;
    Vec3 floor_color{0.45, 0.4, 0.35};
    Vec3 wall_color{0.8, 0.8, 0.75};
    Vec3 sky_color{0.5, 0.7, 0.9};
    double max_range = 20.0;

    double floor_y() const { return bounds_min.y(); }
    bool contains(const Vec3& p) const;
    double diagonal() const { return (bounds_max - bounds_min).norm(); }
};

struct RandomBoxes {
    int n_boxes = 0;
    double size_min = 0.5;
    double size_max = 1.5;
};

/// Declarative scene description; the JSON form is
/// {bounds:{min,max}, boxes:[{min,max,color|colors}], seed?, random?:{n_boxes,size_range},
///  floor_color?, wall_color?, sky_color?, max_range?}.
struct SceneSpec {
    Vec3 bounds_min{0.0, 0.0, 0.0};
    Vec3 bounds_max{8.0, 3.0, 8.0};
    std::vector<Box> boxes;
    std::uint64_t seed = 0;
    RandomBoxes random;
    Vec3 floor_color{0.45, 0.4, 0.35};
    Vec3 wall_color{0.8, 0.8, 0.75};
    Vec3 sky_color{0.5, 0.7, 0.9};
    double max_range = 20.0;
};

SceneSpec scene_spec_from_json(std::string_view json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

/// Explicit boxes must lie inside the bounds (pmem::Error otherwise); random
/// boxes stand on the floor and are drawn from `spec.seed`.
Scene build_scene(const SceneSpec& spec);

/// Room of `size` x 3 x `size` meters with `n_boxes` random boxes.
SceneSpec random_room_spec(std::uint64_t seed, double size, int n_boxes);

struct RayHit {
    double distance = 0.0;  // ray parameter, in units of the direction vector
    Vec3 normal = Vec3::Zero();
    Vec3 color = Vec3::Zero();
};

/// Nearest hit of origin + s * direction for s > 0 against floor, walls and
/// boxes. Rays leaving through the open top of the room miss.
std::optional<RayHit> raycast(const Scene& scene, const Vec3& origin, const Vec3& direction);

/// Casts one ray through each pixel center (u + 0.5, v + 0.5). Hits give the
/// face color times |n . ray| and camera-frame depth; misses and hits beyond
/// max_range give the sky color and depth 0.
RgbdFrame render(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& K);

struct OccupancyGrid {
    double origin_x = 0.0;
    double origin_z = 0.0;
    double cell = 0.25;
    int nx = 0;
    int nz = 0;
    double floor_y = 0.0;
    std::vector<std::uint8_t> navigable;  // nx * nz, index ix * nz + iz

    bool in_range(int ix, int iz) const { return ix >= 0 && iz >= 0 && ix < nx && iz < nz; }
    bool is_navigable(int ix, int iz) const {
        return in_range(ix, iz) && navigable[static_cast<std::size_t>(ix) * nz + iz] != 0;
    }
    std::array<int, 2> cell_of(double x, double z) const;
    Vec2 center(int ix, int iz) const;
    std::size_t navigable_count() const;
};

struct OccupancyOptions {
    double agent_radius = 0.1;
    /// A box blocks a cell when its footprint, inflated by the radius, overlaps
    /// the cell and its vertical extent overlaps [floor, floor + agent_height].
    double agent_height = 0.6;
};

OccupancyGrid occupancy(const Scene& scene, double cell, const OccupancyOptions& options = {});

inline constexpr std::size_t kMaxTrajectoryActions = 500;

/// Breadth-first search over 4-connected navigable cells, converted to turn and
/// forward actions. Returns an empty chunk when start and goal share a cell,
/// truncates at `max_actions`, and throws pmem::Error("no path") when the goal
/// is unreachable.
ActionChunk shortest_path_actions(const OccupancyGrid& occ, const CameraPose& start, const Vec2& goal,
                                  const ActionMagnitudes& magnitudes = {},
                                  std::size_t max_actions = kMaxTrajectoryActions);

struct Trajectory {
    CameraPose start_pose;
    ActionChunk actions;
    std::vector<CameraPose> poses;         // |actions| + 1, poses[0] = start_pose
    std::vector<RgbdFrame> frames;         // one per stride-th pose
    std::vector<std::size_t> frame_steps;  // index into poses for each frame
    int stride = 1;
};

struct CollectOptions {
    double turnaround_prob = 0.5;
    int stride = 1;
    double cell = 0.25;
    double camera_height = 0.6;
    ActionMagnitudes magnitudes;
    OccupancyOptions occupancy;
    std::size_t max_actions = kMaxTrajectoryActions;
};

/// Random start and goal over navigable cells, an optional full turn in place,
/// then the shortest path. Deterministic given `seed`.
Trajectory collect_trajectory(const Scene& scene, const CameraIntrinsics& K, std::uint64_t seed,
                              const CollectOptions& options = {});

}  // namespace pmem
