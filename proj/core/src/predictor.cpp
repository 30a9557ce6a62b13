#include "pmem/predictor.hpp"

#include "pmem/errors.hpp"
#include "pmem/feature.hpp"
#include "pmem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace pmem {

void RgbdVideo::append(const RgbdVideo& other) {
    frames.insert(frames.end(), other.frames.begin(), other.frames.end());
    poses.insert(poses.end(), other.poses.begin(), other.poses.end());
}

RgbdVideo OraclePredictor::predict(const WorldState& state, std::span<const Action> chunk,
                                   const CameraIntrinsics& K) const {
    RgbdVideo video;
    video.poses = compose_chunk(state.pose, chunk);
    video.frames.reserve(video.poses.size());
    for (const CameraPose& pose : video.poses) video.frames.push_back(render(scene_, pose, K));
    return video;
}

namespace {

struct MapHit {
    double depth = 0.0;
    CellIndex cell{};
};

// Amanatides-Woo traversal of origin + s * dir; s is camera-frame depth
// because dir has unit camera z.
std::optional<MapHit> march(const FeatureGrid& map, const Vec3& origin, const Vec3& dir, double max_range) {
    const GridSpec& spec = map.spec();
    const Vec3 lo = spec.origin;
    const Vec3 hi = spec.origin + Vec3(spec.dims[0] * spec.cell.x(), spec.dims[1] * spec.cell.y(),
                                       spec.dims[2] * spec.cell.z());
    double s_enter = 0.0;
    double s_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (origin[a] < lo[a] || origin[a] >= hi[a]) return std::nullopt;
            continue;
        }
        double t0 = (lo[a] - origin[a]) / dir[a];
        double t1 = (hi[a] - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        s_enter = std::max(s_enter, t0);
        s_exit = std::min(s_exit, t1);
    }
    if (s_enter >= s_exit) return std::nullopt;
    const double dir_norm = dir.norm();
    const double s_max = std::min(s_exit, max_range / dir_norm);

    const bool starts_inside = s_enter == 0.0;
    const Vec3 start = origin + s_enter * dir;
    CellIndex cell{};
    int step[3];
    double t_next[3];
    double t_delta[3];
    for (int a = 0; a < 3; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        int c = static_cast<int>(std::floor((start[a] - lo[a]) / spec.cell[a]));
        c = std::clamp(c, 0, spec.dims[ua] - 1);
        cell[ua] = c;
        if (dir[a] > 0.0) {
            step[a] = 1;
            t_next[a] = (lo[a] + (c + 1) * spec.cell[a] - origin[a]) / dir[a];
            t_delta[a] = spec.cell[a] / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            t_next[a] = (lo[a] + c * spec.cell[a] - origin[a]) / dir[a];
            t_delta[a] = -spec.cell[a] / dir[a];
        } else {
            step[a] = 0;
            t_next[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        }
    }

    double s_cell = s_enter;
    bool first = true;
    while (s_cell <= s_max) {
        const bool camera_cell = first && starts_inside;
        if (!camera_cell && map.contains(cell)) return MapHit{s_cell, cell};
        first = false;
        int axis = 0;
        if (t_next[1] < t_next[axis]) axis = 1;
        if (t_next[2] < t_next[axis]) axis = 2;
        s_cell = t_next[axis];
        const auto ua = static_cast<std::size_t>(axis);
        cell[ua] += step[axis];
        if (cell[ua] < 0 || cell[ua] >= spec.dims[ua]) return std::nullopt;
        t_next[axis] += t_delta[axis];
    }
    return std::nullopt;
}

struct ConeToken {
    Vec3 direction;
    std::array<float, 3> color;
};

}  // namespace

RgbdFrame render_from_map(const FeatureGrid& map, const CameraPose& pose, const CameraIntrinsics& K,
                          const MapRenderOptions& options) {
    K.validate();
    RgbdFrame frame(K.width, K.height);

    std::vector<ConeToken> cone_tokens;
    if (options.fill == FillRule::NearestToken) {
        for (const CellIndex& index : map.sorted_indices()) {
            const Vec3 offset = map.spec().cell_center(index) - pose.translation;
            if (pose.to_camera(map.spec().cell_center(index)).z() <= 0.0 || offset.norm() < 1e-12) continue;
            cone_tokens.push_back({offset.normalized(), decode_color(*map.find(index))});
        }
    }
    const double cos_cone = std::cos(options.cone_angle);

    parallel_for(static_cast<std::size_t>(K.height), [&](std::size_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < K.width; ++u) {
            const Vec3 dir = pose.rotation * K.ray(u + 0.5, v + 0.5);
            std::array<float, 3> color{options.fill_gray, options.fill_gray, options.fill_gray};
            float depth = 0.0f;
            if (const auto hit = march(map, pose.translation, dir, options.max_range)) {
                color = decode_color(*map.find(hit->cell));
                depth = static_cast<float>(hit->depth);
            } else if (!cone_tokens.empty()) {
                const Vec3 unit = dir.normalized();
                double best = cos_cone;
                for (const ConeToken& token : cone_tokens) {
                    const double c = unit.dot(token.direction);
                    if (c > best) {
                        best = c;
                        color = token.color;
                    }
                }
            }
            for (int c = 0; c < 3; ++c) frame.color(u, v, c) = color[static_cast<std::size_t>(c)];
            frame.depth_at(u, v) = depth;
        }
    });
    return frame;
}

RgbdVideo map_render_predict(const WorldState& state, std::span<const Action> chunk, const CameraIntrinsics& K,
                             const MapRenderOptions& options) {
    RgbdVideo video;
    video.poses = compose_chunk(state.pose, chunk);
    std::optional<FeatureGrid> short_term;
    if (!options.use_memory) {
        short_term = build_map(std::span(&state.last_obs, 1), std::span(&state.pose, 1), K, state.map.spec(),
                               options.build);
    }
    const FeatureGrid& memory = short_term ? *short_term : state.map;
    video.frames.reserve(video.poses.size());
    for (const CameraPose& pose : video.poses) video.frames.push_back(render_from_map(memory, pose, K, options));
    return video;
}

RgbdVideo MapRenderPredictor::predict(const WorldState& state, std::span<const Action> chunk,
                                      const CameraIntrinsics& K) const {
    return map_render_predict(state, chunk, K, options_);
}

RolloutResult rollout(const Predictor& predictor, WorldState state, const Policy& policy, std::size_t steps,
                      const CameraIntrinsics& K, const RolloutOptions& options) {
    require(steps >= 1, "rollout: steps must be >= 1");
    RolloutResult result;
    while (result.video.size() < steps) {
        const std::size_t remaining = steps - result.video.size();
        ActionChunk chunk = policy(state, remaining);
        require(!chunk.empty(), "rollout: policy returned an empty chunk");
        if (chunk.size() > remaining) chunk.resize(remaining);

        RgbdVideo video = predictor.predict(state, chunk, K);
        if (options.update_map) {
            state.map.merge_max(build_map(video.frames, video.poses, K, state.map.spec(), options.build));
        }
        state.pose = video.poses.back();
        state.last_obs = video.frames.back();
        result.occupancy.push_back(state.map.count());
        result.video.append(video);
    }
    result.state = std::move(state);
    return result;
}

RolloutResult rollout(const Predictor& predictor, WorldState state, std::span<const Action> actions,
                      const CameraIntrinsics& K, const RolloutOptions& options) {
    require(!actions.empty(), "rollout: no actions");
    require(options.chunk_size >= 1, "rollout: chunk size must be >= 1");
    std::size_t cursor = 0;
    Policy scripted = [&](const WorldState&, std::size_t remaining) {
        const std::size_t n = std::min({options.chunk_size, remaining, actions.size() - cursor});
        ActionChunk chunk(actions.begin() + static_cast<std::ptrdiff_t>(cursor),
                          actions.begin() + static_cast<std::ptrdiff_t>(cursor + n));
        cursor += n;
        return chunk;
    };
    return rollout(predictor, std::move(state), scripted, actions.size(), K, options);
}

WorldState init_map_few_shot(std::span<const RgbdFrame> frames, std::span<const CameraPose> poses,
                             const CameraIntrinsics& K, const GridSpec& spec, const BuildOptions& options) {
    require(!frames.empty(), "init_map_few_shot: need at least one frame");
    return WorldState{poses.back(), build_map(frames, poses, K, spec, options), frames.back()};
}

}  // namespace pmem
