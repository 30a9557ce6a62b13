#pragma once

// Camera model, discrete agent actions and Plücker ray images.
//
// Conventions used across the engine:
//   * world frame is right-handed with +y up;
//   * camera frame is x-right, y-down, z-forward;
//   * a CameraPose is camera-to-world: rotation maps camera directions into the
//     world and translation is the camera center;
//   * heading is the camera z-axis projected onto the ground (xz) plane, and
//     TurnLeft is a positive rotation about world +y.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace pmem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    /// Throws std::invalid_argument when fx, fy, cx, cy or the size are out of range.
    void validate() const;
    /// K^{-1} (u, v, 1)^T, i.e. the camera-frame ray with unit z.
    Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

CameraIntrinsics intrinsics_from_fov(double fov_x, int width, int height);

struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static CameraPose identity() { return {}; }
    /// Upright camera (image y pointing to world -y) at `center`, heading `yaw`
    /// radians from +z towards +x.
    static CameraPose upright(const Vec3& center, double yaw);

    Vec3 forward() const { return rotation.col(2); }
    /// Ground-projected unit heading; throws pmem::Error("undefined heading")
    /// when the camera looks straight up or down.
    Vec3 heading() const;
    double yaw() const;
    Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - translation); }
    Vec3 to_world(const Vec3& camera) const { return rotation * camera + translation; }

    bool is_valid(double tol = 1e-9) const;
    bool operator==(const CameraPose&) const = default;
};

enum class ActionKind { MoveForward, MoveBackward, TurnLeft, TurnRight };

std::string_view to_string(ActionKind kind);
/// Accepts the full names and the one-letter codes F, B, L, R.
ActionKind action_kind_from_string(std::string_view text);

struct Action {
    ActionKind kind = ActionKind::MoveForward;
    double magnitude = 0.25;  // meters for moves, radians for turns

    bool operator==(const Action&) const = default;
};

using ActionChunk = std::vector<Action>;

/// Step sizes used when actions are generated from discrete choices.
struct ActionMagnitudes {
    double step = 0.25;                          // meters
    double turn = std::numbers::pi / 6.0;        // 30 degrees

    Action make(ActionKind kind) const;
};

inline constexpr ActionKind kAllActions[] = {ActionKind::MoveForward, ActionKind::MoveBackward,
                                             ActionKind::TurnLeft, ActionKind::TurnRight};

/// Rotation by `angle` radians about world +y.
Mat3 yaw_rotation(double angle);

CameraPose apply_action(const CameraPose& pose, const Action& action);
/// One pose per action, cumulative.
std::vector<CameraPose> compose_chunk(const CameraPose& pose, std::span<const Action> chunk);

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

PixelProjection project(const Vec3& point, const CameraIntrinsics& K, const CameraPose& pose);
Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& K, const CameraPose& pose);

/// `Translated` uses d = R K^{-1} (u,v,1) + t; `Classical` is the usual R K^{-1} (u,v,1).
enum class PluckerDirection { Translated, Classical };

struct PluckerImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // row-major H x W x 6: (m_x, m_y, m_z, d_x, d_y, d_z)

    static constexpr int kChannels = 6;
    double at(int u, int v, int c) const {
        return data[(static_cast<std::size_t>(v) * width + u) * kChannels + c];
    }
};

/// Pixel (u, v) uses integer pixel coordinates in K^{-1} (u, v, 1)^T.
PluckerImage plucker_embedding(const CameraIntrinsics& K, const CameraPose& pose,
                               PluckerDirection direction = PluckerDirection::Translated);

/// Transform taking frame a to frame b: (Ra^T Rb, Ra^T (tb - ta)).
CameraPose relative_pose(const CameraPose& a, const CameraPose& b);

/// Geodesic angle between two rotations, radians in [0, pi].
double rotation_angle(const Mat3& a, const Mat3& b);

}  // namespace pmem
