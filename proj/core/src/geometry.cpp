#include "pmem/geometry.hpp"

#include "pmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmem {

void CameraIntrinsics::validate() const {
    require(width > 0 && height > 0, "intrinsics: image size must be positive");
    require(fx > 0.0 && fy > 0.0, "intrinsics: focal lengths must be positive");
    require(cx > 0.0 && cx < width && cy > 0.0 && cy < height,
            "intrinsics: principal point must lie inside the image");
}

CameraIntrinsics intrinsics_from_fov(double fov_x, int width, int height) {
    require(width > 0 && height > 0, "intrinsics_from_fov: image size must be positive");
    require(fov_x > 0.0 && fov_x < std::numbers::pi, "intrinsics_from_fov: fov must be in (0, pi)");
    const double f = (width / 2.0) / std::tan(fov_x / 2.0);
    return {f, f, width / 2.0, height / 2.0, width, height};
}

CameraPose CameraPose::upright(const Vec3& center, double yaw) {
    // camera x -> world -x, camera y -> world -y at yaw 0
    CameraPose pose;
    pose.rotation = yaw_rotation(yaw) * Vec3(-1.0, -1.0, 1.0).asDiagonal();
    pose.translation = center;
    return pose;
}

Vec3 CameraPose::heading() const {
    Vec3 f = forward();
    f.y() = 0.0;
    const double n = f.norm();
    if (n < 1e-9) throw Error("undefined heading");
    return f / n;
}

double CameraPose::yaw() const {
    const Vec3 h = heading();
    return std::atan2(h.x(), h.z());
}

bool CameraPose::is_valid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::MoveForward: return "MoveForward";
        case ActionKind::MoveBackward: return "MoveBackward";
        case ActionKind::TurnLeft: return "TurnLeft";
        case ActionKind::TurnRight: return "TurnRight";
    }
    return "?";
}

ActionKind action_kind_from_string(std::string_view text) {
    if (text == "MoveForward" || text == "F") return ActionKind::MoveForward;
    if (text == "MoveBackward" || text == "B") return ActionKind::MoveBackward;
    if (text == "TurnLeft" || text == "L") return ActionKind::TurnLeft;
    if (text == "TurnRight" || text == "R") return ActionKind::TurnRight;
    throw std::invalid_argument("unknown action '" + std::string(text) + "'");
}

Action ActionMagnitudes::make(ActionKind kind) const {
    const bool move = kind == ActionKind::MoveForward || kind == ActionKind::MoveBackward;
    return {kind, move ? step : turn};
}

Mat3 yaw_rotation(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

CameraPose apply_action(const CameraPose& pose, const Action& action) {
    require(action.magnitude > 0.0, "apply_action: magnitude must be positive");
    CameraPose next = pose;
    switch (action.kind) {
        case ActionKind::MoveForward:
            next.translation += action.magnitude * pose.heading();
            break;
        case ActionKind::MoveBackward:
            next.translation -= action.magnitude * pose.heading();
            break;
        case ActionKind::TurnLeft:
            next.rotation = yaw_rotation(action.magnitude) * pose.rotation;
            break;
        case ActionKind::TurnRight:
            next.rotation = yaw_rotation(-action.magnitude) * pose.rotation;
            break;
    }
    return next;
}

std::vector<CameraPose> compose_chunk(const CameraPose& pose, std::span<const Action> chunk) {
    std::vector<CameraPose> poses;
    poses.reserve(chunk.size());
    CameraPose current = pose;
    for (const Action& a : chunk) {
        current = apply_action(current, a);
        poses.push_back(current);
    }
    return poses;
}

PixelProjection project(const Vec3& point, const CameraIntrinsics& K, const CameraPose& pose) {
    const Vec3 p = pose.to_camera(point);
    if (p.z() <= 1e-9) throw Error("behind camera");
    return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy, p.z()};
}

Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& K, const CameraPose& pose) {
    require(depth > 0.0, "unproject: depth must be positive");
    return pose.to_world(depth * K.ray(u, v));
}

PluckerImage plucker_embedding(const CameraIntrinsics& K, const CameraPose& pose,
                               PluckerDirection direction) {
    K.validate();
    PluckerImage image;
    image.width = K.width;
    image.height = K.height;
    image.data.resize(static_cast<std::size_t>(K.width) * K.height * PluckerImage::kChannels);
    const Vec3& origin = pose.translation;
    auto out = image.data.begin();
    for (int v = 0; v < K.height; ++v) {
        for (int u = 0; u < K.width; ++u) {
            Vec3 d = pose.rotation * K.ray(u, v);
            if (direction == PluckerDirection::Translated) d += pose.translation;
            const Vec3 m = origin.cross(d);
            out = std::copy(m.data(), m.data() + 3, out);
            out = std::copy(d.data(), d.data() + 3, out);
        }
    }
    return image;
}

CameraPose relative_pose(const CameraPose& a, const CameraPose& b) {
    CameraPose rel;
    rel.rotation = a.rotation.transpose() * b.rotation;
    rel.translation = a.rotation.transpose() * (b.translation - a.translation);
    return rel;
}

double rotation_angle(const Mat3& a, const Mat3& b) {
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace pmem
