#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace roadobj {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// World vertical axis. All shapes are upright: their height axis is kUp
/// and yaw is the only rotational degree of freedom.
inline const Vec3 kUp{0.0, 0.0, 1.0};

/// Wrap an angle to the canonical interval (-pi, pi].
double wrap_angle(double a);

/// In-plane horizontal axis of an upright shape: the width direction.
inline Vec3 width_axis(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

/// Front normal of an upright shape, width_axis x kUp. The front face of a
/// sign/light is the one this vector points away from toward the viewer.
inline Vec3 plane_normal(double yaw) { return {std::sin(yaw), -std::cos(yaw), 0.0}; }

/// Derivative of width_axis with respect to yaw.
inline Vec3 width_axis_dyaw(double yaw) { return {-std::sin(yaw), std::cos(yaw), 0.0}; }

/// Derivative of plane_normal with respect to yaw.
inline Vec3 plane_normal_dyaw(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

/// Rigid transform, stored as a unit quaternion plus translation.
/// By convention every pose in this library maps sensor coordinates into
/// world coordinates (world_from_sensor).
struct Pose {
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
    Vec3 translation{0.0, 0.0, 0.0};

    static Pose identity() { return {}; }

    /// R * p + t
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Pose inverse() const {
        const Eigen::Quaterniond qi = rotation.conjugate();
        return {qi, qi * (-translation)};
    }

    Pose compose(const Pose& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    /// Bearing of the rotated x-axis in the world horizontal plane. Used to
    /// carry yaw angles between world and sensor coordinates.
    double heading() const {
        const Vec3 x = rotation * Vec3::UnitX();
        return std::atan2(x.y(), x.x());
    }
};

/// transform_point(P, p) == P.apply(p); kept as a free function to mirror the
/// inverse_transform_point companion.
inline Vec3 transform_point(const Pose& pose, const Vec3& p) { return pose.apply(p); }
inline Vec3 inverse_transform_point(const Pose& pose, const Vec3& p) {
    return pose.rotation.conjugate() * (p - pose.translation);
}

/// Pinhole camera; pixels are assumed pre-undistorted.
/// Camera frame: +z optical axis (forward), +x right, +y down.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx > 0.0 &&
               cx < static_cast<double>(width) && cy > 0.0 && cy < static_cast<double>(height);
    }

    bool contains(const Vec2& px, double margin = 0.0) const {
        return px.x() >= margin && px.x() <= static_cast<double>(width) - margin &&
               px.y() >= margin && px.y() <= static_cast<double>(height) - margin;
    }
};

inline constexpr double kDefaultMinDepth = 0.1;  // meters

/// Project a point given in camera coordinates. Empty if depth <= min_depth,
/// which signals that the observation must be discarded.
std::optional<Vec2> project_camera_point(const CameraIntrinsics& cam, const Vec3& p_cam,
                                         double min_depth = kDefaultMinDepth);

/// Project a world point through a world_from_camera pose.
std::optional<Vec2> project(const CameraIntrinsics& cam, const Pose& world_from_camera,
                            const Vec3& p_world, double min_depth = kDefaultMinDepth);

/// Rectangular signboard: 6 degrees of freedom.
struct RectSignParams {
    Vec3 center{0.0, 0.0, 0.0};
    double yaw = 0.0;     // radians, canonical in (-pi, pi]
    double width = 0.0;   // meters, > 0
    double height = 0.0;  // meters, > 0

    bool valid() const { return width > 0.0 && height > 0.0 && center.allFinite(); }
};

/// Box-shaped object (traffic light housing, cone stand-in): 7 DOF.
struct CuboidParams {
    Vec3 center{0.0, 0.0, 0.0};
    double yaw = 0.0;
    double width = 0.0;
    double height = 0.0;
    double depth = 0.0;  // extent along the front normal

    bool valid() const {
        return width > 0.0 && height > 0.0 && depth > 0.0 && center.allFinite();
    }
};

/// Circular sign: 5 DOF. yaw orients the plane normal in the horizontal plane.
struct CircleSignParams {
    Vec3 center{0.0, 0.0, 0.0};
    double yaw = 0.0;
    double radius = 0.0;

    bool valid() const { return radius > 0.0 && center.allFinite(); }
};

/// Corners of an upright rectangle, ordered BL, TL, TR, BR as seen from the
/// +normal side. The local frame spans +-w/2 along width_axis(yaw) and +-h/2
/// along kUp.
std::array<Vec3, 4> rect_corners(const RectSignParams& p);

/// Front-face corners of a cuboid (face offset +d/2 along the normal),
/// same BL, TL, TR, BR order as rect_corners.
std::array<Vec3, 4> cuboid_front_corners(const CuboidParams& p);

/// All 8 cuboid corners: front face BL,TL,TR,BR then back face BL,TL,TR,BR.
/// With depth -> 0 the two faces collapse onto rect_corners pairwise.
std::array<Vec3, 8> cuboid_corners(const CuboidParams& p);

/// n >= 3 points uniformly sampled on the 3D circle, starting at the
/// +width_axis point and sweeping toward +kUp. All points are at distance r
/// from the center and coplanar with normal plane_normal(yaw).
std::vector<Vec3> circle_contour(const CircleSignParams& p, int n);

/// Point on the circle at angular parameter t (t=0 -> +width_axis direction).
Vec3 circle_point(const CircleSignParams& p, double t);

}  // namespace roadobj
