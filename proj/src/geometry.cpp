#include "roadobj/geometry.hpp"

#include <cmath>

namespace roadobj {

double wrap_angle(double a) {
    if (a > -M_PI && a <= M_PI) return a;
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

std::optional<Vec2> project_camera_point(const CameraIntrinsics& cam, const Vec3& p_cam,
                                         double min_depth) {
    if (p_cam.z() <= min_depth) return std::nullopt;
    return Vec2{cam.fx * p_cam.x() / p_cam.z() + cam.cx,
                cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

std::optional<Vec2> project(const CameraIntrinsics& cam, const Pose& world_from_camera,
                            const Vec3& p_world, double min_depth) {
    return project_camera_point(cam, inverse_transform_point(world_from_camera, p_world),
                                min_depth);
}

std::array<Vec3, 4> rect_corners(const RectSignParams& p) {
    const Vec3 u = width_axis(p.yaw) * (0.5 * p.width);
    const Vec3 v = kUp * (0.5 * p.height);
    return {p.center - u - v, p.center - u + v, p.center + u + v, p.center + u - v};
}

std::array<Vec3, 4> cuboid_front_corners(const CuboidParams& p) {
    const Vec3 u = width_axis(p.yaw) * (0.5 * p.width);
    const Vec3 v = kUp * (0.5 * p.height);
    const Vec3 f = plane_normal(p.yaw) * (0.5 * p.depth);
    return {p.center - u - v + f, p.center - u + v + f, p.center + u + v + f,
            p.center + u - v + f};
}

std::array<Vec3, 8> cuboid_corners(const CuboidParams& p) {
    const Vec3 u = width_axis(p.yaw) * (0.5 * p.width);
    const Vec3 v = kUp * (0.5 * p.height);
    const Vec3 f = plane_normal(p.yaw) * (0.5 * p.depth);
    return {p.center - u - v + f, p.center - u + v + f, p.center + u + v + f,
            p.center + u - v + f, p.center - u - v - f, p.center - u + v - f,
            p.center + u + v - f, p.center + u - v - f};
}

Vec3 circle_point(const CircleSignParams& p, double t) {
    return p.center + p.radius * std::cos(t) * width_axis(p.yaw) +
           p.radius * std::sin(t) * kUp;
}

std::vector<Vec3> circle_contour(const CircleSignParams& p, int n) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        pts.push_back(circle_point(p, 2.0 * M_PI * static_cast<double>(k) / n));
    }
    return pts;
}

}  // namespace roadobj
