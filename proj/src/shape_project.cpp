#include "roadobj/shape_project.hpp"

namespace roadobj {

std::vector<Vec3> shape_outline_points(const ShapeParams& params, int circle_n) {
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        const auto c = rect_corners(*r);
        return {c.begin(), c.end()};
    }
    if (const auto* c = std::get_if<CuboidParams>(&params)) {
        const auto f = cuboid_front_corners(*c);
        return {f.begin(), f.end()};
    }
    return circle_contour(std::get<CircleSignParams>(params), circle_n);
}

std::vector<Vec3> shape_reference_corners(const ShapeParams& params, int circle_n) {
    if (const auto* c = std::get_if<CuboidParams>(&params)) {
        const auto all = cuboid_corners(*c);
        return {all.begin(), all.end()};
    }
    return shape_outline_points(params, circle_n);
}

std::optional<Polygon2D> project_shape_polygon(const ShapeParams& params,
                                               const CameraFrame& frame, int circle_n) {
    const std::vector<Vec3> outline = shape_outline_points(params, circle_n);
    Polygon2D poly;
    poly.reserve(outline.size());
    for (const Vec3& p : outline) {
        const auto px = project(frame.intrinsics, frame.world_from_camera, p);
        if (!px) return std::nullopt;
        poly.push_back(*px);
    }
    return ensure_ccw(std::move(poly));
}

bool shape_visible_in_frame(const ShapeParams& params, const CameraFrame& frame, int circle_n) {
    const auto poly = project_shape_polygon(params, frame, circle_n);
    if (!poly || polygon_area(*poly) < 1e-9) return false;
    const Polygon2D image_rect{{0.0, 0.0},
                               {static_cast<double>(frame.intrinsics.width), 0.0},
                               {static_cast<double>(frame.intrinsics.width),
                                static_cast<double>(frame.intrinsics.height)},
                               {0.0, static_cast<double>(frame.intrinsics.height)}};
    return polygon_area(convex_intersection(*poly, image_rect)) > 1e-9;
}

}  // namespace roadobj
