#pragma once

#include "roadobj/polygon.hpp"
#include "roadobj/scene.hpp"

#include <optional>

namespace roadobj {

/// 3D outline of a shape as used for image-space work: rect corners, cuboid
/// front-face corners, or `circle_n` contour samples. The front face stands
/// in for the cuboid silhouette everywhere 2D footprints are compared.
std::vector<Vec3> shape_outline_points(const ShapeParams& params, int circle_n = 24);

/// Corner set for 3D vertex-distance comparisons between two proposals of
/// the same class (all 8 corners for cuboids).
std::vector<Vec3> shape_reference_corners(const ShapeParams& params, int circle_n = 8);

/// Projected convex outline polygon. Empty when any outline point falls
/// behind the camera.
std::optional<Polygon2D> project_shape_polygon(const ShapeParams& params,
                                               const CameraFrame& frame, int circle_n = 24);

/// True when the projected outline exists and overlaps the image rectangle.
bool shape_visible_in_frame(const ShapeParams& params, const CameraFrame& frame,
                            int circle_n = 24);

}  // namespace roadobj
