#pragma once

#include "roadobj/geometry.hpp"

#include <array>
#include <vector>

namespace roadobj {

/// Polygons are vertex lists in pixel coordinates (u right, v down).
/// "CCW" throughout means positive shoelace area when (u, v) are read as
/// plain (x, y) values.
using Polygon2D = std::vector<Vec2>;

/// Signed shoelace area; positive for CCW winding.
double polygon_signed_area(const Polygon2D& poly);

inline double polygon_area(const Polygon2D& poly) {
    return std::abs(polygon_signed_area(poly));
}

/// Area centroid. Falls back to the vertex mean for near-zero-area input.
Vec2 polygon_centroid(const Polygon2D& poly);

/// Reverses the vertex order if the winding is negative.
Polygon2D ensure_ccw(Polygon2D poly);

/// Axis-aligned pixel bounding box.
struct Aabb2D {
    Vec2 min{0.0, 0.0};
    Vec2 max{0.0, 0.0};

    double area() const { return (max.x() - min.x()) * (max.y() - min.y()); }
    bool contains(const Vec2& p) const {
        return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
    }
};

Aabb2D polygon_aabb(const Polygon2D& poly);

/// Minimum-area oriented rectangle. The extent is canonical long-axis-first
/// (a >= b) and the angle is the long-axis direction folded into [0, pi).
struct OrientedBox2D {
    Vec2 center{0.0, 0.0};
    double angle = 0.0;
    double extent_a = 0.0;
    double extent_b = 0.0;

    double area() const { return extent_a * extent_b; }
    std::array<Vec2, 4> corners() const;
};

/// Minimum-area oriented bounding box via convex hull + edge-aligned
/// rotating-calipers search. Throws DegenerateInput for fewer than 3
/// points or a collinear set.
OrientedBox2D min_area_obb(const std::vector<Vec2>& points);

/// Convex hull (Andrew monotone chain), CCW, starting from the
/// lexicographically smallest point. Collinear interior points are dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// True iff p is strictly inside or exactly on the boundary of a simple
/// polygon.
bool point_in_polygon(const Vec2& p, const Polygon2D& poly);

/// Intersection of two convex polygons (Sutherland-Hodgman). Result may be
/// empty. Inputs are normalized to CCW internally.
Polygon2D convex_intersection(const Polygon2D& a, const Polygon2D& b);

/// Intersection-over-union of two convex polygons. Throws DegenerateInput
/// if either polygon has zero area.
double convex_polygon_iou(const Polygon2D& a, const Polygon2D& b);

/// Part of `poly` on the side of the line through `origin` with outward
/// normal `normal` where (p - origin) . normal <= 0.
Polygon2D clip_half_plane(const Polygon2D& poly, const Vec2& origin, const Vec2& normal);

/// Classify four convex-position pixels into BL, TL, TR, BR image-plane
/// corners. The box supplies the orientation frame: its axis closest to
/// image "up" (-v) becomes the height direction, the other the width
/// direction, and each corner is labeled by the signs of its offsets from
/// the box center along those axes.
std::array<Vec2, 4> order_quad_corners(const std::array<Vec2, 4>& quad,
                                       const OrientedBox2D& box);

}  // namespace roadobj
