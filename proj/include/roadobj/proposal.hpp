#pragma once

#include "roadobj/polygon.hpp"
#include "roadobj/scene.hpp"

#include <optional>
#include <vector>

namespace roadobj {

struct ProposalParams {
    double a_th = 0.95;            // occlusion gate threshold on AABB/det areas
    int min_views = 2;
    double min_parallax = 0.0175;  // radians, ~1 degree
    int min_contour_points = 12;   // circular class

    bool valid() const {
        return a_th > 0.0 && a_th <= 1.0 && min_views >= 2 && min_parallax > 0.0 &&
               min_contour_points >= 3;
    }
};

/// Image-space vertices of one observation: quad corners for the
/// rectangular family, contour pixels for circular signs.
struct VertexObservation {
    std::int64_t obs_id = 0;
    std::int64_t frame_id = 0;
    std::array<Vec2, 4> corners{};  // BL, TL, TR, BR
    Polygon2D contour;              // circular class only
    bool occluded = false;
};

/// Corner estimates for a rectangular-family mask. The minimum-area OBB
/// supplies the orientation frame and the degenerate-mask check; when the
/// mask hull is itself a quadrilateral its own vertices are the corner
/// estimates (tighter under perspective), otherwise the OBB corners stand
/// in. Throws DegenerateInput for sliver or collinear masks.
VertexObservation extract_mask_vertices(const InstanceObservation& obs);

/// Keep iff area(AABB(mask)) / area(det_box) >= a_th; a ratio on the
/// boundary keeps the observation.
bool occlusion_gate(const InstanceObservation& obs, const ProposalParams& params);

/// One pixel observation for triangulation.
struct ViewPixel {
    const CameraFrame* frame = nullptr;
    Vec2 pixel{0.0, 0.0};
};

/// Multi-view linear (DLT) triangulation; smallest singular vector of the
/// stacked projection constraints. Throws InsufficientObservations,
/// InsufficientParallax, or BehindCamera (cheirality).
Vec3 triangulate_point(const std::vector<ViewPixel>& views, const ProposalParams& params);

/// Unit ray through a pixel, in world coordinates.
struct Ray {
    Vec3 origin{0.0, 0.0, 0.0};
    Vec3 direction{0.0, 0.0, 1.0};
};
Ray pixel_ray(const CameraFrame& frame, const Vec2& pixel);

/// Triangulates the quad corners of every unoccluded observation and reads
/// the 6 rect DOF off the corner set. Back-side views are mirrored using a
/// rough plane from the support points; the final normal faces the mean
/// camera position.
RectSignParams init_rect_proposal(const std::vector<VertexObservation>& vertex_obs,
                                  const Scene& scene, const std::vector<Vec3>& support_points,
                                  const ProposalParams& params);

/// As init_rect_proposal, plus depth from the spread of the support points
/// along the front normal, floored at 0.05 m.
CuboidParams init_cuboid_proposal(const std::vector<VertexObservation>& vertex_obs,
                                  const Scene& scene, const std::vector<Vec3>& support_points,
                                  const ProposalParams& params);

/// Aligns contour vertices across frames (angular order around the mask
/// centroid, cyclic offset resolved by ray consistency) and triangulates
/// each aligned tuple. Throws InsufficientObservations when fewer than
/// min_contour_points survive.
std::vector<Vec3> triangulate_circle_contours(const std::vector<VertexObservation>& contour_obs,
                                              const Scene& scene, const ProposalParams& params);

/// Total-least-squares plane (covariance eigendecomposition), in-plane
/// algebraic circle fit, yaw from the plane normal's horizontal bearing.
/// Throws DegeneratePlane for collinear input or a horizontal plane.
CircleSignParams fit_circle_params(const std::vector<Vec3>& points);

/// triangulate_circle_contours + fit_circle_params with the normal
/// canonicalized toward the observing cameras.
CircleSignParams init_circle_proposal(const std::vector<VertexObservation>& contour_obs,
                                      const Scene& scene, const ProposalParams& params);

}  // namespace roadobj
