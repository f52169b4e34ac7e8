#include "roadobj/proposal.hpp"

#include "roadobj/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace roadobj {

namespace {

Vec3 mean_camera_position(const std::vector<VertexObservation>& obs, const Scene& scene) {
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (const VertexObservation& v : obs) {
        const CameraFrame* frame = scene.find_frame(v.frame_id);
        if (frame == nullptr) continue;
        sum += frame->world_from_camera.translation;
        ++n;
    }
    return n > 0 ? Vec3(sum / n) : sum;
}

/// Corner pixel tuples for one corner index across the unoccluded views,
/// mirroring back-side views so labels match the model order.
struct CornerViews {
    std::array<std::vector<ViewPixel>, 4> per_corner;
    std::vector<const CameraFrame*> frames;
};

CornerViews gather_corner_views(const std::vector<VertexObservation>& vertex_obs,
                                const Scene& scene, const std::vector<Vec3>& support_points) {
    CornerViews out;
    // Dominant viewing side: cameras opposite the bulk of the views across
    // the object see a mirrored corner labeling. The support centroid plus
    // the mean camera position give a stable side test (a covariance plane
    // would be ill-conditioned for near-cubic support clouds).
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : support_points) centroid += p;
    if (!support_points.empty()) centroid /= static_cast<double>(support_points.size());
    const Vec3 cam_mean = mean_camera_position(vertex_obs, scene);
    Vec3 front_dir = cam_mean - centroid;
    const bool side_test = !support_points.empty() && front_dir.norm() > 1e-9;
    if (side_test) front_dir.normalize();

    for (const VertexObservation& v : vertex_obs) {
        if (v.occluded) continue;
        const CameraFrame* frame = scene.find_frame(v.frame_id);
        if (frame == nullptr) continue;
        const bool behind =
            side_test &&
            front_dir.dot(frame->world_from_camera.translation - centroid) < 0.0;
        std::array<Vec2, 4> corners = v.corners;
        if (behind) {  // mirror: BL<->BR, TL<->TR
            std::swap(corners[0], corners[3]);
            std::swap(corners[1], corners[2]);
        }
        for (int k = 0; k < 4; ++k)
            out.per_corner[static_cast<size_t>(k)].push_back(
                {frame, corners[static_cast<size_t>(k)]});
        out.frames.push_back(frame);
    }
    return out;
}

struct RectFace {
    Vec3 center;
    double yaw;
    double width;
    double height;
};

RectFace face_from_corners(const std::array<Vec3, 4>& c) {
    RectFace f;
    f.center = 0.25 * (c[0] + c[1] + c[2] + c[3]);
    const Vec3 bottom = c[3] - c[0];
    const Vec3 top = c[2] - c[1];
    Vec3 u = bottom + top;
    u.z() = 0.0;  // upright shapes: the width axis is horizontal
    if (u.norm() < 1e-12) throw DegenerateInput("rect proposal: zero width direction");
    f.yaw = std::atan2(u.y(), u.x());
    f.width = 0.5 * (bottom.norm() + top.norm());
    f.height = 0.5 * ((c[1] - c[0]).norm() + (c[2] - c[3]).norm());
    return f;
}

}  // namespace

VertexObservation extract_mask_vertices(const InstanceObservation& obs) {
    VertexObservation out;
    out.obs_id = obs.obs_id;
    out.frame_id = obs.frame_id;
    if (obs.mask.size() < 3) throw DegenerateInput("mask: fewer than 3 vertices");
    const OrientedBox2D obb = min_area_obb(obs.mask);
    const std::vector<Vec2> hull = convex_hull(obs.mask);
    if (hull.size() == 4) {
        out.corners = order_quad_corners({hull[0], hull[1], hull[2], hull[3]}, obb);
    } else {
        out.corners = order_quad_corners(obb.corners(), obb);
    }
    return out;
}

bool occlusion_gate(const InstanceObservation& obs, const ProposalParams& params) {
    const double det_area = obs.det_box.area();
    if (det_area <= 0.0) throw DegenerateInput("occlusion_gate: empty det_box");
    const double ratio = polygon_aabb(obs.mask).area() / det_area;
    return ratio >= params.a_th;
}

Ray pixel_ray(const CameraFrame& frame, const Vec2& pixel) {
    const Vec3 dir_cam((pixel.x() - frame.intrinsics.cx) / frame.intrinsics.fx,
                       (pixel.y() - frame.intrinsics.cy) / frame.intrinsics.fy, 1.0);
    Ray ray;
    ray.origin = frame.world_from_camera.translation;
    ray.direction = (frame.world_from_camera.rotation * dir_cam).normalized();
    return ray;
}

Vec3 triangulate_point(const std::vector<ViewPixel>& views, const ProposalParams& params) {
    if (static_cast<int>(views.size()) < params.min_views)
        throw InsufficientObservations("triangulate_point: fewer than min_views views");

    double max_parallax = 0.0;
    std::vector<Ray> rays;
    rays.reserve(views.size());
    for (const ViewPixel& v : views) rays.push_back(pixel_ray(*v.frame, v.pixel));
    for (size_t i = 0; i < rays.size(); ++i)
        for (size_t j = i + 1; j < rays.size(); ++j) {
            const double c = std::clamp(rays[i].direction.dot(rays[j].direction), -1.0, 1.0);
            max_parallax = std::max(max_parallax, std::acos(c));
        }
    if (max_parallax < params.min_parallax)
        throw InsufficientParallax("triangulate_point: max pairwise parallax below threshold");

    Eigen::MatrixXd design(2 * views.size(), 4);
    for (size_t i = 0; i < views.size(); ++i) {
        const CameraFrame& f = *views[i].frame;
        const Eigen::Matrix3d R = f.world_from_camera.rotation.conjugate().toRotationMatrix();
        const Vec3 t = -(R * f.world_from_camera.translation);
        Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
        K(0, 0) = f.intrinsics.fx;
        K(1, 1) = f.intrinsics.fy;
        K(0, 2) = f.intrinsics.cx;
        K(1, 2) = f.intrinsics.cy;
        Eigen::Matrix<double, 3, 4> P;
        P.leftCols<3>() = K * R;
        P.col(3) = K * t;
        const Vec2& px = views[i].pixel;
        design.row(2 * static_cast<Eigen::Index>(i)) = px.x() * P.row(2) - P.row(0);
        design.row(2 * static_cast<Eigen::Index>(i) + 1) = px.y() * P.row(2) - P.row(1);
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svd.matrixV().col(3);
    if (std::abs(h[3]) < 1e-15)
        throw InsufficientParallax("triangulate_point: point at infinity");
    const Vec3 X = h.head<3>() / h[3];

    for (const ViewPixel& v : views) {
        const Vec3 p_cam = inverse_transform_point(v.frame->world_from_camera, X);
        if (p_cam.z() <= 0.0)
            throw BehindCamera("triangulate_point: cheirality failure");
    }
    return X;
}

RectSignParams init_rect_proposal(const std::vector<VertexObservation>& vertex_obs,
                                  const Scene& scene, const std::vector<Vec3>& support_points,
                                  const ProposalParams& params) {
    const CornerViews views = gather_corner_views(vertex_obs, scene, support_points);
    if (static_cast<int>(views.frames.size()) < params.min_views)
        throw InsufficientObservations("init_rect_proposal: not enough unoccluded views");

    std::array<Vec3, 4> corners3d{};
    for (int k = 0; k < 4; ++k)
        corners3d[static_cast<size_t>(k)] =
            triangulate_point(views.per_corner[static_cast<size_t>(k)], params);

    const RectFace face = face_from_corners(corners3d);
    RectSignParams p;
    p.center = face.center;
    p.yaw = wrap_angle(face.yaw);
    p.width = face.width;
    p.height = face.height;

    Vec3 cam_mean = Vec3::Zero();
    for (const CameraFrame* f : views.frames) cam_mean += f->world_from_camera.translation;
    cam_mean /= static_cast<double>(views.frames.size());
    if (plane_normal(p.yaw).dot(cam_mean - p.center) < 0.0) p.yaw = wrap_angle(p.yaw + M_PI);

    if (!p.valid()) throw DegenerateInput("init_rect_proposal: invalid parameters");
    return p;
}

CuboidParams init_cuboid_proposal(const std::vector<VertexObservation>& vertex_obs,
                                  const Scene& scene, const std::vector<Vec3>& support_points,
                                  const ProposalParams& params) {
    const CornerViews views = gather_corner_views(vertex_obs, scene, support_points);
    if (static_cast<int>(views.frames.size()) < params.min_views)
        throw InsufficientObservations("init_cuboid_proposal: not enough unoccluded views");

    std::array<Vec3, 4> corners3d{};
    for (int k = 0; k < 4; ++k)
        corners3d[static_cast<size_t>(k)] =
            triangulate_point(views.per_corner[static_cast<size_t>(k)], params);

    const RectFace face = face_from_corners(corners3d);
    double yaw = wrap_angle(face.yaw);

    Vec3 cam_mean = Vec3::Zero();
    for (const CameraFrame* f : views.frames) cam_mean += f->world_from_camera.translation;
    cam_mean /= static_cast<double>(views.frames.size());
    if (plane_normal(yaw).dot(cam_mean - face.center) < 0.0) yaw = wrap_angle(yaw + M_PI);

    constexpr double kDepthFloor = 0.05;
    const Vec3 n = plane_normal(yaw);
    double depth = 0.0;
    if (!support_points.empty()) {
        double smin = std::numeric_limits<double>::max();
        double smax = std::numeric_limits<double>::lowest();
        for (const Vec3& p : support_points) {
            const double s = (p - face.center).dot(n);
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }
        depth = smax - smin;
    }
    depth = std::max(depth, kDepthFloor);

    CuboidParams p;
    p.yaw = yaw;
    p.width = face.width;
    p.height = face.height;
    p.depth = depth;
    p.center = face.center - 0.5 * depth * n;  // triangulated quad is the front face
    if (!p.valid()) throw DegenerateInput("init_cuboid_proposal: invalid parameters");
    return p;
}

namespace {

double ray_distance(const Ray& a, const Ray& b) {
    const Vec3 cr = a.direction.cross(b.direction);
    const double denom = cr.norm();
    const Vec3 d = b.origin - a.origin;
    if (denom < 1e-12) return d.cross(a.direction).norm();  // parallel rays
    return std::abs(d.dot(cr)) / denom;
}

/// Contour pixels sorted into a consistent cyclic (CCW) order with angular
/// position around the mask centroid.
Polygon2D angular_sorted_contour(const Polygon2D& contour) {
    Polygon2D ccw = ensure_ccw(contour);
    const Vec2 c = polygon_centroid(ccw);
    size_t start = 0;
    double best = std::numeric_limits<double>::max();
    for (size_t i = 0; i < ccw.size(); ++i) {
        const double angle = std::atan2(ccw[i].y() - c.y(), ccw[i].x() - c.x());
        if (angle < best) {
            best = angle;
            start = i;
        }
    }
    Polygon2D out;
    out.reserve(ccw.size());
    for (size_t i = 0; i < ccw.size(); ++i) out.push_back(ccw[(start + i) % ccw.size()]);
    return out;
}

Polygon2D resample_polygon(const Polygon2D& poly, size_t target) {
    if (poly.size() == target) return poly;
    std::vector<double> cum{0.0};
    for (size_t i = 0; i < poly.size(); ++i)
        cum.push_back(cum.back() + (poly[(i + 1) % poly.size()] - poly[i]).norm());
    const double total = cum.back();
    Polygon2D out;
    out.reserve(target);
    for (size_t k = 0; k < target; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(target);
        const auto it = std::upper_bound(cum.begin(), cum.end(), s);
        const size_t seg = static_cast<size_t>(std::distance(cum.begin(), it)) - 1;
        const double t = (s - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-12);
        out.push_back(poly[seg] + t * (poly[(seg + 1) % poly.size()] - poly[seg]));
    }
    return out;
}

}  // namespace

std::vector<Vec3> triangulate_circle_contours(const std::vector<VertexObservation>& contour_obs,
                                              const Scene& scene, const ProposalParams& params) {
    struct PreparedObs {
        const CameraFrame* frame;
        Polygon2D contour;
    };
    std::vector<PreparedObs> prepared;
    size_t min_count = std::numeric_limits<size_t>::max();
    for (const VertexObservation& v : contour_obs) {
        if (v.occluded || v.contour.size() < 3) continue;
        const CameraFrame* frame = scene.find_frame(v.frame_id);
        if (frame == nullptr) continue;
        prepared.push_back({frame, v.contour});
        min_count = std::min(min_count, v.contour.size());
    }
    if (static_cast<int>(prepared.size()) < params.min_views)
        throw InsufficientObservations("circle contours: not enough unoccluded views");

    for (PreparedObs& p : prepared)
        p.contour = angular_sorted_contour(resample_polygon(p.contour, min_count));
    const size_t m = min_count;

    // Reference view: the cyclic offset of every other view is the one whose
    // index pairing minimizes the summed ray-to-ray distances.
    const PreparedObs& ref = prepared.front();
    std::vector<Ray> ref_rays;
    ref_rays.reserve(m);
    for (const Vec2& px : ref.contour) ref_rays.push_back(pixel_ray(*ref.frame, px));

    std::vector<std::vector<Vec2>> aligned(prepared.size());
    aligned[0] = ref.contour;
    for (size_t oi = 1; oi < prepared.size(); ++oi) {
        const PreparedObs& obs = prepared[oi];
        std::vector<Ray> rays;
        rays.reserve(m);
        for (const Vec2& px : obs.contour) rays.push_back(pixel_ray(*obs.frame, px));
        size_t best_off = 0;
        double best_score = std::numeric_limits<double>::max();
        for (size_t off = 0; off < m; ++off) {
            double score = 0.0;
            for (size_t k = 0; k < m; ++k) {
                const double d = ray_distance(ref_rays[k], rays[(k + off) % m]);
                score += d * d;
            }
            if (score < best_score) {
                best_score = score;
                best_off = off;
            }
        }
        aligned[oi].reserve(m);
        for (size_t k = 0; k < m; ++k) aligned[oi].push_back(obs.contour[(k + best_off) % m]);
    }

    std::vector<Vec3> points;
    points.reserve(m);
    for (size_t k = 0; k < m; ++k) {
        std::vector<ViewPixel> views;
        views.reserve(prepared.size());
        for (size_t oi = 0; oi < prepared.size(); ++oi)
            views.push_back({prepared[oi].frame, aligned[oi][k]});
        try {
            points.push_back(triangulate_point(views, params));
        } catch (const Error&) {
            // Individual contour samples may fail parallax/cheirality.
        }
    }
    if (static_cast<int>(points.size()) < params.min_contour_points)
        throw InsufficientObservations("circle contours: too few triangulated points");
    return points;
}

CircleSignParams fit_circle_params(const std::vector<Vec3>& points) {
    if (points.size() < 3) throw DegeneratePlane("circle fit: fewer than 3 points");

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : points) centroid += p;
    centroid /= static_cast<double>(points.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : points) cov += (p - centroid) * (p - centroid).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (evals[1] <= 1e-10 * std::max(evals[2], 1e-12))
        throw DegeneratePlane("circle fit: collinear points");

    const Vec3 normal = eig.eigenvectors().col(0);
    const Vec3 e1 = eig.eigenvectors().col(2);
    const Vec3 e2 = eig.eigenvectors().col(1);

    // Kasa fit in plane coordinates: P + Q x + R y = -(x^2 + y^2).
    Eigen::MatrixXd A(points.size(), 3);
    Eigen::VectorXd b(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        const Vec3 d = points[i] - centroid;
        const double x = d.dot(e1);
        const double y = d.dot(e2);
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        A(static_cast<Eigen::Index>(i), 1) = x;
        A(static_cast<Eigen::Index>(i), 2) = y;
        b(static_cast<Eigen::Index>(i)) = -(x * x + y * y);
    }
    const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(b);
    const double cx = -0.5 * sol[1];
    const double cy = -0.5 * sol[2];
    const double r2 = cx * cx + cy * cy - sol[0];
    if (!(r2 > 0.0)) throw DegeneratePlane("circle fit: non-positive squared radius");

    CircleSignParams p;
    p.center = centroid + cx * e1 + cy * e2;
    p.radius = std::sqrt(r2);
    const double nh = std::hypot(normal.x(), normal.y());
    if (nh < 1e-9) throw DegeneratePlane("circle fit: horizontal plane (not an upright sign)");
    // plane_normal(yaw) = (sin yaw, -cos yaw, 0)
    p.yaw = wrap_angle(std::atan2(normal.x(), -normal.y()));
    if (!p.valid()) throw DegeneratePlane("circle fit: invalid parameters");
    return p;
}

CircleSignParams init_circle_proposal(const std::vector<VertexObservation>& contour_obs,
                                      const Scene& scene, const ProposalParams& params) {
    const std::vector<Vec3> points = triangulate_circle_contours(contour_obs, scene, params);
    CircleSignParams p = fit_circle_params(points);
    const Vec3 cam_mean = mean_camera_position(contour_obs, scene);
    if (plane_normal(p.yaw).dot(cam_mean - p.center) < 0.0) p.yaw = wrap_angle(p.yaw + M_PI);
    return p;
}

}  // namespace roadobj
