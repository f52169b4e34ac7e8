#include "roadobj/synth.hpp"

#include "roadobj/errors.hpp"
#include "roadobj/rng.hpp"
#include "roadobj/shape_project.hpp"

#include <algorithm>
#include <cmath>

namespace roadobj {

namespace {

constexpr double kCameraHeight = 1.6;     // meters above ground
constexpr double kMinObjectDepth = 3.0;   // meters; closer objects are skipped
constexpr double kMaxObjectDepth = 60.0;  // meters; beyond this the detector gives up
constexpr double kImageMargin = 1.0;      // pixels; partially visible shapes are skipped
constexpr double kMinMaskArea = 30.0;     // px^2; smaller footprints are skipped
constexpr double kMinFrontCosine = 0.05;  // grazing views of the front face are skipped
constexpr int kCircleMaskVertices = 24;

struct PathSample {
    Vec3 position;
    double heading;
};

/// Straight segment followed by a gentle left arc. Defined for s beyond the
/// nominal length so objects can sit past the last frame.
PathSample path_at(double s, double straight_len) {
    constexpr double kArcRadius = 150.0;
    if (s <= straight_len) return {{s, 0.0, 0.0}, 0.0};
    const double phi = (s - straight_len) / kArcRadius;
    return {{straight_len + kArcRadius * std::sin(phi), kArcRadius * (1.0 - std::cos(phi)), 0.0},
            phi};
}

Pose camera_pose(const PathSample& sample) {
    const double psi = sample.heading;
    Eigen::Matrix3d R;
    // Columns: camera right, down, forward expressed in world coordinates.
    R.col(0) = Vec3(std::sin(psi), -std::cos(psi), 0.0);
    R.col(1) = Vec3(0.0, 0.0, -1.0);
    R.col(2) = Vec3(std::cos(psi), std::sin(psi), 0.0);
    Pose pose;
    pose.rotation = Eigen::Quaterniond(R).normalized();
    pose.translation = sample.position + Vec3(0.0, 0.0, kCameraHeight);
    return pose;
}

double yaw_facing(double heading) {
    // Front normal opposed to the local travel direction.
    const Vec3 n(-std::cos(heading), -std::sin(heading), 0.0);
    return std::atan2(n.x(), -n.y());
}

Vec3 sample_surface_point(const ShapeParams& params, SplitMix64& rng) {
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        const double a = rng.uniform(-0.45, 0.45) * r->width;
        const double b = rng.uniform(-0.45, 0.45) * r->height;
        return r->center + a * width_axis(r->yaw) + b * kUp;
    }
    if (const auto* s = std::get_if<CircleSignParams>(&params)) {
        const double rho = 0.95 * s->radius * std::sqrt(rng.uniform01());
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        return s->center + rho * std::cos(phi) * width_axis(s->yaw) + rho * std::sin(phi) * kUp;
    }
    const auto& c = std::get<CuboidParams>(params);
    const Vec3 u = width_axis(c.yaw);
    const Vec3 n = plane_normal(c.yaw);
    // Front and back faces carry most samples so the support slab brackets
    // the full depth; back samples stay central to land inside the front
    // mask in near-frontal views.
    const double face = rng.uniform01();
    if (face < 0.40) {
        const double a = rng.uniform(-0.45, 0.45) * c.width;
        const double b = rng.uniform(-0.45, 0.45) * c.height;
        return c.center + a * u + b * kUp + 0.5 * c.depth * n;
    }
    if (face < 0.70) {
        const double a = rng.uniform(-0.30, 0.30) * c.width;
        const double b = rng.uniform(-0.30, 0.30) * c.height;
        return c.center + a * u + b * kUp - 0.5 * c.depth * n;
    }
    const double sgn = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double b = rng.uniform(-0.45, 0.45) * c.height;
    const double s = rng.uniform(-0.45, 0.45) * c.depth;
    return c.center + sgn * 0.5 * c.width * u + b * kUp + s * n;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_signs < 0 || n_lights < 0 || n_circles < 0 || n_cones < 0)
        throw ConfigError("synth: object counts must be >= 0");
    if (n_frames < 1) throw ConfigError("synth: n_frames must be >= 1");
    if (!(trajectory_length > 0.0)) throw ConfigError("synth: trajectory_length must be > 0");
    if (!(sign_distance_min > 0.0) || sign_distance_max < sign_distance_min)
        throw ConfigError("synth: empty sign_distance range");
    if (pixel_noise_sigma < 0.0) throw ConfigError("synth: pixel_noise_sigma must be >= 0");
    for (const double f : {outlier_fraction, dropout_fraction, occluder_fraction})
        if (f < 0.0 || f >= 1.0) throw ConfigError("synth: fractions must lie in [0, 1)");
    if (outlier_magnitude < 0.0) throw ConfigError("synth: outlier_magnitude must be >= 0");
    if (keypoints_min < 3 || keypoints_max < keypoints_min)
        throw ConfigError("synth: empty keypoints range (min >= 3 required)");
}

std::pair<Scene, GroundTruth> generate_scene(const SynthConfig& cfg) {
    cfg.validate();
    // Draw order: per object (class-major: signs, circles, lights, cones)
    // first the placement draws, then the keypoint draws. Frames, visibility
    // and occlusion resolution are deterministic functions of the geometry.
    SplitMix64 rng(cfg.seed);

    Scene scene;
    GroundTruth gt;

    const double straight_len = 0.6 * cfg.trajectory_length;
    for (int i = 0; i < cfg.n_frames; ++i) {
        const double s = cfg.n_frames == 1
                             ? 0.0
                             : cfg.trajectory_length * static_cast<double>(i) / (cfg.n_frames - 1);
        CameraFrame f;
        f.frame_id = i;
        f.timestamp = static_cast<std::int64_t>(i) * 100000;
        f.camera_name = "front";
        f.intrinsics = {1000.0, 1000.0, 800.0, 450.0, 1600, 900};
        f.world_from_camera = camera_pose(path_at(s, straight_len));
        scene.frames.push_back(std::move(f));
    }

    struct ClassCount {
        ObjectClass cls;
        int count;
    };
    const std::array<ClassCount, 4> plan{{{ObjectClass::guideboard, cfg.n_signs},
                                          {ObjectClass::circular_sign, cfg.n_circles},
                                          {ObjectClass::traffic_light, cfg.n_lights},
                                          {ObjectClass::traffic_cone, cfg.n_cones}}};

    struct ObjectDraft {
        ShapeParams params;
        ObjectClass cls;
        std::vector<Vec3> keypoints;
    };
    std::vector<ObjectDraft> drafts;
    std::vector<Vec3> placed_centers;
    for (const auto& [cls, count] : plan) {
        for (int i = 0; i < count; ++i) {
            ShapeParams params;
            for (int attempt = 0; attempt < 100; ++attempt) {
                const double s_obj = rng.uniform(8.0, cfg.trajectory_length + 20.0);
                const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
                const double lateral = rng.uniform(cfg.sign_distance_min, cfg.sign_distance_max);
                const PathSample at = path_at(s_obj, straight_len);
                const Vec3 left(-std::sin(at.heading), std::cos(at.heading), 0.0);
                const Vec3 base = at.position + side * lateral * left;
                const double yaw =
                    wrap_angle(yaw_facing(at.heading) + rng.uniform(-M_PI / 9.0, M_PI / 9.0));
                switch (cls) {
                    case ObjectClass::guideboard: {
                        RectSignParams p;
                        p.width = rng.uniform(0.9, 2.2);
                        p.height = rng.uniform(0.6, 1.4);
                        p.center = base + Vec3(0.0, 0.0, rng.uniform(1.8, 3.5));
                        p.yaw = yaw;
                        params = p;
                        break;
                    }
                    case ObjectClass::circular_sign: {
                        CircleSignParams p;
                        p.radius = rng.uniform(0.3, 0.5);
                        p.center = base + Vec3(0.0, 0.0, rng.uniform(1.8, 3.0));
                        p.yaw = yaw;
                        params = p;
                        break;
                    }
                    case ObjectClass::traffic_light: {
                        CuboidParams p;
                        p.width = rng.uniform(0.25, 0.4);
                        p.height = rng.uniform(0.7, 1.1);
                        p.depth = rng.uniform(0.15, 0.35);
                        p.center = base + Vec3(0.0, 0.0, rng.uniform(4.2, 6.0));
                        p.yaw = yaw;
                        params = p;
                        break;
                    }
                    case ObjectClass::traffic_cone: {
                        CuboidParams p;
                        p.width = rng.uniform(0.25, 0.35);
                        p.depth = p.width;
                        p.height = rng.uniform(0.5, 0.75);
                        p.center = base + Vec3(0.0, 0.0, 0.5 * p.height);
                        p.yaw = yaw;
                        params = p;
                        break;
                    }
                }
                const Vec3 c = params_center(params);
                const bool clear = std::all_of(
                    placed_centers.begin(), placed_centers.end(),
                    [&](const Vec3& other) { return (other - c).norm() > 3.0; });
                if (clear) break;
            }
            placed_centers.push_back(params_center(params));

            ObjectDraft draft;
            draft.cls = cls;
            draft.params = params;
            const int n_kp =
                static_cast<int>(rng.uniform_int(cfg.keypoints_min, cfg.keypoints_max));
            draft.keypoints.reserve(static_cast<size_t>(n_kp));
            for (int k = 0; k < n_kp; ++k)
                draft.keypoints.push_back(sample_surface_point(params, rng));
            drafts.push_back(std::move(draft));
        }
    }

    // Observations: exact projected contours in every frame that sees the
    // whole front face comfortably. When two footprints overlap in image
    // space, only the closer object is detected (solid-world rule); this
    // also keeps keypoint memberships unambiguous.
    gt.objects.resize(drafts.size());
    std::vector<std::vector<std::int64_t>> visible_frames(drafts.size());
    for (const CameraFrame& frame : scene.frames) {
        struct Candidate {
            size_t obj;
            Polygon2D mask;
            double depth;
        };
        std::vector<Candidate> candidates;
        for (size_t oi = 0; oi < drafts.size(); ++oi) {
            const ShapeParams& params = drafts[oi].params;
            const Vec3 cam = frame.world_from_camera.translation;
            const Vec3 center = params_center(params);
            const Vec3 n = plane_normal(params_yaw(params));
            const Vec3 to_cam = (cam - center).normalized();
            if (n.dot(to_cam) < kMinFrontCosine) continue;
            const double depth = inverse_transform_point(frame.world_from_camera, center).z();
            if (depth < kMinObjectDepth || depth > kMaxObjectDepth) continue;

            const std::vector<Vec3> outline = shape_outline_points(params, kCircleMaskVertices);
            Polygon2D mask;
            bool ok = true;
            for (const Vec3& p : outline) {
                const auto px = project(frame.intrinsics, frame.world_from_camera, p);
                if (!px || !frame.intrinsics.contains(*px, kImageMargin)) {
                    ok = false;
                    break;
                }
                mask.push_back(*px);
            }
            if (!ok) continue;
            mask = ensure_ccw(std::move(mask));
            if (polygon_area(mask) < kMinMaskArea) continue;
            candidates.push_back({oi, std::move(mask), depth});
        }

        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& a, const Candidate& b) {
                      return a.depth < b.depth || (a.depth == b.depth && a.obj < b.obj);
                  });
        std::vector<const Candidate*> kept;
        for (const Candidate& c : candidates) {
            const double area_c = polygon_area(c.mask);
            const bool hidden = std::any_of(kept.begin(), kept.end(), [&](const Candidate* k) {
                const double inter = polygon_area(convex_intersection(c.mask, k->mask));
                return inter > 0.05 * std::min(area_c, polygon_area(k->mask));
            });
            if (!hidden) kept.push_back(&c);
        }
        std::sort(kept.begin(), kept.end(),
                  [](const Candidate* a, const Candidate* b) { return a->obj < b->obj; });

        for (const Candidate* c : kept) {
            InstanceObservation obs;
            obs.obs_id = static_cast<std::int64_t>(scene.observations.size());
            obs.frame_id = frame.frame_id;
            obs.object_class = drafts[c->obj].cls;
            obs.mask = c->mask;
            obs.det_box = polygon_aabb(obs.mask);
            gt.objects[c->obj].obs_ids.push_back(obs.obs_id);
            visible_frames[c->obj].push_back(frame.frame_id);
            scene.observations.push_back(std::move(obs));
        }
    }

    // Keypoints become map points observed exactly in the frames where their
    // object is detected (feature visibility follows object visibility).
    for (size_t oi = 0; oi < drafts.size(); ++oi) {
        GroundTruthObject& obj = gt.objects[oi];
        obj.track_id = static_cast<std::int64_t>(oi);
        obj.object_class = drafts[oi].cls;
        obj.params = drafts[oi].params;
        for (const Vec3& kp : drafts[oi].keypoints) {
            SparseMapPoint point;
            point.point_id = static_cast<std::int64_t>(scene.map_points.size());
            point.position = kp;
            for (const std::int64_t frame_id : visible_frames[oi]) {
                const CameraFrame* frame = scene.find_frame(frame_id);
                const auto px = project(frame->intrinsics, frame->world_from_camera, kp);
                if (!px || !frame->intrinsics.contains(*px, kImageMargin)) continue;
                point.observations.push_back({frame_id, *px});
            }
            if (point.observations.size() < 2) continue;  // SfM needs two views
            obj.point_ids.push_back(point.point_id);
            scene.map_points.push_back(std::move(point));
        }
    }

    scene.ground_truth = gt;
    validate_scene(scene);
    return {scene, gt};
}

Scene corrupt(const Scene& scene, GroundTruth& gt, const SynthConfig& cfg) {
    cfg.validate();
    // Separate stream from generate_scene; draw order is per observation
    // (dropout, occluder, vertex noise, vertex outliers), then per map point
    // observation (pixel noise).
    SplitMix64 rng(cfg.seed ^ 0x9D2C5680ULL);

    Scene out = scene;
    std::set<std::int64_t> removed;

    for (InstanceObservation& obs : out.observations) {
        if (cfg.dropout_fraction > 0.0 && rng.bernoulli(cfg.dropout_fraction)) {
            removed.insert(obs.obs_id);
            continue;
        }
        if (cfg.occluder_fraction > 0.0 && rng.bernoulli(cfg.occluder_fraction)) {
            const int side = static_cast<int>(rng.uniform_int(0, 3));
            const double frac = rng.uniform(0.15, 0.4);
            const Aabb2D box = polygon_aabb(obs.mask);
            Vec2 origin, normal;
            switch (side) {
                case 0:  // cut away the left part
                    normal = {-1.0, 0.0};
                    origin = {box.min.x() + frac * (box.max.x() - box.min.x()), 0.0};
                    break;
                case 1:
                    normal = {1.0, 0.0};
                    origin = {box.max.x() - frac * (box.max.x() - box.min.x()), 0.0};
                    break;
                case 2:
                    normal = {0.0, -1.0};
                    origin = {0.0, box.min.y() + frac * (box.max.y() - box.min.y())};
                    break;
                default:
                    normal = {0.0, 1.0};
                    origin = {0.0, box.max.y() - frac * (box.max.y() - box.min.y())};
                    break;
            }
            Polygon2D clipped = clip_half_plane(obs.mask, origin, normal);
            clipped = ensure_ccw(std::move(clipped));
            if (clipped.size() >= 3 && polygon_area(clipped) > 1e-6) {
                const double ratio = polygon_aabb(clipped).area() / obs.det_box.area();
                if (ratio < 1.0) {
                    obs.mask = std::move(clipped);
                    gt.occluded_obs_ids.insert(obs.obs_id);
                }
            }
        }
        if (cfg.pixel_noise_sigma > 0.0) {
            for (Vec2& v : obs.mask)
                v += Vec2(rng.normal(0.0, cfg.pixel_noise_sigma),
                          rng.normal(0.0, cfg.pixel_noise_sigma));
        }
        if (cfg.outlier_fraction > 0.0) {
            const Polygon2D before = obs.mask;
            for (Vec2& v : obs.mask) {
                if (!rng.bernoulli(cfg.outlier_fraction)) continue;
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                v += cfg.outlier_magnitude * Vec2(std::cos(phi), std::sin(phi));
            }
            // Outliers must not break the det_box/centroid invariant.
            if (!obs.det_box.contains(polygon_centroid(obs.mask))) obs.mask = before;
        }
    }

    if (!removed.empty()) {
        std::erase_if(out.observations, [&](const InstanceObservation& o) {
            return removed.count(o.obs_id) > 0;
        });
        for (GroundTruthObject& obj : gt.objects)
            std::erase_if(obj.obs_ids,
                          [&](std::int64_t id) { return removed.count(id) > 0; });
        for (std::int64_t id : removed) gt.occluded_obs_ids.erase(id);
    }

    if (cfg.pixel_noise_sigma > 0.0) {
        for (SparseMapPoint& p : out.map_points)
            for (PixelObservation& o : p.observations)
                o.pixel += Vec2(rng.normal(0.0, cfg.pixel_noise_sigma),
                                rng.normal(0.0, cfg.pixel_noise_sigma));
    }

    out.ground_truth = gt;
    validate_scene(out);
    return out;
}

}  // namespace roadobj
