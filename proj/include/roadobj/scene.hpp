#pragma once

#include "roadobj/geometry.hpp"
#include "roadobj/polygon.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace roadobj {

inline constexpr const char* kFormatVersion = "1";

enum class ObjectClass { guideboard, circular_sign, traffic_light, traffic_cone };

const char* to_string(ObjectClass c);
ObjectClass object_class_from_string(const std::string& s);

/// Classes whose image footprint is handled through quad corners rather than
/// a circular contour.
inline bool is_rectangular_family(ObjectClass c) { return c != ObjectClass::circular_sign; }

struct CameraFrame {
    std::int64_t frame_id = 0;
    std::int64_t timestamp = 0;  // microseconds
    CameraIntrinsics intrinsics;
    Pose world_from_camera;
    std::string camera_name = "front";
    /// Camera-to-range-sensor pairing slack, used only by the evaluation
    /// timestamp filter. 0 = perfectly paired.
    double pair_time_delta_ms = 0.0;
};

struct PixelObservation {
    std::int64_t frame_id = 0;
    Vec2 pixel{0.0, 0.0};
};

struct SparseMapPoint {
    std::int64_t point_id = 0;
    Vec3 position{0.0, 0.0, 0.0};
    std::vector<PixelObservation> observations;  // >= 2, sorted by frame_id
};

struct InstanceObservation {
    std::int64_t obs_id = 0;
    std::int64_t frame_id = 0;
    ObjectClass object_class = ObjectClass::guideboard;
    Aabb2D det_box;
    Polygon2D mask;  // simple polygon, CCW, >= 3 vertices
};

struct Track {
    std::int64_t track_id = 0;
    ObjectClass object_class = ObjectClass::guideboard;
    std::vector<std::int64_t> obs_ids;           // sorted
    std::set<std::int64_t> support_point_ids;
    bool valid = true;  // false when support fell below the configured minimum
};

using ShapeParams = std::variant<RectSignParams, CuboidParams, CircleSignParams>;

ObjectClass default_class_for(const ShapeParams& p);
Vec3 params_center(const ShapeParams& p);
double params_yaw(const ShapeParams& p);

struct StaticAnnotation {
    std::int64_t annotation_id = 0;
    std::int64_t track_id = 0;
    ObjectClass object_class = ObjectClass::guideboard;
    ShapeParams params;
    double mean_reproj_error = 0.0;  // pixels
    std::int64_t n_observations_used = 0;
};

/// An annotation re-expressed in one frame's sensor coordinate system.
struct FrameLocalAnnotation {
    std::int64_t frame_id = 0;
    std::int64_t annotation_id = 0;
    ObjectClass object_class = ObjectClass::guideboard;
    ShapeParams params;  // center/yaw in sensor coordinates, sizes unchanged
};

struct GroundTruthObject {
    std::int64_t track_id = 0;
    ObjectClass object_class = ObjectClass::guideboard;
    ShapeParams params;
    std::vector<std::int64_t> obs_ids;    // observations generated by this object
    std::vector<std::int64_t> point_ids;  // keypoints sampled on its surface
};

struct GroundTruth {
    std::vector<GroundTruthObject> objects;
    std::set<std::int64_t> occluded_obs_ids;
};

struct Scene {
    std::vector<CameraFrame> frames;              // sorted by frame_id
    std::vector<SparseMapPoint> map_points;       // sorted by point_id
    std::vector<InstanceObservation> observations;  // sorted by obs_id
    std::optional<GroundTruth> ground_truth;

    const CameraFrame* find_frame(std::int64_t frame_id) const;
    const InstanceObservation* find_observation(std::int64_t obs_id) const;
    const SparseMapPoint* find_point(std::int64_t point_id) const;

    /// Observations grouped per frame, in obs_id order.
    std::map<std::int64_t, std::vector<const InstanceObservation*>> observations_by_frame() const;
};

/// Checks every documented invariant; throws ValidationError naming the
/// first offending record. Called by load_scene and by the simulator.
void validate_scene(const Scene& scene);

Scene load_scene(std::istream& in);
Scene load_scene_file(const std::string& path);
void save_scene(const Scene& scene, std::ostream& out);
void save_scene_file(const Scene& scene, const std::string& path);

std::vector<StaticAnnotation> load_annotations(std::istream& in);
std::vector<StaticAnnotation> load_annotations_file(const std::string& path);

struct FitReport;  // optimize.hpp
void save_annotations(const std::vector<StaticAnnotation>& annotations, std::ostream& out,
                      const std::vector<FitReport>* reports = nullptr);
void save_annotations_file(const std::vector<StaticAnnotation>& annotations,
                           const std::string& path,
                           const std::vector<FitReport>* reports = nullptr);

/// Re-express clip-level annotations in a frame's sensor coordinates:
/// center through the inverse pose, yaw reduced by the pose heading, sizes
/// unchanged.
std::vector<FrameLocalAnnotation> clip_to_frame(const std::vector<StaticAnnotation>& annotations,
                                                std::int64_t frame_id,
                                                const Pose& world_from_sensor);

/// Inverse of clip_to_frame for round-trip checks.
StaticAnnotation frame_to_clip(const FrameLocalAnnotation& local, const Pose& world_from_sensor);

}  // namespace roadobj
