#include "roadobj/scene.hpp"

#include "roadobj/errors.hpp"
#include "roadobj/optimize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace roadobj {

using json = nlohmann::ordered_json;

const char* to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::guideboard: return "guideboard";
        case ObjectClass::circular_sign: return "circular_sign";
        case ObjectClass::traffic_light: return "traffic_light";
        case ObjectClass::traffic_cone: return "traffic_cone";
    }
    return "guideboard";
}

ObjectClass object_class_from_string(const std::string& s) {
    if (s == "guideboard") return ObjectClass::guideboard;
    if (s == "circular_sign") return ObjectClass::circular_sign;
    if (s == "traffic_light") return ObjectClass::traffic_light;
    if (s == "traffic_cone") return ObjectClass::traffic_cone;
    throw ParseError("unknown class tag \"" + s + "\"");
}

ObjectClass default_class_for(const ShapeParams& p) {
    if (std::holds_alternative<RectSignParams>(p)) return ObjectClass::guideboard;
    if (std::holds_alternative<CircleSignParams>(p)) return ObjectClass::circular_sign;
    return ObjectClass::traffic_light;
}

Vec3 params_center(const ShapeParams& p) {
    return std::visit([](const auto& s) { return s.center; }, p);
}

double params_yaw(const ShapeParams& p) {
    return std::visit([](const auto& s) { return s.yaw; }, p);
}

const CameraFrame* Scene::find_frame(std::int64_t frame_id) const {
    const auto it = std::lower_bound(
        frames.begin(), frames.end(), frame_id,
        [](const CameraFrame& f, std::int64_t id) { return f.frame_id < id; });
    return (it != frames.end() && it->frame_id == frame_id) ? &*it : nullptr;
}

const InstanceObservation* Scene::find_observation(std::int64_t obs_id) const {
    const auto it = std::lower_bound(
        observations.begin(), observations.end(), obs_id,
        [](const InstanceObservation& o, std::int64_t id) { return o.obs_id < id; });
    return (it != observations.end() && it->obs_id == obs_id) ? &*it : nullptr;
}

const SparseMapPoint* Scene::find_point(std::int64_t point_id) const {
    const auto it = std::lower_bound(
        map_points.begin(), map_points.end(), point_id,
        [](const SparseMapPoint& p, std::int64_t id) { return p.point_id < id; });
    return (it != map_points.end() && it->point_id == point_id) ? &*it : nullptr;
}

std::map<std::int64_t, std::vector<const InstanceObservation*>> Scene::observations_by_frame()
    const {
    std::map<std::int64_t, std::vector<const InstanceObservation*>> out;
    for (const InstanceObservation& obs : observations) out[obs.frame_id].push_back(&obs);
    return out;
}

void validate_scene(const Scene& scene) {
    if (scene.frames.empty()) throw ValidationError("no frames");

    std::map<std::string, std::int64_t> last_timestamp;
    std::set<std::int64_t> frame_ids;
    for (const CameraFrame& f : scene.frames) {
        const std::string tag = "frame " + std::to_string(f.frame_id);
        if (!frame_ids.insert(f.frame_id).second)
            throw ValidationError(tag + ": duplicate frame_id");
        if (!f.intrinsics.valid()) throw ValidationError(tag + ": invalid intrinsics");
        if (std::abs(f.world_from_camera.rotation.norm() - 1.0) > 1e-9)
            throw ValidationError(tag + ": quaternion norm deviates from 1");
        if (!f.world_from_camera.translation.allFinite())
            throw ValidationError(tag + ": non-finite translation");
        const auto it = last_timestamp.find(f.camera_name);
        if (it != last_timestamp.end() && f.timestamp < it->second)
            throw ValidationError(tag + ": timestamps decrease for camera " + f.camera_name);
        last_timestamp[f.camera_name] = f.timestamp;
    }

    std::set<std::int64_t> point_ids;
    for (const SparseMapPoint& p : scene.map_points) {
        const std::string tag = "map_point " + std::to_string(p.point_id);
        if (!point_ids.insert(p.point_id).second)
            throw ValidationError(tag + ": duplicate point_id");
        if (!p.position.allFinite()) throw ValidationError(tag + ": non-finite position");
        if (p.observations.size() < 2)
            throw ValidationError(tag + ": fewer than 2 observations");
        for (const PixelObservation& o : p.observations) {
            const CameraFrame* frame = scene.find_frame(o.frame_id);
            if (frame == nullptr)
                throw ValidationError(tag + ": dangling frame_id " + std::to_string(o.frame_id));
            if (!o.pixel.allFinite()) throw ValidationError(tag + ": non-finite pixel");
            const Vec3 p_cam = inverse_transform_point(frame->world_from_camera, p.position);
            if (!(p_cam.z() > 1e-9) || !std::isfinite(p_cam.x() / p_cam.z()))
                throw ValidationError(tag + ": reprojection into frame " +
                                      std::to_string(o.frame_id) + " is not finite");
        }
    }

    std::set<std::int64_t> obs_ids;
    for (const InstanceObservation& o : scene.observations) {
        const std::string tag = "observation " + std::to_string(o.obs_id);
        if (!obs_ids.insert(o.obs_id).second) throw ValidationError(tag + ": duplicate obs_id");
        if (scene.find_frame(o.frame_id) == nullptr)
            throw ValidationError(tag + ": dangling frame_id " + std::to_string(o.frame_id));
        if (o.mask.size() < 3) throw ValidationError(tag + ": degenerate mask (<3 vertices)");
        const double area = polygon_signed_area(o.mask);
        if (!(area > 1e-9)) {
            if (area < -1e-9) throw ValidationError(tag + ": mask winding is not CCW");
            throw ValidationError(tag + ": degenerate mask (zero area)");
        }
        if (!(o.det_box.max.x() > o.det_box.min.x() && o.det_box.max.y() > o.det_box.min.y()))
            throw ValidationError(tag + ": empty det_box");
        if (!o.det_box.contains(polygon_centroid(o.mask)))
            throw ValidationError(tag + ": det_box does not contain mask centroid");
    }

    if (scene.ground_truth) {
        for (const GroundTruthObject& g : scene.ground_truth->objects) {
            const std::string tag = "ground_truth object " + std::to_string(g.track_id);
            const bool ok = std::visit([](const auto& s) { return s.valid(); }, g.params);
            if (!ok) throw ValidationError(tag + ": invalid shape parameters");
            for (std::int64_t id : g.obs_ids)
                if (scene.find_observation(id) == nullptr)
                    throw ValidationError(tag + ": dangling obs_id " + std::to_string(id));
        }
        for (std::int64_t id : scene.ground_truth->occluded_obs_ids)
            if (scene.find_observation(id) == nullptr)
                throw ValidationError("ground_truth: dangling occluded obs_id " +
                                      std::to_string(id));
    }
}

namespace {

json vec2_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec2 vec2_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw ParseError(std::string(what) + ": expected [u, v]");
    return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError(std::string(what) + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json params_to_json(const ShapeParams& params) {
    json j;
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        j["center"] = vec3_to_json(r->center);
        j["yaw"] = r->yaw;
        j["width"] = r->width;
        j["height"] = r->height;
    } else if (const auto* c = std::get_if<CuboidParams>(&params)) {
        j["center"] = vec3_to_json(c->center);
        j["yaw"] = c->yaw;
        j["width"] = c->width;
        j["height"] = c->height;
        j["depth"] = c->depth;
    } else {
        const auto& s = std::get<CircleSignParams>(params);
        j["center"] = vec3_to_json(s.center);
        j["yaw"] = s.yaw;
        j["radius"] = s.radius;
    }
    return j;
}

ShapeParams params_from_json(ObjectClass cls, const json& j) {
    if (cls == ObjectClass::circular_sign) {
        CircleSignParams p;
        p.center = vec3_from_json(j.at("center"), "params.center");
        p.yaw = j.at("yaw").get<double>();
        p.radius = j.at("radius").get<double>();
        return p;
    }
    if (cls == ObjectClass::guideboard) {
        RectSignParams p;
        p.center = vec3_from_json(j.at("center"), "params.center");
        p.yaw = j.at("yaw").get<double>();
        p.width = j.at("width").get<double>();
        p.height = j.at("height").get<double>();
        return p;
    }
    CuboidParams p;
    p.center = vec3_from_json(j.at("center"), "params.center");
    p.yaw = j.at("yaw").get<double>();
    p.width = j.at("width").get<double>();
    p.height = j.at("height").get<double>();
    p.depth = j.at("depth").get<double>();
    return p;
}

json scene_to_json(const Scene& scene) {
    json root;
    root["format_version"] = kFormatVersion;

    json frames = json::array();
    for (const CameraFrame& f : scene.frames) {
        json jf;
        jf["frame_id"] = f.frame_id;
        jf["timestamp"] = f.timestamp;
        jf["camera_name"] = f.camera_name;
        jf["intrinsics"] = {{"fx", f.intrinsics.fx},         {"fy", f.intrinsics.fy},
                            {"cx", f.intrinsics.cx},         {"cy", f.intrinsics.cy},
                            {"width", f.intrinsics.width},   {"height", f.intrinsics.height}};
        const Eigen::Quaterniond& q = f.world_from_camera.rotation;
        jf["world_from_camera"] = {
            {"rotation", json::array({q.w(), q.x(), q.y(), q.z()})},
            {"translation", vec3_to_json(f.world_from_camera.translation)}};
        if (f.pair_time_delta_ms != 0.0) jf["pair_time_delta_ms"] = f.pair_time_delta_ms;
        frames.push_back(std::move(jf));
    }
    root["frames"] = std::move(frames);

    json points = json::array();
    for (const SparseMapPoint& p : scene.map_points) {
        json jp;
        jp["point_id"] = p.point_id;
        jp["position"] = vec3_to_json(p.position);
        json obs = json::array();
        for (const PixelObservation& o : p.observations)
            obs.push_back({{"frame_id", o.frame_id}, {"pixel", vec2_to_json(o.pixel)}});
        jp["observations"] = std::move(obs);
        points.push_back(std::move(jp));
    }
    root["map_points"] = std::move(points);

    json observations = json::array();
    for (const InstanceObservation& o : scene.observations) {
        json jo;
        jo["obs_id"] = o.obs_id;
        jo["frame_id"] = o.frame_id;
        jo["class"] = to_string(o.object_class);
        jo["det_box"] = json::array(
            {o.det_box.min.x(), o.det_box.min.y(), o.det_box.max.x(), o.det_box.max.y()});
        json mask = json::array();
        for (const Vec2& v : o.mask) mask.push_back(vec2_to_json(v));
        jo["mask"] = std::move(mask);
        observations.push_back(std::move(jo));
    }
    root["observations"] = std::move(observations);

    if (scene.ground_truth) {
        json gt;
        json objects = json::array();
        for (const GroundTruthObject& g : scene.ground_truth->objects) {
            json jg;
            jg["track_id"] = g.track_id;
            jg["class"] = to_string(g.object_class);
            jg["params"] = params_to_json(g.params);
            jg["obs_ids"] = g.obs_ids;
            jg["point_ids"] = g.point_ids;
            objects.push_back(std::move(jg));
        }
        gt["objects"] = std::move(objects);
        gt["occluded_obs_ids"] =
            std::vector<std::int64_t>(scene.ground_truth->occluded_obs_ids.begin(),
                                      scene.ground_truth->occluded_obs_ids.end());
        root["ground_truth"] = std::move(gt);
    }
    return root;
}

Scene scene_from_json(const json& root) {
    Scene scene;
    const std::string version = root.at("format_version").get<std::string>();
    if (version != kFormatVersion)
        throw ParseError("unsupported format_version \"" + version + "\"");

    for (const json& jf : root.at("frames")) {
        CameraFrame f;
        f.frame_id = jf.at("frame_id").get<std::int64_t>();
        f.timestamp = jf.at("timestamp").get<std::int64_t>();
        f.camera_name = jf.at("camera_name").get<std::string>();
        const json& ji = jf.at("intrinsics");
        f.intrinsics.fx = ji.at("fx").get<double>();
        f.intrinsics.fy = ji.at("fy").get<double>();
        f.intrinsics.cx = ji.at("cx").get<double>();
        f.intrinsics.cy = ji.at("cy").get<double>();
        f.intrinsics.width = ji.at("width").get<int>();
        f.intrinsics.height = ji.at("height").get<int>();
        const json& jp = jf.at("world_from_camera");
        const json& jq = jp.at("rotation");
        if (!jq.is_array() || jq.size() != 4)
            throw ParseError("frame " + std::to_string(f.frame_id) +
                             ": rotation must be [w, x, y, z]");
        f.world_from_camera.rotation = Eigen::Quaterniond(
            jq[0].get<double>(), jq[1].get<double>(), jq[2].get<double>(), jq[3].get<double>());
        f.world_from_camera.translation = vec3_from_json(jp.at("translation"), "translation");
        if (jf.contains("pair_time_delta_ms"))
            f.pair_time_delta_ms = jf.at("pair_time_delta_ms").get<double>();
        scene.frames.push_back(std::move(f));
    }

    for (const json& jp : root.at("map_points")) {
        SparseMapPoint p;
        p.point_id = jp.at("point_id").get<std::int64_t>();
        p.position = vec3_from_json(jp.at("position"), "position");
        for (const json& jo : jp.at("observations")) {
            PixelObservation o;
            o.frame_id = jo.at("frame_id").get<std::int64_t>();
            o.pixel = vec2_from_json(jo.at("pixel"), "pixel");
            p.observations.push_back(o);
        }
        scene.map_points.push_back(std::move(p));
    }

    for (const json& jo : root.at("observations")) {
        InstanceObservation o;
        o.obs_id = jo.at("obs_id").get<std::int64_t>();
        o.frame_id = jo.at("frame_id").get<std::int64_t>();
        o.object_class = object_class_from_string(jo.at("class").get<std::string>());
        const json& jb = jo.at("det_box");
        if (!jb.is_array() || jb.size() != 4)
            throw ParseError("observation " + std::to_string(o.obs_id) +
                             ": det_box must be [umin, vmin, umax, vmax]");
        o.det_box.min = {jb[0].get<double>(), jb[1].get<double>()};
        o.det_box.max = {jb[2].get<double>(), jb[3].get<double>()};
        for (const json& jv : jo.at("mask")) o.mask.push_back(vec2_from_json(jv, "mask vertex"));
        scene.observations.push_back(std::move(o));
    }

    if (root.contains("ground_truth")) {
        GroundTruth gt;
        for (const json& jg : root.at("ground_truth").at("objects")) {
            GroundTruthObject g;
            g.track_id = jg.at("track_id").get<std::int64_t>();
            g.object_class = object_class_from_string(jg.at("class").get<std::string>());
            g.params = params_from_json(g.object_class, jg.at("params"));
            if (jg.contains("obs_ids"))
                g.obs_ids = jg.at("obs_ids").get<std::vector<std::int64_t>>();
            if (jg.contains("point_ids"))
                g.point_ids = jg.at("point_ids").get<std::vector<std::int64_t>>();
            gt.objects.push_back(std::move(g));
        }
        if (root.at("ground_truth").contains("occluded_obs_ids"))
            for (const json& id : root.at("ground_truth").at("occluded_obs_ids"))
                gt.occluded_obs_ids.insert(id.get<std::int64_t>());
        scene.ground_truth = std::move(gt);
    }

    std::sort(scene.frames.begin(), scene.frames.end(),
              [](const CameraFrame& a, const CameraFrame& b) { return a.frame_id < b.frame_id; });
    std::sort(scene.map_points.begin(), scene.map_points.end(),
              [](const SparseMapPoint& a, const SparseMapPoint& b) {
                  return a.point_id < b.point_id;
              });
    std::sort(scene.observations.begin(), scene.observations.end(),
              [](const InstanceObservation& a, const InstanceObservation& b) {
                  return a.obs_id < b.obs_id;
              });
    for (SparseMapPoint& p : scene.map_points)
        std::sort(p.observations.begin(), p.observations.end(),
                  [](const PixelObservation& a, const PixelObservation& b) {
                      return a.frame_id < b.frame_id;
                  });

    validate_scene(scene);
    return scene;
}

json parse_stream(std::istream& in) {
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

Scene load_scene(std::istream& in) {
    const json root = parse_stream(in);
    try {
        return scene_from_json(root);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene document: ") + e.what());
    }
}

Scene load_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file " + path);
    return load_scene(in);
}

void save_scene(const Scene& scene, std::ostream& out) {
    out << scene_to_json(scene).dump(2) << "\n";
}

void save_scene_file(const Scene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file " + path);
    save_scene(scene, out);
}

void save_annotations(const std::vector<StaticAnnotation>& annotations, std::ostream& out,
                      const std::vector<FitReport>* reports) {
    std::vector<std::size_t> order(annotations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return annotations[a].annotation_id < annotations[b].annotation_id;
    });

    json root;
    root["format_version"] = kFormatVersion;
    json arr = json::array();
    for (std::size_t idx : order) {
        const StaticAnnotation& a = annotations[idx];
        json ja;
        ja["annotation_id"] = a.annotation_id;
        ja["track_id"] = a.track_id;
        ja["class"] = to_string(a.object_class);
        ja["params"] = params_to_json(a.params);
        ja["mean_reproj_error"] = a.mean_reproj_error;
        ja["n_observations_used"] = a.n_observations_used;
        if (reports != nullptr && idx < reports->size()) {
            const FitReport& r = (*reports)[idx];
            ja["fit_report"] = {{"initial_cost", r.initial_cost},
                                {"final_cost", r.final_cost},
                                {"iterations", r.iterations},
                                {"converged", r.converged},
                                {"mean_reproj_error", r.mean_reproj_error},
                                {"n_residuals", r.n_residuals}};
        }
        arr.push_back(std::move(ja));
    }
    root["annotations"] = std::move(arr);
    out << root.dump(2) << "\n";
}

void save_annotations_file(const std::vector<StaticAnnotation>& annotations,
                           const std::string& path, const std::vector<FitReport>* reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file " + path);
    save_annotations(annotations, out, reports);
}

std::vector<StaticAnnotation> load_annotations(std::istream& in) {
    const json root = parse_stream(in);
    std::vector<StaticAnnotation> out;
    try {
        const std::string version = root.at("format_version").get<std::string>();
        if (version != kFormatVersion)
            throw ParseError("unsupported format_version \"" + version + "\"");
        for (const json& ja : root.at("annotations")) {
            StaticAnnotation a;
            a.annotation_id = ja.at("annotation_id").get<std::int64_t>();
            a.track_id = ja.at("track_id").get<std::int64_t>();
            a.object_class = object_class_from_string(ja.at("class").get<std::string>());
            a.params = params_from_json(a.object_class, ja.at("params"));
            a.mean_reproj_error = ja.at("mean_reproj_error").get<double>();
            a.n_observations_used = ja.at("n_observations_used").get<std::int64_t>();
            if (a.mean_reproj_error < 0.0)
                throw ParseError("annotation " + std::to_string(a.annotation_id) +
                                 ": negative mean_reproj_error");
            const bool ok = std::visit([](const auto& s) { return s.valid(); }, a.params);
            if (!ok)
                throw ParseError("annotation " + std::to_string(a.annotation_id) +
                                 ": invalid shape parameters");
            out.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("annotation document: ") + e.what());
    }
    std::sort(out.begin(), out.end(), [](const StaticAnnotation& a, const StaticAnnotation& b) {
        return a.annotation_id < b.annotation_id;
    });
    return out;
}

std::vector<StaticAnnotation> load_annotations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open annotation file " + path);
    return load_annotations(in);
}

std::vector<FrameLocalAnnotation> clip_to_frame(const std::vector<StaticAnnotation>& annotations,
                                                std::int64_t frame_id,
                                                const Pose& world_from_sensor) {
    const double heading = world_from_sensor.heading();
    std::vector<FrameLocalAnnotation> out;
    out.reserve(annotations.size());
    for (const StaticAnnotation& a : annotations) {
        FrameLocalAnnotation local;
        local.frame_id = frame_id;
        local.annotation_id = a.annotation_id;
        local.object_class = a.object_class;
        local.params = a.params;
        std::visit(
            [&](auto& s) {
                s.center = inverse_transform_point(world_from_sensor, s.center);
                s.yaw = wrap_angle(s.yaw - heading);
            },
            local.params);
        out.push_back(std::move(local));
    }
    return out;
}

StaticAnnotation frame_to_clip(const FrameLocalAnnotation& local, const Pose& world_from_sensor) {
    StaticAnnotation a;
    a.annotation_id = local.annotation_id;
    a.object_class = local.object_class;
    a.params = local.params;
    const double heading = world_from_sensor.heading();
    std::visit(
        [&](auto& s) {
            s.center = transform_point(world_from_sensor, s.center);
            s.yaw = wrap_angle(s.yaw + heading);
        },
        a.params);
    return a;
}

}  // namespace roadobj
