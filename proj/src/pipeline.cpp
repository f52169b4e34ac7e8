#include "roadobj/pipeline.hpp"

#include "roadobj/errors.hpp"
#include "roadobj/shape_project.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace roadobj {

namespace {

struct ConfigTable {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& sec, const std::string& key) const {
        const auto s = sections.find(sec);
        return s != sections.end() && s->second.count(key) > 0;
    }
    std::string raw(const std::string& sec, const std::string& key) const {
        return sections.at(sec).at(key);
    }
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

ConfigTable parse_table(std::istream& in) {
    ConfigTable table;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool in_quote = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            table.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        table.sections[section][key] = value;
    }
    return table;
}

double get_double(const ConfigTable& t, const std::string& sec, const std::string& key,
                  double fallback) {
    if (!t.has(sec, key)) return fallback;
    try {
        return std::stod(t.raw(sec, key));
    } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": not a number");
    }
}

int get_int(const ConfigTable& t, const std::string& sec, const std::string& key, int fallback) {
    if (!t.has(sec, key)) return fallback;
    try {
        return std::stoi(t.raw(sec, key));
    } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": not an integer");
    }
}

std::uint64_t get_u64(const ConfigTable& t, const std::string& sec, const std::string& key,
                      std::uint64_t fallback) {
    if (!t.has(sec, key)) return fallback;
    try {
        return std::stoull(t.raw(sec, key));
    } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": not an unsigned integer");
    }
}

std::string get_string(const ConfigTable& t, const std::string& sec, const std::string& key,
                       const std::string& fallback) {
    return t.has(sec, key) ? t.raw(sec, key) : fallback;
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"synth",
         {"n_signs", "n_lights", "n_circles", "n_cones", "trajectory_length", "n_frames",
          "sign_distance_min", "sign_distance_max", "pixel_noise_sigma", "outlier_fraction",
          "outlier_magnitude", "dropout_fraction", "occluder_fraction", "keypoints_min",
          "keypoints_max", "seed"}},
        {"association",
         {"min_support_points", "merge_vertex_dist", "merge_iou", "split_iou",
          "split_min_frames", "max_iterations"}},
        {"proposal", {"a_th", "min_views", "min_parallax", "min_contour_points"}},
        {"solver",
         {"huber_delta", "max_iterations", "cost_rel_tol", "param_abs_tol", "initial_damping"}},
        {"eval", {"iou_threshold", "center_dist_threshold", "timestamp_filter_ms"}},
        {"io", {"scene", "ground_truth", "annotations", "report"}}};
    return keys;
}

}  // namespace

PipelineConfig parse_pipeline_config(std::istream& in) {
    const ConfigTable t = parse_table(in);
    for (const auto& [sec, kv] : t.sections) {
        const auto it = known_keys().find(sec);
        if (it == known_keys().end()) throw ConfigError("config: unknown section [" + sec + "]");
        for (const auto& [key, value] : kv)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError("config [" + sec + "]: unknown key " + key);
    }

    PipelineConfig cfg;
    cfg.synth.n_signs = get_int(t, "synth", "n_signs", cfg.synth.n_signs);
    cfg.synth.n_lights = get_int(t, "synth", "n_lights", cfg.synth.n_lights);
    cfg.synth.n_circles = get_int(t, "synth", "n_circles", cfg.synth.n_circles);
    cfg.synth.n_cones = get_int(t, "synth", "n_cones", cfg.synth.n_cones);
    cfg.synth.trajectory_length =
        get_double(t, "synth", "trajectory_length", cfg.synth.trajectory_length);
    cfg.synth.n_frames = get_int(t, "synth", "n_frames", cfg.synth.n_frames);
    cfg.synth.sign_distance_min =
        get_double(t, "synth", "sign_distance_min", cfg.synth.sign_distance_min);
    cfg.synth.sign_distance_max =
        get_double(t, "synth", "sign_distance_max", cfg.synth.sign_distance_max);
    cfg.synth.pixel_noise_sigma =
        get_double(t, "synth", "pixel_noise_sigma", cfg.synth.pixel_noise_sigma);
    cfg.synth.outlier_fraction =
        get_double(t, "synth", "outlier_fraction", cfg.synth.outlier_fraction);
    cfg.synth.outlier_magnitude =
        get_double(t, "synth", "outlier_magnitude", cfg.synth.outlier_magnitude);
    cfg.synth.dropout_fraction =
        get_double(t, "synth", "dropout_fraction", cfg.synth.dropout_fraction);
    cfg.synth.occluder_fraction =
        get_double(t, "synth", "occluder_fraction", cfg.synth.occluder_fraction);
    cfg.synth.keypoints_min = get_int(t, "synth", "keypoints_min", cfg.synth.keypoints_min);
    cfg.synth.keypoints_max = get_int(t, "synth", "keypoints_max", cfg.synth.keypoints_max);
    cfg.synth.seed = get_u64(t, "synth", "seed", cfg.synth.seed);

    cfg.association.min_support_points =
        get_int(t, "association", "min_support_points", cfg.association.min_support_points);
    cfg.association.merge_vertex_dist =
        get_double(t, "association", "merge_vertex_dist", cfg.association.merge_vertex_dist);
    cfg.association.merge_iou = get_double(t, "association", "merge_iou", cfg.association.merge_iou);
    cfg.association.split_iou = get_double(t, "association", "split_iou", cfg.association.split_iou);
    cfg.association.split_min_frames =
        get_int(t, "association", "split_min_frames", cfg.association.split_min_frames);
    cfg.association.max_iterations =
        get_int(t, "association", "max_iterations", cfg.association.max_iterations);

    cfg.proposal.a_th = get_double(t, "proposal", "a_th", cfg.proposal.a_th);
    cfg.proposal.min_views = get_int(t, "proposal", "min_views", cfg.proposal.min_views);
    cfg.proposal.min_parallax =
        get_double(t, "proposal", "min_parallax", cfg.proposal.min_parallax);
    cfg.proposal.min_contour_points =
        get_int(t, "proposal", "min_contour_points", cfg.proposal.min_contour_points);

    cfg.solver.huber_delta = get_double(t, "solver", "huber_delta", cfg.solver.huber_delta);
    cfg.solver.max_iterations = get_int(t, "solver", "max_iterations", cfg.solver.max_iterations);
    cfg.solver.cost_rel_tol = get_double(t, "solver", "cost_rel_tol", cfg.solver.cost_rel_tol);
    cfg.solver.param_abs_tol = get_double(t, "solver", "param_abs_tol", cfg.solver.param_abs_tol);
    cfg.solver.initial_damping =
        get_double(t, "solver", "initial_damping", cfg.solver.initial_damping);

    cfg.eval.iou_threshold = get_double(t, "eval", "iou_threshold", cfg.eval.iou_threshold);
    cfg.eval.center_dist_threshold =
        get_double(t, "eval", "center_dist_threshold", cfg.eval.center_dist_threshold);
    if (t.has("eval", "timestamp_filter_ms"))
        cfg.eval.timestamp_filter_ms = get_double(t, "eval", "timestamp_filter_ms", 10.0);

    cfg.scene_path = get_string(t, "io", "scene", cfg.scene_path);
    cfg.gt_path = get_string(t, "io", "ground_truth", cfg.gt_path);
    cfg.annotations_path = get_string(t, "io", "annotations", cfg.annotations_path);
    cfg.report_path = get_string(t, "io", "report", cfg.report_path);

    cfg.validate();
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_pipeline_config(in);
}

void PipelineConfig::validate() const {
    synth.validate();
    if (!association.valid()) throw ConfigError("config [association]: invalid values");
    if (!proposal.valid()) throw ConfigError("config [proposal]: invalid values");
    if (!solver.valid()) throw ConfigError("config [solver]: invalid values");
    if (!eval.valid()) throw ConfigError("config [eval]: invalid values");
    std::vector<std::string> paths;
    for (const std::string* p : {&scene_path, &gt_path, &annotations_path, &report_path})
        if (!p->empty()) paths.push_back(*p);
    std::sort(paths.begin(), paths.end());
    if (std::adjacent_find(paths.begin(), paths.end()) != paths.end())
        throw ConfigError("config [io]: input/output paths must be distinct");
}

std::vector<StaticAnnotation> ground_truth_annotations(const GroundTruth& gt) {
    std::vector<StaticAnnotation> out;
    out.reserve(gt.objects.size());
    for (const GroundTruthObject& obj : gt.objects) {
        StaticAnnotation a;
        a.annotation_id = obj.track_id;
        a.track_id = obj.track_id;
        a.object_class = obj.object_class;
        a.params = obj.params;
        a.mean_reproj_error = 0.0;
        a.n_observations_used = static_cast<std::int64_t>(obj.obs_ids.size());
        out.push_back(std::move(a));
    }
    std::sort(out.begin(), out.end(), [](const StaticAnnotation& a, const StaticAnnotation& b) {
        return a.annotation_id < b.annotation_id;
    });
    return out;
}

namespace {

/// Per-track working state shared by the proposal/refine stages.
struct TrackWork {
    Track track;
    std::vector<VertexObservation> vertex_obs;  // gated + extracted
    std::vector<Vec3> support_points;
    std::optional<ShapeParams> proposal;
    std::int64_t gated = 0;
};

std::vector<Vec3> collect_support(const Scene& scene, const Track& track) {
    std::vector<Vec3> pts;
    pts.reserve(track.support_point_ids.size());
    for (const std::int64_t id : track.support_point_ids) {
        const SparseMapPoint* p = scene.find_point(id);
        if (p != nullptr) pts.push_back(p->position);
    }
    return pts;
}

/// Extracts per-observation vertices (or contours) with the occlusion gate
/// applied; failures mark the observation occluded rather than aborting.
std::vector<VertexObservation> extract_track_vertices(const Scene& scene, const Track& track,
                                                      const ProposalParams& params,
                                                      std::int64_t* gated) {
    std::vector<VertexObservation> out;
    for (const std::int64_t obs_id : track.obs_ids) {
        const InstanceObservation* obs = scene.find_observation(obs_id);
        if (obs == nullptr) continue;
        VertexObservation v;
        if (is_rectangular_family(track.object_class)) {
            try {
                v = extract_mask_vertices(*obs);
            } catch (const DegenerateInput&) {
                continue;
            }
        } else {
            v.obs_id = obs->obs_id;
            v.frame_id = obs->frame_id;
            v.contour = obs->mask;
        }
        v.occluded = !occlusion_gate(*obs, params);
        if (v.occluded && gated != nullptr) ++(*gated);
        out.push_back(std::move(v));
    }
    std::sort(out.begin(), out.end(), [](const VertexObservation& a, const VertexObservation& b) {
        return a.frame_id < b.frame_id;
    });
    return out;
}

std::optional<ShapeParams> propose_for(const Scene& scene, const Track& track,
                                       const std::vector<VertexObservation>& vertex_obs,
                                       const std::vector<Vec3>& support,
                                       const ProposalParams& params) {
    try {
        switch (track.object_class) {
            case ObjectClass::guideboard:
                return ShapeParams(init_rect_proposal(vertex_obs, scene, support, params));
            case ObjectClass::circular_sign:
                return ShapeParams(init_circle_proposal(vertex_obs, scene, params));
            case ObjectClass::traffic_light:
            case ObjectClass::traffic_cone:
                return ShapeParams(init_cuboid_proposal(vertex_obs, scene, support, params));
        }
    } catch (const Error&) {
        return std::nullopt;
    }
    return std::nullopt;
}

TrackWork make_work(const Scene& scene, Track track, const PipelineConfig& cfg) {
    TrackWork w;
    w.track = std::move(track);
    w.vertex_obs = extract_track_vertices(scene, w.track, cfg.proposal, &w.gated);
    w.support_points = collect_support(scene, w.track);
    w.proposal = propose_for(scene, w.track, w.vertex_obs, w.support_points, cfg.proposal);
    return w;
}

RefineProblem build_problem(const Scene& scene, const TrackWork& w) {
    RefineProblem problem;
    problem.object_class = w.track.object_class;
    problem.support_points = w.support_points;

    if (w.track.object_class == ObjectClass::circular_sign) {
        for (const VertexObservation& v : w.vertex_obs) {
            if (v.occluded) continue;
            const CameraFrame* frame = scene.find_frame(v.frame_id);
            if (frame == nullptr) continue;
            ContourObservation c;
            c.frame_id = v.frame_id;
            c.frame = frame;
            c.points = v.contour;
            problem.contour_obs.push_back(std::move(c));
        }
        return problem;
    }

    // Mirror back-side views so observed labels match model corner order.
    const Vec3 cam_mean = [&] {
        Vec3 sum = Vec3::Zero();
        int n = 0;
        for (const VertexObservation& v : w.vertex_obs) {
            const CameraFrame* f = scene.find_frame(v.frame_id);
            if (f != nullptr) {
                sum += f->world_from_camera.translation;
                ++n;
            }
        }
        return n > 0 ? Vec3(sum / n) : sum;
    }();
    Vec3 center = cam_mean, normal = Vec3::UnitY();
    if (w.proposal) {
        center = params_center(*w.proposal);
        normal = plane_normal(params_yaw(*w.proposal));
    }
    for (const VertexObservation& v : w.vertex_obs) {
        if (v.occluded) continue;
        const CameraFrame* frame = scene.find_frame(v.frame_id);
        if (frame == nullptr) continue;
        CornerObservation c;
        c.frame_id = v.frame_id;
        c.frame = frame;
        c.corners = v.corners;
        if (normal.dot(frame->world_from_camera.translation - center) < 0.0) {
            std::swap(c.corners[0], c.corners[3]);
            std::swap(c.corners[1], c.corners[2]);
        }
        problem.corner_obs.push_back(std::move(c));
    }
    return problem;
}

}  // namespace

AnnotateResult annotate_scene(const Scene& scene, const PipelineConfig& cfg, int n_threads) {
    AnnotateResult result;

    const PointMemberships memberships = assign_points_to_instances(scene);
    std::vector<Track> tracks = build_tracks(scene, memberships, cfg.association);
    result.diagnostics.n_tracks_initial = static_cast<std::int64_t>(tracks.size());
    result.diagnostics.n_tracks_invalid = static_cast<std::int64_t>(
        std::count_if(tracks.begin(), tracks.end(), [](const Track& t) { return !t.valid; }));
    std::erase_if(tracks, [](const Track& t) { return !t.valid; });

    // Iterative association: grow support inside the current proposal boxes.
    const ProposeFn propose = [&](const Track& t) -> std::optional<ShapeParams> {
        std::int64_t gated = 0;
        const auto vertex_obs = extract_track_vertices(scene, t, cfg.proposal, &gated);
        return propose_for(scene, t, vertex_obs, collect_support(scene, t), cfg.proposal);
    };
    result.diagnostics.association_rounds =
        iterate_association(scene, tracks, propose, cfg.association);

    std::vector<TrackWork> work;
    for (Track& t : tracks) work.push_back(make_work(scene, std::move(t), cfg));

    // Merge/split rounds until the track set is a fixed point.
    constexpr int kMaxMergeSplitRounds = 3;
    for (int round = 0; round < kMaxMergeSplitRounds; ++round) {
        bool changed = false;

        std::map<std::int64_t, ShapeParams> proposals;
        std::vector<Track> current;
        for (const TrackWork& w : work) {
            current.push_back(w.track);
            if (w.proposal) proposals[w.track.track_id] = *w.proposal;
        }
        std::vector<Track> merged = merge_tracks(current, proposals, scene, cfg.association);
        if (merged.size() != current.size()) changed = true;

        std::int64_t next_id = 0;
        for (const Track& t : merged) next_id = std::max(next_id, t.track_id + 1);

        std::vector<Track> next;
        for (const Track& t : merged) {
            const auto it = proposals.find(t.track_id);
            if (it == proposals.end()) {
                next.push_back(t);
                continue;
            }
            std::vector<Track> children =
                split_track(scene, t, it->second, memberships, cfg.association, next_id);
            if (children.size() > 1) {
                changed = true;
                next_id += static_cast<std::int64_t>(children.size()) - 1;
            }
            for (Track& c : children)
                if (c.valid) next.push_back(std::move(c));
        }

        if (changed) {
            ++result.diagnostics.merge_split_rounds;
            work.clear();
            for (Track& t : next) work.push_back(make_work(scene, std::move(t), cfg));
        } else {
            break;
        }
    }

    std::erase_if(work, [](const TrackWork& w) { return !w.proposal.has_value(); });
    std::sort(work.begin(), work.end(), [](const TrackWork& a, const TrackWork& b) {
        return a.track.track_id < b.track.track_id;
    });
    result.diagnostics.n_tracks_final = static_cast<std::int64_t>(work.size());
    for (const TrackWork& w : work) result.diagnostics.n_observations_gated += w.gated;

    // Per-track robust refinement; tracks are independent, so worker count
    // cannot change any output value.
    result.annotations.resize(work.size());
    result.reports.resize(work.size());
    result.used_obs_ids.resize(work.size());
    std::vector<char> keep(work.size(), 1);

    auto refine_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const TrackWork& w = work[i];
            const RefineProblem problem = build_problem(scene, w);
            try {
                const RefineResult res = refine(*w.proposal, problem, cfg.solver);
                StaticAnnotation a;
                a.annotation_id = static_cast<std::int64_t>(i);
                a.track_id = w.track.track_id;
                a.object_class = w.track.object_class;
                a.params = res.params;
                a.mean_reproj_error = res.report.mean_reproj_error;
                const size_t used = w.track.object_class == ObjectClass::circular_sign
                                        ? problem.contour_obs.size()
                                        : problem.corner_obs.size();
                a.n_observations_used = static_cast<std::int64_t>(used);
                result.annotations[i] = std::move(a);
                result.reports[i] = res.report;
                for (const VertexObservation& v : w.vertex_obs)
                    if (!v.occluded) result.used_obs_ids[i].push_back(v.obs_id);
            } catch (const Error&) {
                keep[i] = 0;
            }
        }
    };

    const int threads = std::max(1, n_threads);
    if (threads == 1 || work.size() <= 1) {
        refine_range(0, work.size());
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (work.size() + static_cast<size_t>(threads) - 1) /
                             static_cast<size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            const size_t begin = static_cast<size_t>(t) * chunk;
            const size_t end = std::min(work.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(refine_range, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }

    // Compact dropped tracks and reassign sequential annotation ids.
    AnnotateResult final_result;
    final_result.diagnostics = result.diagnostics;
    for (size_t i = 0; i < work.size(); ++i) {
        if (!keep[i]) {
            --final_result.diagnostics.n_tracks_final;
            continue;
        }
        StaticAnnotation a = std::move(result.annotations[i]);
        a.annotation_id = static_cast<std::int64_t>(final_result.annotations.size());
        final_result.annotations.push_back(std::move(a));
        final_result.reports.push_back(result.reports[i]);
        final_result.used_obs_ids.push_back(std::move(result.used_obs_ids[i]));
        final_result.diagnostics.n_observations_dropped +=
            result.reports[i].dropped_observations;
    }
    return final_result;
}

}  // namespace roadobj
