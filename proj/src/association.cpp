#include "roadobj/association.hpp"

#include "roadobj/shape_project.hpp"

#include <algorithm>
#include <numeric>

namespace roadobj {

namespace {

/// True when p lies inside the shape's axis frame box inflated by margin
/// (flat shapes get a thin slab along their normal).
bool inflated_box_contains(const ShapeParams& params, const Vec3& p, double margin) {
    constexpr double kSlabHalf = 0.15;
    const Vec3 c = params_center(params);
    const double yaw = params_yaw(params);
    const Vec3 d = p - c;
    const double along_u = d.dot(width_axis(yaw));
    const double along_n = d.dot(plane_normal(yaw));
    const double along_up = d.z();
    double hw = 0.0, hh = 0.0, hn = kSlabHalf;
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        hw = 0.5 * r->width;
        hh = 0.5 * r->height;
    } else if (const auto* q = std::get_if<CuboidParams>(&params)) {
        hw = 0.5 * q->width;
        hh = 0.5 * q->height;
        hn = 0.5 * q->depth;
    } else {
        const auto& s = std::get<CircleSignParams>(params);
        hw = s.radius;
        hh = s.radius;
    }
    return std::abs(along_u) <= hw + margin && std::abs(along_up) <= hh + margin &&
           std::abs(along_n) <= hn + margin;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] =
                parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

PointMemberships assign_points_to_instances(const Scene& scene) {
    const auto by_frame = scene.observations_by_frame();
    std::map<std::int64_t, std::vector<std::pair<const InstanceObservation*, Vec2>>> centroids;
    for (const auto& [frame_id, list] : by_frame) {
        auto& entry = centroids[frame_id];
        entry.reserve(list.size());
        for (const InstanceObservation* obs : list)
            entry.emplace_back(obs, polygon_centroid(obs->mask));
    }

    PointMemberships memberships;
    for (const SparseMapPoint& point : scene.map_points) {
        std::vector<Membership> entries;
        for (const PixelObservation& px : point.observations) {
            const auto it = centroids.find(px.frame_id);
            if (it == centroids.end()) continue;
            const InstanceObservation* best = nullptr;
            double best_centroid_dist = 0.0;
            int hits = 0;
            for (const auto& [obs, centroid] : it->second) {
                if (!point_in_polygon(px.pixel, obs->mask)) continue;
                ++hits;
                const double d = (centroid - px.pixel).squaredNorm();
                if (best == nullptr || d < best_centroid_dist) {
                    best = obs;
                    best_centroid_dist = d;
                }
            }
            if (hits >= 1 && best != nullptr) entries.push_back({px.frame_id, best->obs_id});
        }
        if (!entries.empty()) memberships[point.point_id] = std::move(entries);
    }
    return memberships;
}

std::vector<Track> build_tracks(const Scene& scene, const PointMemberships& memberships,
                                const AssociationParams& params) {
    // Index observations that appear in any membership.
    std::vector<std::int64_t> obs_ids;
    for (const auto& [point_id, entries] : memberships)
        for (const Membership& m : entries) obs_ids.push_back(m.obs_id);
    std::sort(obs_ids.begin(), obs_ids.end());
    obs_ids.erase(std::unique(obs_ids.begin(), obs_ids.end()), obs_ids.end());
    std::map<std::int64_t, int> obs_index;
    for (size_t i = 0; i < obs_ids.size(); ++i) obs_index[obs_ids[i]] = static_cast<int>(i);

    UnionFind uf(obs_ids.size());
    for (const auto& [point_id, entries] : memberships) {
        for (size_t a = 0; a < entries.size(); ++a) {
            for (size_t b = a + 1; b < entries.size(); ++b) {
                const InstanceObservation* oa = scene.find_observation(entries[a].obs_id);
                const InstanceObservation* ob = scene.find_observation(entries[b].obs_id);
                if (oa == nullptr || ob == nullptr) continue;
                if (oa->object_class != ob->object_class) continue;  // class gate
                uf.unite(obs_index.at(oa->obs_id), obs_index.at(ob->obs_id));
            }
        }
    }

    // Group observations by component root.
    std::map<int, std::vector<std::int64_t>> components;
    for (const std::int64_t id : obs_ids) components[uf.find(obs_index.at(id))].push_back(id);

    // Each point supports exactly one component: the one holding most of its
    // memberships (ties -> component with the smallest obs_id).
    std::map<int, std::set<std::int64_t>> support;
    for (const auto& [point_id, entries] : memberships) {
        std::map<int, int> votes;
        for (const Membership& m : entries) ++votes[uf.find(obs_index.at(m.obs_id))];
        int best_root = -1, best_votes = 0;
        for (const auto& [root, v] : votes) {
            if (v > best_votes) {
                best_votes = v;
                best_root = root;
            }
        }
        if (best_root >= 0) support[best_root].insert(point_id);
    }

    // Components ordered by smallest obs_id define track ids.
    std::vector<std::pair<std::int64_t, int>> order;
    for (const auto& [root, ids] : components) order.emplace_back(ids.front(), root);
    std::sort(order.begin(), order.end());

    std::vector<Track> tracks;
    for (size_t i = 0; i < order.size(); ++i) {
        const int root = order[i].second;
        Track t;
        t.track_id = static_cast<std::int64_t>(i);
        t.obs_ids = components.at(root);
        const InstanceObservation* first = scene.find_observation(t.obs_ids.front());
        t.object_class = first != nullptr ? first->object_class : ObjectClass::guideboard;
        if (const auto it = support.find(root); it != support.end())
            t.support_point_ids = it->second;
        t.valid = static_cast<int>(t.support_point_ids.size()) >= params.min_support_points;

        // A track may hold at most one observation per frame; keep the one
        // with the larger membership count (ties -> smaller obs_id).
        std::map<std::int64_t, std::int64_t> per_frame;
        std::map<std::int64_t, int> member_count;
        for (const auto& [point_id, entries] : memberships)
            for (const Membership& m : entries) ++member_count[m.obs_id];
        for (const std::int64_t id : t.obs_ids) {
            const InstanceObservation* obs = scene.find_observation(id);
            if (obs == nullptr) continue;
            const auto it = per_frame.find(obs->frame_id);
            if (it == per_frame.end()) {
                per_frame[obs->frame_id] = id;
                continue;
            }
            if (member_count[id] > member_count[it->second]) it->second = id;
        }
        if (per_frame.size() != t.obs_ids.size()) {
            t.obs_ids.clear();
            for (const auto& [frame_id, id] : per_frame) t.obs_ids.push_back(id);
            std::sort(t.obs_ids.begin(), t.obs_ids.end());
        }
        tracks.push_back(std::move(t));
    }
    return tracks;
}

int iterate_association(const Scene& scene, std::vector<Track>& tracks,
                        const ProposeFn& propose, const AssociationParams& params) {
    constexpr double kBoxMargin = 0.25;  // meters

    std::set<std::int64_t> assigned;
    for (const Track& t : tracks) assigned.insert(t.support_point_ids.begin(),
                                                  t.support_point_ids.end());

    int rounds = 0;
    while (rounds < params.max_iterations) {
        ++rounds;

        std::map<std::int64_t, std::optional<ShapeParams>> proposals;
        for (const Track& t : tracks)
            proposals[t.track_id] = t.valid ? propose(t) : std::nullopt;

        bool changed = false;
        for (const SparseMapPoint& point : scene.map_points) {
            if (assigned.count(point.point_id) > 0) continue;
            Track* best = nullptr;
            double best_dist = 0.0;
            for (Track& t : tracks) {
                const auto& prop = proposals[t.track_id];
                if (!prop || !inflated_box_contains(*prop, point.position, kBoxMargin)) continue;
                const double d = (params_center(*prop) - point.position).squaredNorm();
                if (best == nullptr || d < best_dist) {
                    best = &t;
                    best_dist = d;
                }
            }
            if (best != nullptr) {
                best->support_point_ids.insert(point.point_id);
                assigned.insert(point.point_id);
                changed = true;
            }
        }
        if (!changed) break;
    }
    return rounds;
}

std::vector<Track> merge_tracks(const std::vector<Track>& tracks,
                                const std::map<std::int64_t, ShapeParams>& proposals,
                                const Scene& scene, const AssociationParams& params) {
    std::vector<const Track*> order;
    for (const Track& t : tracks) order.push_back(&t);
    std::sort(order.begin(), order.end(),
              [](const Track* a, const Track* b) { return a->track_id < b->track_id; });

    UnionFind uf(order.size());
    for (size_t i = 0; i < order.size(); ++i) {
        for (size_t j = i + 1; j < order.size(); ++j) {
            const Track& a = *order[i];
            const Track& b = *order[j];
            if (a.object_class != b.object_class) continue;
            const auto pa = proposals.find(a.track_id);
            const auto pb = proposals.find(b.track_id);
            if (pa == proposals.end() || pb == proposals.end()) continue;

            const std::vector<Vec3> ca = shape_reference_corners(pa->second);
            const std::vector<Vec3> cb = shape_reference_corners(pb->second);
            if (ca.size() != cb.size()) continue;
            double dist = 0.0;
            for (size_t k = 0; k < ca.size(); ++k) dist += (ca[k] - cb[k]).norm();
            dist /= static_cast<double>(ca.size());
            if (dist >= params.merge_vertex_dist) continue;

            double iou_sum = 0.0;
            int co_visible = 0;
            for (const CameraFrame& frame : scene.frames) {
                const auto poly_a = project_shape_polygon(pa->second, frame);
                const auto poly_b = project_shape_polygon(pb->second, frame);
                if (!poly_a || !poly_b) continue;
                if (polygon_area(*poly_a) < 1e-9 || polygon_area(*poly_b) < 1e-9) continue;
                if (!shape_visible_in_frame(pa->second, frame) ||
                    !shape_visible_in_frame(pb->second, frame))
                    continue;
                iou_sum += convex_polygon_iou(*poly_a, *poly_b);
                ++co_visible;
            }
            if (co_visible == 0) continue;
            if (iou_sum / co_visible > params.merge_iou) uf.unite(static_cast<int>(i),
                                                                  static_cast<int>(j));
        }
    }

    std::map<int, std::vector<const Track*>> groups;
    for (size_t i = 0; i < order.size(); ++i)
        groups[uf.find(static_cast<int>(i))].push_back(order[i]);

    std::vector<Track> out;
    for (const auto& [root, members] : groups) {
        Track merged = *members.front();
        for (size_t k = 1; k < members.size(); ++k) {
            const Track& t = *members[k];
            merged.track_id = std::min(merged.track_id, t.track_id);
            merged.obs_ids.insert(merged.obs_ids.end(), t.obs_ids.begin(), t.obs_ids.end());
            merged.support_point_ids.insert(t.support_point_ids.begin(),
                                            t.support_point_ids.end());
            merged.valid = merged.valid || t.valid;
        }
        std::sort(merged.obs_ids.begin(), merged.obs_ids.end());
        merged.obs_ids.erase(std::unique(merged.obs_ids.begin(), merged.obs_ids.end()),
                             merged.obs_ids.end());

        // Keep at most one observation per frame (largest mask area wins,
        // ties -> smaller obs_id); only genuinely wrong merges ever collide.
        std::map<std::int64_t, std::int64_t> per_frame;
        for (const std::int64_t id : merged.obs_ids) {
            const InstanceObservation* obs = scene.find_observation(id);
            if (obs == nullptr) continue;
            const auto it = per_frame.find(obs->frame_id);
            if (it == per_frame.end()) {
                per_frame[obs->frame_id] = id;
                continue;
            }
            const InstanceObservation* keep = scene.find_observation(it->second);
            if (keep != nullptr && polygon_area(obs->mask) > polygon_area(keep->mask))
                it->second = id;
        }
        if (per_frame.size() != merged.obs_ids.size()) {
            merged.obs_ids.clear();
            for (const auto& [frame_id, id] : per_frame) merged.obs_ids.push_back(id);
            std::sort(merged.obs_ids.begin(), merged.obs_ids.end());
        }
        out.push_back(std::move(merged));
    }
    std::sort(out.begin(), out.end(),
              [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
    return out;
}

std::vector<Track> split_track(const Scene& scene, const Track& track,
                               const ShapeParams& proposal, const PointMemberships& memberships,
                               const AssociationParams& params, std::int64_t id_base) {
    const auto by_frame = scene.observations_by_frame();

    // Evidence: frames where the projected proposal covers >= 2 disjoint
    // same-class detections.
    std::set<std::int64_t> track_obs(track.obs_ids.begin(), track.obs_ids.end());
    std::map<std::int64_t, std::vector<const InstanceObservation*>> evidence;
    std::set<std::int64_t> frames_of_track;
    for (const std::int64_t id : track.obs_ids) {
        const InstanceObservation* obs = scene.find_observation(id);
        if (obs != nullptr) frames_of_track.insert(obs->frame_id);
    }
    for (const std::int64_t frame_id : frames_of_track) {
        const CameraFrame* frame = scene.find_frame(frame_id);
        if (frame == nullptr) continue;
        const auto poly = project_shape_polygon(proposal, *frame);
        if (!poly || polygon_area(*poly) < 1e-9) continue;
        std::vector<const InstanceObservation*> covered;
        const auto it = by_frame.find(frame_id);
        if (it == by_frame.end()) continue;
        for (const InstanceObservation* obs : it->second) {
            if (obs->object_class != track.object_class) continue;
            const Polygon2D det{{obs->det_box.min.x(), obs->det_box.min.y()},
                                {obs->det_box.max.x(), obs->det_box.min.y()},
                                {obs->det_box.max.x(), obs->det_box.max.y()},
                                {obs->det_box.min.x(), obs->det_box.max.y()}};
            const double det_area = polygon_area(det);
            if (det_area < 1e-9) continue;
            const double coverage = polygon_area(convex_intersection(det, *poly)) / det_area;
            if (coverage > params.split_iou) covered.push_back(obs);
        }
        // Disjointness: drop overlapping detection pairs (keep the first).
        std::vector<const InstanceObservation*> disjoint;
        for (const InstanceObservation* obs : covered) {
            const bool overlaps = std::any_of(
                disjoint.begin(), disjoint.end(), [&](const InstanceObservation* other) {
                    return obs->det_box.min.x() < other->det_box.max.x() &&
                           obs->det_box.max.x() > other->det_box.min.x() &&
                           obs->det_box.min.y() < other->det_box.max.y() &&
                           obs->det_box.max.y() > other->det_box.min.y();
                });
            if (!overlaps) disjoint.push_back(obs);
        }
        if (disjoint.size() >= 2) evidence[frame_id] = std::move(disjoint);
    }

    if (static_cast<int>(evidence.size()) < params.split_min_frames) return {track};

    // Children = connected components of evidence observations linked by
    // shared supporting points.
    std::vector<std::int64_t> ev_obs;
    for (const auto& [frame_id, list] : evidence)
        for (const InstanceObservation* obs : list) ev_obs.push_back(obs->obs_id);
    std::sort(ev_obs.begin(), ev_obs.end());
    ev_obs.erase(std::unique(ev_obs.begin(), ev_obs.end()), ev_obs.end());
    std::map<std::int64_t, int> ev_index;
    for (size_t i = 0; i < ev_obs.size(); ++i) ev_index[ev_obs[i]] = static_cast<int>(i);

    UnionFind uf(ev_obs.size());
    std::map<std::int64_t, std::vector<int>> point_votes;  // point -> evidence indices
    for (const std::int64_t point_id : track.support_point_ids) {
        const auto it = memberships.find(point_id);
        if (it == memberships.end()) continue;
        std::vector<int> touched;
        for (const Membership& m : it->second) {
            const auto jt = ev_index.find(m.obs_id);
            if (jt != ev_index.end()) touched.push_back(jt->second);
        }
        for (size_t a = 1; a < touched.size(); ++a) uf.unite(touched[0], touched[a]);
        if (!touched.empty()) point_votes[point_id] = std::move(touched);
    }

    std::map<int, std::vector<std::int64_t>> components;
    for (const std::int64_t id : ev_obs) components[uf.find(ev_index.at(id))].push_back(id);
    if (components.size() < 2) return {track};

    // Deterministic child order by smallest obs_id.
    std::vector<std::pair<std::int64_t, int>> child_order;
    for (const auto& [root, ids] : components) child_order.emplace_back(ids.front(), root);
    std::sort(child_order.begin(), child_order.end());
    std::map<int, int> root_to_child;
    for (size_t i = 0; i < child_order.size(); ++i)
        root_to_child[child_order[i].second] = static_cast<int>(i);

    std::vector<Track> children(child_order.size());
    for (size_t i = 0; i < children.size(); ++i) {
        children[i].track_id = i == 0 ? track.track_id
                                      : id_base + static_cast<std::int64_t>(i) - 1;
        children[i].object_class = track.object_class;
    }
    for (const auto& [root, ids] : components) {
        Track& child = children[static_cast<size_t>(root_to_child.at(root))];
        child.obs_ids.insert(child.obs_ids.end(), ids.begin(), ids.end());
    }

    // Support points follow the majority of their evidence memberships;
    // points with no evidence go to the first child.
    for (const std::int64_t point_id : track.support_point_ids) {
        const auto it = point_votes.find(point_id);
        if (it == point_votes.end()) {
            children[0].support_point_ids.insert(point_id);
            continue;
        }
        std::map<int, int> votes;
        for (const int idx : it->second)
            ++votes[root_to_child.at(uf.find(idx))];
        int best_child = 0, best = 0;
        for (const auto& [child, v] : votes) {
            if (v > best) {
                best = v;
                best_child = child;
            }
        }
        children[static_cast<size_t>(best_child)].support_point_ids.insert(point_id);
    }

    // Remaining (non-evidence) track observations join the child sharing the
    // most support-point memberships.
    for (const std::int64_t id : track.obs_ids) {
        if (ev_index.count(id) > 0) continue;
        std::vector<int> score(children.size(), 0);
        for (size_t c = 0; c < children.size(); ++c) {
            for (const std::int64_t point_id : children[c].support_point_ids) {
                const auto it = memberships.find(point_id);
                if (it == memberships.end()) continue;
                for (const Membership& m : it->second)
                    if (m.obs_id == id) ++score[c];
            }
        }
        const auto best = std::max_element(score.begin(), score.end());
        children[static_cast<size_t>(std::distance(score.begin(), best))].obs_ids.push_back(id);
    }

    for (Track& child : children) {
        std::sort(child.obs_ids.begin(), child.obs_ids.end());
        child.obs_ids.erase(std::unique(child.obs_ids.begin(), child.obs_ids.end()),
                            child.obs_ids.end());
        child.valid =
            static_cast<int>(child.support_point_ids.size()) >= params.min_support_points;
    }
    return children;
}

}  // namespace roadobj
