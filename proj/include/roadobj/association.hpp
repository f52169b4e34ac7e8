#pragma once

#include "roadobj/scene.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace roadobj {

struct AssociationParams {
    int min_support_points = 8;
    double merge_vertex_dist = 0.5;  // meters
    double merge_iou = 0.5;
    double split_iou = 0.3;
    int split_min_frames = 3;
    int max_iterations = 10;

    bool valid() const {
        return min_support_points > 0 && merge_vertex_dist > 0.0 && merge_iou > 0.0 &&
               merge_iou < 1.0 && split_iou > 0.0 && split_iou < 1.0 && split_min_frames > 0 &&
               max_iterations > 0;
    }
};

/// point_id -> per-frame instance membership. A keypoint pixel inside
/// exactly one mask joins that instance; inside several overlapping masks it
/// joins the one with the nearest centroid.
struct Membership {
    std::int64_t frame_id = 0;
    std::int64_t obs_id = 0;
};
using PointMemberships = std::map<std::int64_t, std::vector<Membership>>;

PointMemberships assign_points_to_instances(const Scene& scene);

/// Connected components of instances sharing at least one map point of the
/// same class. Components below min_support_points are flagged invalid.
/// track_ids are assigned in increasing order of each component's smallest
/// obs_id.
std::vector<Track> build_tracks(const Scene& scene, const PointMemberships& memberships,
                                const AssociationParams& params);

/// Callback used to refresh a track's 3D proposal between association
/// rounds; empty when no proposal can be built.
using ProposeFn = std::function<std::optional<ShapeParams>(const Track&)>;

/// Grows track support monotonically: unassigned map points falling inside a
/// track's inflated 3D box join it (nearest center wins when boxes overlap).
/// Proposals are refreshed each round. Returns the number of rounds run;
/// stops at the fixed point or after params.max_iterations rounds.
int iterate_association(const Scene& scene, std::vector<Track>& tracks,
                        const ProposeFn& propose, const AssociationParams& params);

/// One stable merge pass: same-class tracks whose proposal corners sit
/// within merge_vertex_dist on average AND whose projected outlines overlap
/// above merge_iou on average over co-visible frames are unioned
/// (transitively). Result ordering and ids are input-order independent.
std::vector<Track> merge_tracks(const std::vector<Track>& tracks,
                                const std::map<std::int64_t, ShapeParams>& proposals,
                                const Scene& scene, const AssociationParams& params);

/// Splits a track whose projected proposal covers two or more disjoint
/// same-class detections in at least split_min_frames frames. Support points
/// are reassigned by per-frame mask-membership majority vote. Children past
/// the first receive ids id_base, id_base+1, ... Returns {track} unchanged
/// when there is no split evidence.
std::vector<Track> split_track(const Scene& scene, const Track& track,
                               const ShapeParams& proposal, const PointMemberships& memberships,
                               const AssociationParams& params, std::int64_t id_base);

}  // namespace roadobj
