#pragma once

#include "roadobj/scene.hpp"

#include <cstdint>

namespace roadobj {

/// Synthetic scene generator settings. Everything is derived from `seed`
/// through one sequential SplitMix64 stream, so equal configs give
/// byte-identical scenes.
struct SynthConfig {
    int n_signs = 10;
    int n_lights = 3;
    int n_circles = 3;
    int n_cones = 2;
    double trajectory_length = 120.0;  // meters
    int n_frames = 60;
    double sign_distance_min = 2.5;  // lateral offset range, meters
    double sign_distance_max = 7.0;
    double pixel_noise_sigma = 0.0;
    double outlier_fraction = 0.0;   // in [0, 1)
    double outlier_magnitude = 20.0;  // pixels
    double dropout_fraction = 0.0;   // in [0, 1)
    double occluder_fraction = 0.0;  // in [0, 1)
    int keypoints_min = 12;
    int keypoints_max = 24;
    std::uint64_t seed = 42;

    void validate() const;  // throws ConfigError
};

/// Deterministic noiseless scene: a straight-plus-curved camera trajectory,
/// upright objects facing it, surface keypoints as map points, and exact
/// projected contours as masks (det_box = mask AABB).
std::pair<Scene, GroundTruth> generate_scene(const SynthConfig& cfg);

/// Applies, in order per observation: dropout, an occluding half-plane clip
/// (marking the ground-truth occlusion flag), Gaussian vertex noise and
/// outlier vertex replacement; then Gaussian noise on keypoint observations.
/// det_box always keeps the unoccluded shape's AABB.
Scene corrupt(const Scene& scene, GroundTruth& gt, const SynthConfig& cfg);

}  // namespace roadobj
