#pragma once

#include "roadobj/geometry.hpp"
#include "roadobj/scene.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace roadobj {

struct SolverOptions {
    double huber_delta = 1.0;       // pixels; very large values disable robustness
    int max_iterations = 100;
    double cost_rel_tol = 1e-8;
    double param_abs_tol = 1e-10;
    double initial_damping = 1e-4;

    bool valid() const {
        return huber_delta > 0.0 && max_iterations > 0 && cost_rel_tol > 0.0 &&
               param_abs_tol > 0.0 && initial_damping > 0.0;
    }
};

struct FitReport {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
    double mean_reproj_error = 0.0;  // pixels, unweighted mean block norm
    std::int64_t n_residuals = 0;
    std::int64_t dropped_observations = 0;  // behind-camera at the initial params
};

/// Huber loss and its IRLS weight d(loss)/dr / r for a block norm r.
struct HuberResult {
    double loss = 0.0;
    double weight = 1.0;
};
HuberResult huber_loss(double r, double delta);

/// One frame's observed quad corners, already in model corner order
/// (BL, TL, TR, BR; back-side views are mirrored upstream).
struct CornerObservation {
    std::int64_t frame_id = 0;
    const CameraFrame* frame = nullptr;
    std::array<Vec2, 4> corners{};
};

/// One frame's observed contour pixels of a circular sign.
struct ContourObservation {
    std::int64_t frame_id = 0;
    const CameraFrame* frame = nullptr;
    std::vector<Vec2> points;
};

/// Everything refine() needs for one track. Exactly one of corner_obs /
/// contour_obs is populated depending on the class. support_points feed the
/// cuboid depth-slab residuals.
struct RefineProblem {
    ObjectClass object_class = ObjectClass::guideboard;
    std::vector<CornerObservation> corner_obs;    // sorted by frame_id
    std::vector<ContourObservation> contour_obs;  // sorted by frame_id
    std::vector<Vec3> support_points;
};

/// Meter-to-pixel weight applied to the cuboid depth-slab residuals so they
/// share the Huber scale with reprojection residuals.
inline constexpr double kDepthSupportWeight = 100.0;

/// Contour-to-model correspondence: for each contour observation, the circle
/// parameter t assigned to each observed pixel. Computed once per solver
/// iteration so that residuals and Jacobians describe the same function.
struct ContourMatching {
    std::vector<std::vector<double>> t_values;  // aligned with contour_obs
};
ContourMatching match_contour(const CircleSignParams& params, const RefineProblem& problem);

struct ResidualEval {
    Eigen::VectorXd values;       // 2 rows per corner/contour point, 1 per slab row
    std::vector<int> block_rows;  // start row of each block
    std::vector<int> block_sizes;
    std::int64_t dropped_observations = 0;
    std::int64_t n_pixel_blocks = 0;  // blocks that are reprojection residuals
};

/// Residual vector at `params`. Row order is deterministic: corner blocks by
/// (frame_id, corner index, u then v), contour blocks by (frame_id, point
/// index), then the two cuboid depth-slab rows. Observations behind the
/// camera are dropped and counted.
ResidualEval residuals(const ShapeParams& params, const RefineProblem& problem,
                       const ContourMatching* matching = nullptr);

/// Analytic Jacobian, rows aligned with residuals(). Columns follow the
/// class parameter vector: rect [cx cy cz yaw w h], cuboid [.. d],
/// circle [cx cy cz yaw r].
Eigen::MatrixXd jacobian(const ShapeParams& params, const RefineProblem& problem,
                         const ContourMatching* matching = nullptr);

int dof_of(const ShapeParams& params);
Eigen::VectorXd pack_params(const ShapeParams& params);
ShapeParams unpack_params(const ShapeParams& like, const Eigen::VectorXd& v);

struct RefineResult {
    ShapeParams params;
    FitReport report;
};

/// Levenberg-Marquardt minimization of the Huber-robustified reprojection
/// cost. Damping grows on rejected steps and shrinks on accepted ones;
/// accepted costs never increase. Output params are canonical (yaw wrapped,
/// sizes positive).
RefineResult refine(const ShapeParams& initial, const RefineProblem& problem,
                    const SolverOptions& opts);

}  // namespace roadobj
