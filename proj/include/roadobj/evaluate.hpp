#pragma once

#include "roadobj/scene.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace roadobj {

struct EvalConfig {
    double iou_threshold = 0.5;
    double center_dist_threshold = 1.0;  // meters
    std::optional<double> timestamp_filter_ms;  // drop frames paired worse than this

    bool valid() const {
        return iou_threshold > 0.0 && iou_threshold < 1.0 && center_dist_threshold > 0.0;
    }
};

struct EvalResult {
    double precision = 0.0;  // n_matched / n_pred, 0 when n_pred == 0
    double recall = 0.0;     // n_matched / n_ref, 0 when n_ref == 0
    double mean_error = 0.0;  // pixels (2D) or meters (3D) over matched pairs
    std::int64_t n_matched = 0;
    std::int64_t n_pred = 0;
    std::int64_t n_ref = 0;
};

/// Disallowed pairs carry this cost; real costs must stay well below it.
inline constexpr double kAssignmentSentinel = 1e6;

/// Minimum-total-cost one-to-one assignment (Kuhn-Munkres with potentials).
/// Returns min(rows, cols) pairs of (row, col).
std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost);

struct FrameEvalBreakdown {
    std::int64_t frame_id = 0;
    std::int64_t n_matched = 0;
    std::int64_t n_pred = 0;
    std::int64_t n_ref = 0;
    double error_sum = 0.0;
};

/// Per frame: project both annotation sets to convex outlines, match with
/// the Hungarian algorithm on 1 - IoU, count pairs with IoU >= threshold
/// (class-gated), and accumulate the mean corner-to-corner pixel distance.
EvalResult eval_2d(const std::vector<StaticAnnotation>& pred,
                   const std::vector<StaticAnnotation>& ref, const Scene& scene,
                   const EvalConfig& cfg,
                   std::vector<FrameEvalBreakdown>* breakdown = nullptr);

/// Hungarian matching on Euclidean center distance, matches within
/// center_dist_threshold (class-gated); mean matched distance is E_3D.
EvalResult eval_3d(const std::vector<StaticAnnotation>& pred,
                   const std::vector<StaticAnnotation>& ref, const EvalConfig& cfg);

}  // namespace roadobj
