#include "roadobj/evaluate.hpp"

#include "roadobj/errors.hpp"
#include "roadobj/shape_project.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roadobj {

std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    if (rows == 0 || cols == 0) return {};
    const int n = std::max(rows, cols);  // pad to square with zeros

    auto at = [&](int i, int j) -> double {
        return (i < rows && j < cols) ? cost(i, j) : 0.0;
    };

    // Kuhn-Munkres with row/column potentials, 1-indexed internally.
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = match[static_cast<size_t>(j0)];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = at(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                                   v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::pair<int, int>> out;
    for (int j = 1; j <= n; ++j) {
        const int i = match[static_cast<size_t>(j)];
        if (i >= 1 && i <= rows && j <= cols) out.emplace_back(i - 1, j - 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct ProjectedShape {
    const StaticAnnotation* annotation;
    Polygon2D outline;  // convex outline polygon; also the E_2D corner list
};

std::vector<ProjectedShape> project_visible(const std::vector<StaticAnnotation>& annotations,
                                            const CameraFrame& frame) {
    std::vector<ProjectedShape> out;
    for (const StaticAnnotation& a : annotations) {
        if (!shape_visible_in_frame(a.params, frame)) continue;
        // Corner correspondence needs the raw (un-rewound) projection order.
        const std::vector<Vec3> outline3d = shape_outline_points(a.params);
        Polygon2D poly;
        poly.reserve(outline3d.size());
        bool ok = true;
        for (const Vec3& p : outline3d) {
            const auto px = project(frame.intrinsics, frame.world_from_camera, p);
            if (!px) {
                ok = false;
                break;
            }
            poly.push_back(*px);
        }
        if (!ok) continue;
        out.push_back({&a, std::move(poly)});
    }
    return out;
}

double corner_distance(const Polygon2D& a, const Polygon2D& b) {
    if (a.size() != b.size() || a.empty()) return kAssignmentSentinel;
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
    return sum / static_cast<double>(a.size());
}

EvalResult finalize(std::int64_t matched, std::int64_t pred, std::int64_t ref,
                    double error_sum) {
    EvalResult r;
    r.n_matched = matched;
    r.n_pred = pred;
    r.n_ref = ref;
    r.precision = pred > 0 ? static_cast<double>(matched) / static_cast<double>(pred) : 0.0;
    r.recall = ref > 0 ? static_cast<double>(matched) / static_cast<double>(ref) : 0.0;
    r.mean_error = matched > 0 ? error_sum / static_cast<double>(matched) : 0.0;
    return r;
}

}  // namespace

EvalResult eval_2d(const std::vector<StaticAnnotation>& pred,
                   const std::vector<StaticAnnotation>& ref, const Scene& scene,
                   const EvalConfig& cfg, std::vector<FrameEvalBreakdown>* breakdown) {
    if (!cfg.valid()) throw ConfigError("eval_2d: invalid EvalConfig");
    std::int64_t n_matched = 0, n_pred = 0, n_ref = 0;
    double error_sum = 0.0;

    for (const CameraFrame& frame : scene.frames) {
        if (cfg.timestamp_filter_ms && frame.pair_time_delta_ms > *cfg.timestamp_filter_ms)
            continue;
        const std::vector<ProjectedShape> p = project_visible(pred, frame);
        const std::vector<ProjectedShape> r = project_visible(ref, frame);
        n_pred += static_cast<std::int64_t>(p.size());
        n_ref += static_cast<std::int64_t>(r.size());

        FrameEvalBreakdown fb;
        fb.frame_id = frame.frame_id;
        fb.n_pred = static_cast<std::int64_t>(p.size());
        fb.n_ref = static_cast<std::int64_t>(r.size());

        if (!p.empty() && !r.empty()) {
            Eigen::MatrixXd cost(p.size(), r.size());
            for (size_t i = 0; i < p.size(); ++i) {
                for (size_t j = 0; j < r.size(); ++j) {
                    if (p[i].annotation->object_class != r[j].annotation->object_class) {
                        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                            kAssignmentSentinel;
                        continue;
                    }
                    const double iou = convex_polygon_iou(ensure_ccw(p[i].outline),
                                                          ensure_ccw(r[j].outline));
                    cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        1.0 - iou;
                }
            }
            for (const auto& [i, j] : hungarian(cost)) {
                const double c = cost(i, j);
                if (c >= kAssignmentSentinel) continue;
                const double iou = 1.0 - c;
                if (iou < cfg.iou_threshold) continue;  // IoU == threshold matches
                ++n_matched;
                ++fb.n_matched;
                const double err = corner_distance(p[static_cast<size_t>(i)].outline,
                                                   r[static_cast<size_t>(j)].outline);
                error_sum += err;
                fb.error_sum += err;
            }
        }
        if (breakdown != nullptr) breakdown->push_back(fb);
    }
    return finalize(n_matched, n_pred, n_ref, error_sum);
}

EvalResult eval_3d(const std::vector<StaticAnnotation>& pred,
                   const std::vector<StaticAnnotation>& ref, const EvalConfig& cfg) {
    if (!cfg.valid()) throw ConfigError("eval_3d: invalid EvalConfig");
    std::int64_t n_matched = 0;
    double error_sum = 0.0;

    if (!pred.empty() && !ref.empty()) {
        Eigen::MatrixXd cost(pred.size(), ref.size());
        for (size_t i = 0; i < pred.size(); ++i) {
            for (size_t j = 0; j < ref.size(); ++j) {
                if (pred[i].object_class != ref[j].object_class) {
                    cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        kAssignmentSentinel;
                    continue;
                }
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (params_center(pred[i].params) - params_center(ref[j].params)).norm();
            }
        }
        for (const auto& [i, j] : hungarian(cost)) {
            const double d = cost(i, j);
            if (d >= kAssignmentSentinel) continue;
            if (d > cfg.center_dist_threshold) continue;  // distance == threshold matches
            ++n_matched;
            error_sum += d;
        }
    }
    return finalize(n_matched, static_cast<std::int64_t>(pred.size()),
                    static_cast<std::int64_t>(ref.size()), error_sum);
}

}  // namespace roadobj
