#include "roadobj/optimize.hpp"

#include "roadobj/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roadobj {

namespace {

struct CornerBasis {
    double alpha;  // sign along the width axis
    double beta;   // sign along the up axis
};
constexpr std::array<CornerBasis, 4> kCornerBasis{{{-1, -1}, {-1, +1}, {+1, +1}, {+1, -1}}};

/// du,dv per d(camera point); rows 2, cols 3.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& cam, const Vec3& p_cam) {
    Eigen::Matrix<double, 2, 3> J;
    const double iz = 1.0 / p_cam.z();
    J << cam.fx * iz, 0.0, -cam.fx * p_cam.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * p_cam.y() * iz * iz;
    return J;
}

Vec3 model_corner(const ShapeParams& params, int k) {
    const CornerBasis b = kCornerBasis[static_cast<size_t>(k)];
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        return r->center + b.alpha * 0.5 * r->width * width_axis(r->yaw) +
               b.beta * 0.5 * r->height * kUp;
    }
    const auto& c = std::get<CuboidParams>(params);
    return c.center + b.alpha * 0.5 * c.width * width_axis(c.yaw) +
           b.beta * 0.5 * c.height * kUp + 0.5 * c.depth * plane_normal(c.yaw);
}

/// d(corner)/d(param column j), in world coordinates.
Vec3 model_corner_derivative(const ShapeParams& params, int k, int col) {
    const CornerBasis b = kCornerBasis[static_cast<size_t>(k)];
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        switch (col) {
            case 0: return Vec3::UnitX();
            case 1: return Vec3::UnitY();
            case 2: return Vec3::UnitZ();
            case 3: return b.alpha * 0.5 * r->width * width_axis_dyaw(r->yaw);
            case 4: return b.alpha * 0.5 * width_axis(r->yaw);
            case 5: return b.beta * 0.5 * kUp;
            default: return Vec3::Zero();
        }
    }
    const auto& c = std::get<CuboidParams>(params);
    switch (col) {
        case 0: return Vec3::UnitX();
        case 1: return Vec3::UnitY();
        case 2: return Vec3::UnitZ();
        case 3:
            return b.alpha * 0.5 * c.width * width_axis_dyaw(c.yaw) +
                   0.5 * c.depth * plane_normal_dyaw(c.yaw);
        case 4: return b.alpha * 0.5 * width_axis(c.yaw);
        case 5: return b.beta * 0.5 * kUp;
        case 6: return 0.5 * plane_normal(c.yaw);
        default: return Vec3::Zero();
    }
}

Vec3 circle_model_point(const CircleSignParams& p, double t) { return circle_point(p, t); }

Vec3 circle_point_derivative(const CircleSignParams& p, double t, int col) {
    switch (col) {
        case 0: return Vec3::UnitX();
        case 1: return Vec3::UnitY();
        case 2: return Vec3::UnitZ();
        case 3: return p.radius * std::cos(t) * width_axis_dyaw(p.yaw);
        case 4: return std::cos(t) * width_axis(p.yaw) + std::sin(t) * kUp;
        default: return Vec3::Zero();
    }
}

/// Indices of the support points with extreme offsets along the front
/// normal; ties broken by the first occurrence for determinism.
std::pair<int, int> slab_extremes(const CuboidParams& c, const std::vector<Vec3>& pts) {
    const Vec3 n = plane_normal(c.yaw);
    int hi = 0, lo = 0;
    double shi = -std::numeric_limits<double>::max();
    double slo = std::numeric_limits<double>::max();
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const double s = (pts[static_cast<size_t>(i)] - c.center).dot(n);
        if (s > shi) {
            shi = s;
            hi = i;
        }
        if (s < slo) {
            slo = s;
            lo = i;
        }
    }
    return {hi, lo};
}

}  // namespace

HuberResult huber_loss(double r, double delta) {
    const double a = std::abs(r);
    if (a <= delta) return {0.5 * r * r, 1.0};
    return {delta * (a - 0.5 * delta), delta / a};
}

int dof_of(const ShapeParams& params) {
    if (std::holds_alternative<RectSignParams>(params)) return 6;
    if (std::holds_alternative<CuboidParams>(params)) return 7;
    return 5;
}

Eigen::VectorXd pack_params(const ShapeParams& params) {
    Eigen::VectorXd v(dof_of(params));
    if (const auto* r = std::get_if<RectSignParams>(&params)) {
        v << r->center.x(), r->center.y(), r->center.z(), r->yaw, r->width, r->height;
    } else if (const auto* c = std::get_if<CuboidParams>(&params)) {
        v << c->center.x(), c->center.y(), c->center.z(), c->yaw, c->width, c->height, c->depth;
    } else {
        const auto& s = std::get<CircleSignParams>(params);
        v << s.center.x(), s.center.y(), s.center.z(), s.yaw, s.radius;
    }
    return v;
}

ShapeParams unpack_params(const ShapeParams& like, const Eigen::VectorXd& v) {
    ShapeParams out = like;
    if (auto* r = std::get_if<RectSignParams>(&out)) {
        r->center = {v[0], v[1], v[2]};
        r->yaw = v[3];
        r->width = v[4];
        r->height = v[5];
    } else if (auto* c = std::get_if<CuboidParams>(&out)) {
        c->center = {v[0], v[1], v[2]};
        c->yaw = v[3];
        c->width = v[4];
        c->height = v[5];
        c->depth = v[6];
    } else {
        auto& s = std::get<CircleSignParams>(out);
        s.center = {v[0], v[1], v[2]};
        s.yaw = v[3];
        s.radius = v[4];
    }
    return out;
}

ContourMatching match_contour(const CircleSignParams& params, const RefineProblem& problem) {
    constexpr int kGrid = 128;
    ContourMatching matching;
    matching.t_values.resize(problem.contour_obs.size());
    for (size_t oi = 0; oi < problem.contour_obs.size(); ++oi) {
        const ContourObservation& obs = problem.contour_obs[oi];
        auto image_point = [&](double t) -> std::optional<Vec2> {
            return project(obs.frame->intrinsics, obs.frame->world_from_camera,
                           circle_model_point(params, t));
        };
        std::vector<double>& ts = matching.t_values[oi];
        ts.reserve(obs.points.size());
        for (const Vec2& o : obs.points) {
            double best_t = 0.0;
            double best_d = std::numeric_limits<double>::max();
            for (int g = 0; g < kGrid; ++g) {
                const double t = 2.0 * M_PI * g / kGrid;
                const auto px = image_point(t);
                if (!px) continue;
                const double d = (*px - o).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_t = t;
                }
            }
            // Ternary refinement of the pixel distance around the best grid
            // sample; the distance is locally unimodal in t.
            double lo = best_t - 2.0 * M_PI / kGrid;
            double hi = best_t + 2.0 * M_PI / kGrid;
            for (int it = 0; it < 80; ++it) {
                const double m1 = lo + (hi - lo) / 3.0;
                const double m2 = hi - (hi - lo) / 3.0;
                const auto p1 = image_point(m1);
                const auto p2 = image_point(m2);
                const double d1 = p1 ? (*p1 - o).squaredNorm() : std::numeric_limits<double>::max();
                const double d2 = p2 ? (*p2 - o).squaredNorm() : std::numeric_limits<double>::max();
                if (d1 <= d2)
                    hi = m2;
                else
                    lo = m1;
            }
            ts.push_back(0.5 * (lo + hi));
        }
    }
    return matching;
}

ResidualEval residuals(const ShapeParams& params, const RefineProblem& problem,
                       const ContourMatching* matching) {
    ResidualEval ev;
    std::vector<double> rows;
    auto push_block = [&](std::initializer_list<double> vals, bool pixel_block) {
        ev.block_rows.push_back(static_cast<int>(rows.size()));
        ev.block_sizes.push_back(static_cast<int>(vals.size()));
        for (double v : vals) rows.push_back(v);
        if (pixel_block) ++ev.n_pixel_blocks;
    };

    if (std::holds_alternative<CircleSignParams>(params)) {
        const auto& circle = std::get<CircleSignParams>(params);
        ContourMatching local;
        if (matching == nullptr) {
            local = match_contour(circle, problem);
            matching = &local;
        }
        for (size_t oi = 0; oi < problem.contour_obs.size(); ++oi) {
            const ContourObservation& obs = problem.contour_obs[oi];
            bool usable = true;
            std::vector<double> vals;
            vals.reserve(obs.points.size() * 2);
            for (size_t j = 0; j < obs.points.size(); ++j) {
                const double t = matching->t_values[oi][j];
                const auto px = project(obs.frame->intrinsics, obs.frame->world_from_camera,
                                        circle_model_point(circle, t));
                if (!px) {
                    usable = false;
                    break;
                }
                vals.push_back(px->x() - obs.points[j].x());
                vals.push_back(px->y() - obs.points[j].y());
            }
            if (!usable) {
                ++ev.dropped_observations;
                continue;
            }
            for (size_t j = 0; j * 2 < vals.size(); ++j)
                push_block({vals[2 * j], vals[2 * j + 1]}, true);
        }
    } else {
        for (const CornerObservation& obs : problem.corner_obs) {
            std::array<Vec2, 4> proj{};
            bool usable = true;
            for (int k = 0; k < 4; ++k) {
                const auto px = project(obs.frame->intrinsics, obs.frame->world_from_camera,
                                        model_corner(params, k));
                if (!px) {
                    usable = false;
                    break;
                }
                proj[static_cast<size_t>(k)] = *px;
            }
            if (!usable) {
                ++ev.dropped_observations;
                continue;
            }
            for (int k = 0; k < 4; ++k) {
                const Vec2 d = proj[static_cast<size_t>(k)] - obs.corners[static_cast<size_t>(k)];
                push_block({d.x(), d.y()}, true);
            }
        }
        if (const auto* c = std::get_if<CuboidParams>(&params);
            c != nullptr && !problem.support_points.empty()) {
            const auto [hi, lo] = slab_extremes(*c, problem.support_points);
            const Vec3 n = plane_normal(c->yaw);
            const double shi =
                (problem.support_points[static_cast<size_t>(hi)] - c->center).dot(n);
            const double slo =
                (problem.support_points[static_cast<size_t>(lo)] - c->center).dot(n);
            push_block({kDepthSupportWeight * (shi - 0.5 * c->depth)}, false);
            push_block({kDepthSupportWeight * (slo + 0.5 * c->depth)}, false);
        }
    }

    ev.values = Eigen::Map<Eigen::VectorXd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
    return ev;
}

Eigen::MatrixXd jacobian(const ShapeParams& params, const RefineProblem& problem,
                         const ContourMatching* matching) {
    const int dof = dof_of(params);
    std::vector<Eigen::RowVectorXd> rows;

    if (std::holds_alternative<CircleSignParams>(params)) {
        const auto& circle = std::get<CircleSignParams>(params);
        ContourMatching local;
        if (matching == nullptr) {
            local = match_contour(circle, problem);
            matching = &local;
        }
        for (size_t oi = 0; oi < problem.contour_obs.size(); ++oi) {
            const ContourObservation& obs = problem.contour_obs[oi];
            std::vector<Eigen::RowVectorXd> obs_rows;
            bool usable = true;
            for (size_t j = 0; j < obs.points.size(); ++j) {
                const double t = matching->t_values[oi][j];
                const Vec3 X = circle_model_point(circle, t);
                const Vec3 p_cam = inverse_transform_point(obs.frame->world_from_camera, X);
                if (p_cam.z() <= kDefaultMinDepth) {
                    usable = false;
                    break;
                }
                const auto Jp = projection_jacobian(obs.frame->intrinsics, p_cam);
                const Eigen::Matrix3d R_cw =
                    obs.frame->world_from_camera.rotation.conjugate().toRotationMatrix();
                Eigen::RowVectorXd ru(dof), rv(dof);
                for (int col = 0; col < dof; ++col) {
                    const Vec3 dX = circle_point_derivative(circle, t, col);
                    const Eigen::Vector2d duv = Jp * (R_cw * dX);
                    ru[col] = duv.x();
                    rv[col] = duv.y();
                }
                obs_rows.push_back(ru);
                obs_rows.push_back(rv);
            }
            if (usable)
                for (auto& r : obs_rows) rows.push_back(std::move(r));
        }
    } else {
        for (const CornerObservation& obs : problem.corner_obs) {
            std::vector<Eigen::RowVectorXd> obs_rows;
            bool usable = true;
            for (int k = 0; k < 4 && usable; ++k) {
                const Vec3 X = model_corner(params, k);
                const Vec3 p_cam = inverse_transform_point(obs.frame->world_from_camera, X);
                if (p_cam.z() <= kDefaultMinDepth) {
                    usable = false;
                    break;
                }
                const auto Jp = projection_jacobian(obs.frame->intrinsics, p_cam);
                const Eigen::Matrix3d R_cw =
                    obs.frame->world_from_camera.rotation.conjugate().toRotationMatrix();
                Eigen::RowVectorXd ru(dof), rv(dof);
                for (int col = 0; col < dof; ++col) {
                    const Vec3 dX = model_corner_derivative(params, k, col);
                    const Eigen::Vector2d duv = Jp * (R_cw * dX);
                    ru[col] = duv.x();
                    rv[col] = duv.y();
                }
                obs_rows.push_back(ru);
                obs_rows.push_back(rv);
            }
            if (usable)
                for (auto& r : obs_rows) rows.push_back(std::move(r));
        }
        if (const auto* c = std::get_if<CuboidParams>(&params);
            c != nullptr && !problem.support_points.empty()) {
            const auto [hi, lo] = slab_extremes(*c, problem.support_points);
            const Vec3 n = plane_normal(c->yaw);
            const Vec3 dn = plane_normal_dyaw(c->yaw);
            for (const auto& [idx, ddepth] : {std::pair{hi, -0.5}, std::pair{lo, +0.5}}) {
                const Vec3 p = problem.support_points[static_cast<size_t>(idx)];
                Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(dof);
                r[0] = -kDepthSupportWeight * n.x();
                r[1] = -kDepthSupportWeight * n.y();
                r[2] = -kDepthSupportWeight * n.z();
                r[3] = kDepthSupportWeight * (p - c->center).dot(dn);
                r[6] = kDepthSupportWeight * ddepth;
                rows.push_back(std::move(r));
            }
        }
    }

    Eigen::MatrixXd J(static_cast<Eigen::Index>(rows.size()), dof);
    for (size_t i = 0; i < rows.size(); ++i) J.row(static_cast<Eigen::Index>(i)) = rows[i];
    return J;
}

namespace {

double robust_cost(const ResidualEval& ev, double delta) {
    double cost = 0.0;
    for (size_t b = 0; b < ev.block_rows.size(); ++b) {
        double sq = 0.0;
        for (int k = 0; k < ev.block_sizes[b]; ++k) {
            const double v = ev.values[ev.block_rows[b] + k];
            sq += v * v;
        }
        cost += huber_loss(std::sqrt(sq), delta).loss;
    }
    return cost;
}

double mean_pixel_block_norm(const ResidualEval& ev) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (size_t b = 0; b < ev.block_rows.size(); ++b) {
        if (ev.block_sizes[b] != 2) continue;  // slab rows are not pixel residuals
        double sq = 0.0;
        for (int k = 0; k < ev.block_sizes[b]; ++k) {
            const double v = ev.values[ev.block_rows[b] + k];
            sq += v * v;
        }
        sum += std::sqrt(sq);
        ++n;
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

ShapeParams canonicalize(ShapeParams p) {
    std::visit([](auto& s) { s.yaw = wrap_angle(s.yaw); }, p);
    if (auto* r = std::get_if<RectSignParams>(&p)) {
        r->width = std::max(r->width, 1e-6);
        r->height = std::max(r->height, 1e-6);
    } else if (auto* c = std::get_if<CuboidParams>(&p)) {
        c->width = std::max(c->width, 1e-6);
        c->height = std::max(c->height, 1e-6);
        c->depth = std::max(c->depth, 1e-6);
    } else {
        auto& s = std::get<CircleSignParams>(p);
        s.radius = std::max(s.radius, 1e-6);
    }
    return p;
}

}  // namespace

RefineResult refine(const ShapeParams& initial, const RefineProblem& problem,
                    const SolverOptions& opts) {
    if (!opts.valid()) throw ConfigError("refine: invalid SolverOptions");
    const size_t n_obs = std::holds_alternative<CircleSignParams>(initial)
                             ? problem.contour_obs.size()
                             : problem.corner_obs.size();
    if (n_obs < 2) throw InsufficientObservations("refine: fewer than 2 observations");

    ShapeParams params = canonicalize(initial);
    const bool is_circle = std::holds_alternative<CircleSignParams>(params);

    FitReport report;
    double lambda = opts.initial_damping;
    double cost = 0.0;
    {
        ContourMatching matching;
        const ContourMatching* mp = nullptr;
        if (is_circle) {
            matching = match_contour(std::get<CircleSignParams>(params), problem);
            mp = &matching;
        }
        const ResidualEval ev = residuals(params, problem, mp);
        if (!ev.values.allFinite()) throw NumericalFailure("refine: non-finite initial residual");
        cost = robust_cost(ev, opts.huber_delta);
        report.initial_cost = cost;
        report.dropped_observations = ev.dropped_observations;
        report.n_residuals = ev.values.size();
    }

    const int dof = dof_of(params);
    bool converged = false;
    int iter = 0;
    while (iter < opts.max_iterations) {
        ++iter;
        if (cost <= 1e-24) {
            converged = true;
            break;
        }

        ContourMatching matching;
        const ContourMatching* mp = nullptr;
        if (is_circle) {
            matching = match_contour(std::get<CircleSignParams>(params), problem);
            mp = &matching;
        }
        const ResidualEval ev = residuals(params, problem, mp);
        if (is_circle) {
            // Re-matching can only tighten the correspondence, so this never
            // raises the cost.
            cost = std::min(cost, robust_cost(ev, opts.huber_delta));
        }
        const Eigen::MatrixXd J = jacobian(params, problem, mp);
        if (!ev.values.allFinite() || !J.allFinite())
            throw NumericalFailure("refine: non-finite residual or Jacobian");
        if (J.rows() != ev.values.size())
            throw NumericalFailure("refine: residual/Jacobian row mismatch");

        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dof, dof);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
        for (size_t b = 0; b < ev.block_rows.size(); ++b) {
            double sq = 0.0;
            for (int k = 0; k < ev.block_sizes[b]; ++k) {
                const double v = ev.values[ev.block_rows[b] + k];
                sq += v * v;
            }
            const double w = huber_loss(std::sqrt(sq), opts.huber_delta).weight;
            for (int k = 0; k < ev.block_sizes[b]; ++k) {
                const int row = ev.block_rows[b] + k;
                A.noalias() += w * J.row(row).transpose() * J.row(row);
                g.noalias() += w * J.row(row).transpose() * ev.values[row];
            }
        }

        Eigen::VectorXd diag = A.diagonal();
        const double dmax = diag.maxCoeff();
        for (int i = 0; i < dof; ++i) diag[i] = std::max(diag[i], std::max(1e-8 * dmax, 1e-12));

        bool accepted = false;
        while (iter <= opts.max_iterations) {
            Eigen::MatrixXd Ad = A;
            Ad.diagonal() += lambda * diag;
            const Eigen::VectorXd dp = Ad.ldlt().solve(-g);
            if (!dp.allFinite()) throw NumericalFailure("refine: singular normal equations");

            const ShapeParams trial = unpack_params(params, pack_params(params) + dp);
            const bool positive = std::visit([](const auto& s) { return s.valid(); }, trial);
            double trial_cost = std::numeric_limits<double>::max();
            if (positive) {
                const ResidualEval tev = residuals(trial, problem, mp);
                if (tev.values.size() == ev.values.size() && tev.values.allFinite() &&
                    tev.dropped_observations == ev.dropped_observations)
                    trial_cost = robust_cost(tev, opts.huber_delta);
            }

            if (trial_cost < cost) {
                const double drop = cost - trial_cost;
                params = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (drop <= opts.cost_rel_tol * std::max(cost, 1e-300) ||
                    dp.lpNorm<Eigen::Infinity>() < opts.param_abs_tol)
                    converged = true;
                break;
            }
            lambda = std::min(lambda * 10.0, 1e12);
            if (lambda >= 1e12) break;
            ++iter;
        }

        if (converged) break;
        if (!accepted) {
            // Damping saturated without a downhill step: local minimum.
            converged = true;
            break;
        }
    }

    params = canonicalize(params);
    report.iterations = iter;
    report.converged = converged || cost <= 1e-24;
    {
        ContourMatching matching;
        const ContourMatching* mp = nullptr;
        if (is_circle) {
            matching = match_contour(std::get<CircleSignParams>(params), problem);
            mp = &matching;
        }
        const ResidualEval ev = residuals(params, problem, mp);
        report.final_cost = std::min(cost, robust_cost(ev, opts.huber_delta));
        report.mean_reproj_error = mean_pixel_block_norm(ev);
        report.n_residuals = ev.values.size();
    }
    RefineResult out;
    out.params = params;
    out.report = report;
    return out;
}

}  // namespace roadobj
