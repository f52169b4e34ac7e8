// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include "oracles.hpp"
#include "roadobj/association.hpp"
#include "roadobj/errors.hpp"
#include "roadobj/evaluate.hpp"
#include "roadobj/pipeline.hpp"
#include "roadobj/proposal.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace roadobj;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    if (!pass) ++g_failures;
}

SynthConfig acceptance_scene_cfg(std::uint64_t seed) {
    SynthConfig cfg;  // 10 signs, 3 lights, 3 circles, 2 cones, 60 frames
    cfg.seed = seed;
    return cfg;
}

struct PipelineRun {
    std::vector<StaticAnnotation> annotations;
    GroundTruth gt;
    EvalResult r2d;
    EvalResult r3d;
    double max_param_error = 0.0;     // worst linf over objects (sizes/center m, yaw rad)
    double median_param_error = 0.0;  // median linf over objects
    bool counts_match = false;
    AnnotateResult raw;
};

double param_linf(const ShapeParams& a, const ShapeParams& b) {
    const Eigen::VectorXd va = pack_params(a);
    Eigen::VectorXd vb = pack_params(b);
    if (va.size() != vb.size()) return 1e300;
    vb[3] = va[3] + wrap_angle(vb[3] - va[3]);
    return (va - vb).lpNorm<Eigen::Infinity>();
}

PipelineRun run_pipeline(const SynthConfig& synth_cfg, double huber_delta = 1.0) {
    PipelineConfig cfg;
    cfg.synth = synth_cfg;
    cfg.solver.huber_delta = huber_delta;
    auto [scene, gt] = generate_scene(synth_cfg);
    if (synth_cfg.pixel_noise_sigma > 0.0 || synth_cfg.outlier_fraction > 0.0 ||
        synth_cfg.dropout_fraction > 0.0 || synth_cfg.occluder_fraction > 0.0)
        scene = corrupt(scene, gt, synth_cfg);

    PipelineRun run;
    run.gt = gt;
    run.raw = annotate_scene(scene, cfg);
    run.annotations = run.raw.annotations;
    const auto ref = ground_truth_annotations(gt);
    run.r2d = eval_2d(run.annotations, ref, scene, cfg.eval);
    run.r3d = eval_3d(run.annotations, ref, cfg.eval);
    run.counts_match = run.annotations.size() == gt.objects.size();

    std::vector<double> errs;
    for (const StaticAnnotation& a : run.annotations) {
        double best_d = 1e300;
        const GroundTruthObject* best = nullptr;
        for (const GroundTruthObject& o : gt.objects) {
            if (o.object_class != a.object_class) continue;
            const double d = (params_center(o.params) - params_center(a.params)).norm();
            if (d < best_d) {
                best_d = d;
                best = &o;
            }
        }
        errs.push_back(best != nullptr ? param_linf(a.params, best->params) : 1e300);
    }
    run.max_param_error = errs.empty() ? 1e300 : *std::max_element(errs.begin(), errs.end());
    run.median_param_error = errs.empty() ? 1e300 : oracles::median(errs);
    return run;
}

void criterion_1_exact_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const PipelineRun run = run_pipeline(acceptance_scene_cfg(42));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = run.counts_match && run.r2d.precision == 1.0 && run.r2d.recall == 1.0 &&
                      run.r3d.precision == 1.0 && run.r3d.recall == 1.0 &&
                      run.r2d.mean_error < 1e-3 && run.r3d.mean_error < 1e-6 &&
                      run.max_param_error < 1e-6 && seconds < 10.0;
    std::ostringstream d;
    d << "P2d=" << run.r2d.precision << " R2d=" << run.r2d.recall << " E2d=" << run.r2d.mean_error
      << "px E3d=" << run.r3d.mean_error << "m param_err=" << run.max_param_error << " t="
      << seconds << "s";
    report(1, "exact recovery on the noiseless seed-42 scene", pass, d.str());
}

void criterion_2_noise_robustness() {
    std::vector<double> e2d, e3d, precs, recs;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {  // 20 seeds
        SynthConfig cfg = acceptance_scene_cfg(seed);
        cfg.pixel_noise_sigma = 0.5;
        const PipelineRun run = run_pipeline(cfg);
        e2d.push_back(run.r2d.mean_error);
        e3d.push_back(run.r3d.mean_error);
        precs.push_back(std::min(run.r2d.precision, run.r3d.precision));
        recs.push_back(std::min(run.r2d.recall, run.r3d.recall));
    }
    const double med2d = oracles::median(e2d);
    const double med3d = oracles::median(e3d);
    const double medp = oracles::median(precs);
    const double medr = oracles::median(recs);
    const bool pass = med2d <= 1.5 && med3d <= 0.1 && medp >= 0.95 && medr >= 0.95;
    std::ostringstream d;
    d << "median E2d=" << med2d << "px E3d=" << med3d << "m precision=" << medp
      << " recall=" << medr << " over 20 seeds";
    report(2, "0.5 px noise robustness", pass, d.str());
}

void criterion_3_huber_outliers() {
    std::vector<double> clean, robust, ablated;
    for (std::uint64_t seed = 300; seed < 310; ++seed) {
        SynthConfig noise_cfg = acceptance_scene_cfg(seed);
        noise_cfg.pixel_noise_sigma = 0.5;
        clean.push_back(run_pipeline(noise_cfg).median_param_error);

        SynthConfig outlier_cfg = noise_cfg;
        outlier_cfg.outlier_fraction = 0.10;
        outlier_cfg.outlier_magnitude = 20.0;
        robust.push_back(run_pipeline(outlier_cfg).median_param_error);
        ablated.push_back(run_pipeline(outlier_cfg, 1e12).median_param_error);
    }
    const double m_clean = oracles::median(clean);
    const double m_robust = oracles::median(robust);
    const double m_ablated = oracles::median(ablated);
    const bool pass = m_robust <= 2.0 * m_clean && m_ablated >= 2.0 * m_robust;
    std::ostringstream d;
    d << "median param err: noise-only=" << m_clean << " huber=" << m_robust
      << " delta->inf=" << m_ablated;
    report(3, "Huber outlier robustness (10% corners at 20 px)", pass, d.str());
}

void criterion_4_occlusion_gate() {
    SynthConfig cfg = acceptance_scene_cfg(404);
    cfg.occluder_fraction = 0.3;
    PipelineConfig pcfg;
    pcfg.synth = cfg;  // a_th stays at its 0.95 default
    auto [scene, gt] = generate_scene(cfg);
    scene = corrupt(scene, gt, cfg);

    const AnnotateResult res = annotate_scene(scene, pcfg);
    std::int64_t leaked = 0;
    for (const auto& used : res.used_obs_ids)
        for (const std::int64_t id : used)
            if (gt.occluded_obs_ids.count(id) > 0) ++leaked;

    const auto ref = ground_truth_annotations(gt);
    const EvalResult r3d = eval_3d(res.annotations, ref, pcfg.eval);
    const bool pass = !gt.occluded_obs_ids.empty() && leaked == 0 && r3d.recall >= 0.95;
    std::ostringstream d;
    d << gt.occluded_obs_ids.size() << " occluded observations, " << leaked
      << " leaked into refinement, recall=" << r3d.recall;
    report(4, "occlusion gate excludes flagged observations", pass, d.str());
}

void criterion_5_merge_split() {
    SynthConfig cfg;
    cfg.n_signs = 4;
    cfg.n_lights = 1;
    cfg.n_circles = 1;
    cfg.n_cones = 1;
    cfg.n_frames = 40;
    cfg.seed = 505;
    const auto [scene, gt] = generate_scene(cfg);
    AssociationParams params;
    ProposalParams prop_params;
    const PointMemberships memberships = assign_points_to_instances(scene);
    std::vector<Track> tracks = build_tracks(scene, memberships, params);

    const auto propose = [&](const Track& t) -> ShapeParams {
        std::vector<VertexObservation> vo;
        std::vector<Vec3> support;
        for (const std::int64_t id : t.support_point_ids)
            support.push_back(scene.find_point(id)->position);
        for (const std::int64_t id : t.obs_ids) {
            const InstanceObservation* obs = scene.find_observation(id);
            if (t.object_class == ObjectClass::circular_sign) {
                VertexObservation v;
                v.obs_id = id;
                v.frame_id = obs->frame_id;
                v.contour = obs->mask;
                vo.push_back(v);
            } else {
                vo.push_back(extract_mask_vertices(*obs));
            }
        }
        switch (t.object_class) {
            case ObjectClass::circular_sign:
                return init_circle_proposal(vo, scene, prop_params);
            case ObjectClass::guideboard:
                return init_rect_proposal(vo, scene, support, prop_params);
            default:
                return init_cuboid_proposal(vo, scene, support, prop_params);
        }
    };

    // Duplicate fixture: the first track split into even/odd frame halves.
    bool dup_ok = false;
    {
        std::vector<Track> fixture;
        const Track& t0 = tracks.front();
        Track even = t0, odd = t0;
        odd.track_id = 9000;
        even.obs_ids.clear();
        odd.obs_ids.clear();
        even.support_point_ids.clear();
        odd.support_point_ids.clear();
        int i = 0;
        for (const std::int64_t id : t0.obs_ids)
            ((i++ % 2 == 0) ? even : odd).obs_ids.push_back(id);
        i = 0;
        for (const std::int64_t id : t0.support_point_ids)
            ((i++ % 2 == 0) ? even : odd).support_point_ids.insert(id);
        fixture.push_back(even);
        fixture.push_back(odd);
        for (size_t k = 1; k < tracks.size(); ++k) fixture.push_back(tracks[k]);

        std::map<std::int64_t, ShapeParams> proposals;
        for (const Track& t : fixture) proposals[t.track_id] = propose(t);
        const std::vector<Track> merged = merge_tracks(fixture, proposals, scene, params);
        const std::vector<Track> again = merge_tracks(merged, proposals, scene, params);
        dup_ok = merged.size() == gt.objects.size() && again.size() == merged.size();
    }

    // Stitched fixture: two guideboard tracks forced into one.
    bool split_ok = false;
    {
        std::vector<const Track*> boards;
        for (const Track& t : tracks)
            if (t.object_class == ObjectClass::guideboard) boards.push_back(&t);
        const Track* a = boards[0];
        const Track* b = boards[1];
        Track stitched = *a;
        std::map<std::int64_t, std::int64_t> frame_to_obs;
        for (const std::int64_t id : a->obs_ids)
            frame_to_obs[scene.find_observation(id)->frame_id] = id;
        for (const std::int64_t id : b->obs_ids) {
            const std::int64_t f = scene.find_observation(id)->frame_id;
            if (frame_to_obs.count(f) == 0) frame_to_obs[f] = id;
        }
        stitched.obs_ids.clear();
        for (const auto& [f, id] : frame_to_obs) stitched.obs_ids.push_back(id);
        std::sort(stitched.obs_ids.begin(), stitched.obs_ids.end());
        stitched.support_point_ids.insert(b->support_point_ids.begin(),
                                          b->support_point_ids.end());

        const auto& pa = std::get<RectSignParams>(propose(*a));
        const auto& pb = std::get<RectSignParams>(propose(*b));
        RectSignParams spanning;
        spanning.center = 0.5 * (pa.center + pb.center);
        spanning.yaw = pa.yaw;
        spanning.width = (pa.center - pb.center).norm() + pa.width + pb.width;
        spanning.height = 2.0 * std::max(pa.height, pb.height);
        AssociationParams loose = params;
        loose.split_iou = 0.15;
        loose.split_min_frames = 2;
        const auto children =
            split_track(scene, stitched, spanning, memberships, loose, 9100);
        bool partition_ok = children.size() == 2;
        if (partition_ok) {
            // Split then merge is a fixed point.
            std::map<std::int64_t, ShapeParams> proposals;
            std::vector<Track> set = children;
            for (const Track& t : tracks)
                if (t.track_id != a->track_id && t.track_id != b->track_id) set.push_back(t);
            for (const Track& t : set) proposals[t.track_id] = propose(t);
            const auto merged = merge_tracks(set, proposals, scene, params);
            std::vector<Track> stable = merged;
            for (const Track& t : merged) {
                const auto split_again = split_track(scene, t, proposals.at(t.track_id),
                                                     memberships, loose, 9500);
                partition_ok = partition_ok && split_again.size() == 1;
            }
            partition_ok = partition_ok && merged.size() == gt.objects.size();
        }
        split_ok = partition_ok;
    }

    report(5, "merge collapses duplicates; split separates stitched pairs", dup_ok && split_ok,
           std::string("duplicate=") + (dup_ok ? "ok" : "bad") + " stitched=" +
               (split_ok ? "ok" : "bad"));
}

void criterion_6_oracle_equivalences() {
    SplitMix64 rng(606);
    bool hungarian_ok = true;
    for (int trial = 0; trial < 1000 && hungarian_ok; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(1, 7));
        const int m = static_cast<int>(rng.uniform_int(1, 7));
        Eigen::MatrixXd cost(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) cost(i, j) = static_cast<double>(rng.uniform_int(0, 99));
        double total = 0.0;
        for (const auto& [i, j] : hungarian(cost)) total += cost(i, j);
        hungarian_ok = std::abs(total - oracles::brute_force_assignment(cost)) < 1e-9;
    }

    bool obb_ok = true;
    for (int trial = 0; trial < 500 && obb_ok; ++trial) {
        const auto pts = oracles::random_point_cloud(rng, 3 + static_cast<int>(trial % 25));
        try {
            const double area = min_area_obb(pts).area();
            const double grid = oracles::angle_grid_min_area(pts);
            obb_ok = area <= grid + 1e-6 * std::max(1.0, grid);
        } catch (const DegenerateInput&) {
        }
    }

    // Jacobian vs central finite differences across the three classes.
    bool jac_ok = true;
    {
        Scene scene;
        for (int i = 0; i < 6; ++i)
            scene.frames.push_back(oracles::make_camera(i, {1.5 * i, 0.1 * i, 1.6}, 0.03 * i));
        int checked = 0;
        for (int trial = 0; trial < 200 && checked < 100 && jac_ok; ++trial) {
            ShapeParams truth;
            const double cx = rng.uniform(16, 26), cy = rng.uniform(-4, 6);
            const double yaw = wrap_angle(-M_PI / 2 + rng.uniform(-0.3, 0.3));
            switch (trial % 3) {
                case 0: {
                    RectSignParams p;
                    p.center = {cx, cy, rng.uniform(1.5, 3.5)};
                    p.yaw = yaw;
                    p.width = rng.uniform(0.9, 2.0);
                    p.height = rng.uniform(0.6, 1.4);
                    truth = p;
                    break;
                }
                case 1: {
                    CuboidParams p;
                    p.center = {cx, cy, rng.uniform(3.5, 5.5)};
                    p.yaw = yaw;
                    p.width = rng.uniform(0.25, 0.45);
                    p.height = rng.uniform(0.7, 1.1);
                    p.depth = rng.uniform(0.15, 0.35);
                    truth = p;
                    break;
                }
                default: {
                    CircleSignParams p;
                    p.center = {cx, cy, rng.uniform(1.5, 3.0)};
                    p.yaw = yaw;
                    p.radius = rng.uniform(0.3, 0.5);
                    truth = p;
                    break;
                }
            }

            RefineProblem problem;
            problem.object_class = default_class_for(truth);
            if (const auto* circle = std::get_if<CircleSignParams>(&truth)) {
                for (const CameraFrame& f : scene.frames) {
                    ContourObservation c;
                    c.frame_id = f.frame_id;
                    c.frame = &f;
                    bool ok = true;
                    for (const Vec3& p : circle_contour(*circle, 24)) {
                        const auto px = project(f.intrinsics, f.world_from_camera, p);
                        if (!px) {
                            ok = false;
                            break;
                        }
                        c.points.push_back(*px);
                    }
                    if (ok) problem.contour_obs.push_back(std::move(c));
                }
            } else {
                std::array<Vec3, 4> corners{};
                if (const auto* rect = std::get_if<RectSignParams>(&truth))
                    corners = rect_corners(*rect);
                else {
                    const auto& cub = std::get<CuboidParams>(truth);
                    corners = cuboid_front_corners(cub);
                    const Vec3 n = plane_normal(cub.yaw);
                    for (int i = 0; i < 5; ++i) {
                        problem.support_points.push_back(cub.center + 0.5 * cub.depth * n +
                                                         rng.uniform(-0.1, 0.1) * kUp);
                        problem.support_points.push_back(cub.center - 0.5 * cub.depth * n +
                                                         rng.uniform(-0.1, 0.1) * kUp);
                    }
                }
                for (const CameraFrame& f : scene.frames) {
                    CornerObservation c;
                    c.frame_id = f.frame_id;
                    c.frame = &f;
                    bool ok = true;
                    for (size_t k = 0; k < 4; ++k) {
                        const auto px = project(f.intrinsics, f.world_from_camera, corners[k]);
                        if (!px) {
                            ok = false;
                            break;
                        }
                        c.corners[k] = *px;
                    }
                    if (ok) problem.corner_obs.push_back(std::move(c));
                }
            }
            if (problem.corner_obs.size() + problem.contour_obs.size() < 2) continue;

            Eigen::VectorXd at = pack_params(truth);
            at[0] += rng.uniform(-0.1, 0.1);
            at[3] += rng.uniform(-0.02, 0.02);
            const ShapeParams eval_at = unpack_params(truth, at);

            ContourMatching matching;
            const ContourMatching* mp = nullptr;
            if (std::holds_alternative<CircleSignParams>(eval_at)) {
                matching = match_contour(std::get<CircleSignParams>(eval_at), problem);
                mp = &matching;
            }
            const Eigen::MatrixXd J = jacobian(eval_at, problem, mp);
            const auto fn = [&](const Eigen::VectorXd& v) {
                return residuals(unpack_params(eval_at, v), problem, mp).values;
            };
            const Eigen::MatrixXd Jfd = oracles::finite_difference_jacobian(fn, at, 1e-6);
            for (Eigen::Index r = 0; r < J.rows() && jac_ok; ++r)
                for (Eigen::Index c = 0; c < J.cols() && jac_ok; ++c) {
                    if (std::abs(J(r, c)) <= 1e-6) continue;
                    jac_ok = std::abs(J(r, c) - Jfd(r, c)) / std::abs(J(r, c)) < 1e-4;
                }
            ++checked;
        }
        jac_ok = jac_ok && checked >= 100;
    }

    // Noiseless two-view triangulation exact to 1e-9 relative.
    bool tri_ok = true;
    {
        Scene scene;
        scene.frames.push_back(oracles::make_camera(0, {0, 0, 1.6}));
        scene.frames.push_back(oracles::make_camera(1, {4, 0, 1.6}));
        ProposalParams params;
        for (int trial = 0; trial < 200 && tri_ok; ++trial) {
            const Vec3 X(rng.uniform(10, 40), rng.uniform(-8, 8), rng.uniform(0.5, 6));
            std::vector<ViewPixel> views;
            for (const CameraFrame& f : scene.frames)
                views.push_back({&f, *project(f.intrinsics, f.world_from_camera, X)});
            tri_ok = (triangulate_point(views, params) - X).norm() / X.norm() < 1e-9;
        }
    }

    const bool pass = hungarian_ok && obb_ok && jac_ok && tri_ok;
    std::ostringstream d;
    d << "hungarian=" << (hungarian_ok ? "ok" : "bad") << " obb=" << (obb_ok ? "ok" : "bad")
      << " jacobian=" << (jac_ok ? "ok" : "bad") << " triangulation=" << (tri_ok ? "ok" : "bad");
    report(6, "oracle equivalences", pass, d.str());
}

void criterion_7_determinism() {
    const std::string cli = ROADOBJ_CLI_PATH;
    char tmpl[] = "/tmp/roadobj_acc_XXXXXX";
    const std::string dir = mkdtemp(tmpl);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };
    auto sh = [&](const std::string& cmd) {
        return WEXITSTATUS(std::system((cmd + " >/dev/null 2>&1").c_str()));
    };
    {
        std::ofstream cfg(dir + "/cfg.toml");
        cfg << "[synth]\npixel_noise_sigma = 0.5\nseed = 777\n";
    }

    bool pass = true;
    for (const std::string tag : {"a", "b"}) {
        pass = pass && sh(cli + " synth --config " + dir + "/cfg.toml --scene-out " + dir +
                          "/scene_" + tag + ".json --gt-out " + dir + "/gt_" + tag + ".json") == 0;
        const std::string threads = tag == "a" ? "1" : "4";
        pass = pass && sh(cli + " annotate --scene " + dir + "/scene_" + tag +
                          ".json --threads " + threads + " --out " + dir + "/ann_" + tag +
                          ".json") == 0;
        pass = pass && sh(cli + " eval --pred " + dir + "/ann_" + tag + ".json --ref " + dir +
                          "/gt_" + tag + ".json --scene " + dir + "/scene_" + tag +
                          ".json --report " + dir + "/report_" + tag + ".json") == 0;
    }
    pass = pass && slurp(dir + "/scene_a.json") == slurp(dir + "/scene_b.json");
    pass = pass && slurp(dir + "/gt_a.json") == slurp(dir + "/gt_b.json");
    pass = pass && slurp(dir + "/ann_a.json") == slurp(dir + "/ann_b.json");
    pass = pass && slurp(dir + "/report_a.json") == slurp(dir + "/report_b.json");
    pass = pass && !slurp(dir + "/ann_a.json").empty();
    [[maybe_unused]] const int rc = std::system(("rm -rf " + dir).c_str());
    report(7, "byte-identical synth->annotate->eval across runs and 1 vs 4 threads", pass,
           pass ? "all four artifacts identical" : "artifact mismatch");
}

}  // namespace

int main() {
    criterion_1_exact_recovery();
    criterion_2_noise_robustness();
    criterion_3_huber_outliers();
    criterion_4_occlusion_gate();
    criterion_5_merge_split();
    criterion_6_oracle_equivalences();
    criterion_7_determinism();
    if (g_failures > 0) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
