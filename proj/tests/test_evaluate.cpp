#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "roadobj/evaluate.hpp"
#include "roadobj/rng.hpp"
#include "roadobj/synth.hpp"

#include <cmath>

using namespace roadobj;

namespace {

double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<std::pair<int, int>>& pairs) {
    double total = 0.0;
    for (const auto& [i, j] : pairs) total += cost(i, j);
    return total;
}

std::vector<StaticAnnotation> gt_annotations_of(const GroundTruth& gt) {
    std::vector<StaticAnnotation> out;
    for (const GroundTruthObject& o : gt.objects) {
        StaticAnnotation a;
        a.annotation_id = o.track_id;
        a.track_id = o.track_id;
        a.object_class = o.object_class;
        a.params = o.params;
        out.push_back(a);
    }
    return out;
}

}  // namespace

TEST_CASE("hungarian: diagonal identity and 1x1") {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(3, 3);
    cost.diagonal().setZero();
    const auto pairs = hungarian(cost);
    REQUIRE(pairs.size() == 3);
    for (const auto& [i, j] : pairs) CHECK(i == j);
    CHECK(assignment_cost(cost, pairs) == doctest::Approx(0.0));

    Eigen::MatrixXd one(1, 1);
    one << 7.0;
    const auto single = hungarian(one);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == std::pair<int, int>(0, 0));
}

TEST_CASE("hungarian equals brute force on random square and rectangular inputs") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(1, 6));
        const int m = static_cast<int>(rng.uniform_int(1, 6));
        Eigen::MatrixXd cost(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) cost(i, j) = static_cast<double>(rng.uniform_int(0, 50));
        const auto pairs = hungarian(cost);
        CHECK(static_cast<int>(pairs.size()) == std::min(n, m));
        // One-to-one.
        std::set<int> rows, cols;
        for (const auto& [i, j] : pairs) {
            CHECK(rows.insert(i).second);
            CHECK(cols.insert(j).second);
        }
        CHECK(assignment_cost(cost, pairs) ==
              doctest::Approx(oracles::brute_force_assignment(cost)));
    }
}

TEST_CASE("hungarian equals brute force for all sizes up to 7x7") {
    SplitMix64 rng(8);
    for (int n = 2; n <= 7; ++n) {
        for (int trial = 0; trial < 30; ++trial) {
            Eigen::MatrixXd cost(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform(0.0, 100.0);
            const auto pairs = hungarian(cost);
            CHECK(assignment_cost(cost, pairs) ==
                  doctest::Approx(oracles::brute_force_assignment(cost)));
        }
    }
}

TEST_CASE("eval_2d: identical sets, empty prediction, thresholds") {
    SynthConfig cfg;
    cfg.n_signs = 3;
    cfg.n_lights = 1;
    cfg.n_circles = 1;
    cfg.n_cones = 1;
    cfg.n_frames = 20;
    cfg.seed = 12;
    const auto [scene, gt] = generate_scene(cfg);
    const auto ref = gt_annotations_of(gt);
    EvalConfig ecfg;

    const EvalResult perfect = eval_2d(ref, ref, scene, ecfg);
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.recall == doctest::Approx(1.0));
    CHECK(perfect.mean_error < 1e-9);
    CHECK(perfect.n_pred == perfect.n_ref);

    const EvalResult empty = eval_2d({}, ref, scene, ecfg);
    CHECK(empty.precision == 0.0);  // n_pred = 0 convention
    CHECK(empty.recall == 0.0);
    CHECK(empty.n_matched == 0);

    const EvalResult no_ref = eval_2d(ref, {}, scene, ecfg);
    CHECK(no_ref.recall == 0.0);
    CHECK(no_ref.precision == 0.0);
}

TEST_CASE("eval_2d: swapping pred/ref exchanges precision and recall") {
    SynthConfig cfg;
    cfg.n_signs = 4;
    cfg.n_lights = 1;
    cfg.n_circles = 1;
    cfg.n_cones = 0;
    cfg.n_frames = 24;
    cfg.seed = 13;
    const auto [scene, gt] = generate_scene(cfg);
    const auto all = gt_annotations_of(gt);
    const std::vector<StaticAnnotation> some(all.begin(), all.begin() + 3);
    EvalConfig ecfg;

    const EvalResult ab = eval_2d(some, all, scene, ecfg);
    const EvalResult ba = eval_2d(all, some, scene, ecfg);
    CHECK(ab.precision == doctest::Approx(ba.recall));
    CHECK(ab.recall == doctest::Approx(ba.precision));
    CHECK(ab.n_matched == ba.n_matched);
    CHECK(ab.mean_error == doctest::Approx(ba.mean_error));
}

TEST_CASE("eval_3d: identity, threshold gate, class gate") {
    SynthConfig cfg;
    cfg.n_signs = 3;
    cfg.n_lights = 1;
    cfg.n_circles = 1;
    cfg.n_cones = 1;
    cfg.n_frames = 16;
    cfg.seed = 14;
    const auto [scene, gt] = generate_scene(cfg);
    const auto ref = gt_annotations_of(gt);
    EvalConfig ecfg;

    const EvalResult perfect = eval_3d(ref, ref, ecfg);
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.recall == doctest::Approx(1.0));
    CHECK(perfect.mean_error < 1e-12);

    // Shift every prediction 2 m: no pair within the 1 m threshold.
    auto shifted = ref;
    for (StaticAnnotation& a : shifted)
        std::visit([](auto& s) { s.center.x() += 2.0; }, a.params);
    const EvalResult far = eval_3d(shifted, ref, ecfg);
    CHECK(far.n_matched == 0);
    CHECK(far.precision == 0.0);

    // Matching at exactly the threshold distance counts as matched.
    auto at_threshold = ref;
    std::visit([&](auto& s) { s.center.x() += ecfg.center_dist_threshold; },
               at_threshold[0].params);
    const EvalResult edge =
        eval_3d({at_threshold[0]}, {ref[0]}, ecfg);
    CHECK(edge.n_matched == 1);

    // Same center, different class: never matched.
    auto misclass = ref;
    misclass[0].object_class = misclass[0].object_class == ObjectClass::guideboard
                                   ? ObjectClass::traffic_light
                                   : ObjectClass::guideboard;
    const EvalResult cls = eval_3d({misclass[0]}, {ref[0]}, ecfg);
    CHECK(cls.n_matched == 0);
}

TEST_CASE("eval_2d honors the timestamp pairing filter") {
    SynthConfig cfg;
    cfg.n_signs = 2;
    cfg.n_lights = 0;
    cfg.n_circles = 0;
    cfg.n_cones = 0;
    cfg.n_frames = 10;
    cfg.seed = 15;
    auto [scene, gt] = generate_scene(cfg);
    const auto ref = gt_annotations_of(gt);

    // Mark half the frames as badly paired.
    for (size_t i = 0; i < scene.frames.size(); ++i)
        scene.frames[i].pair_time_delta_ms = (i % 2 == 0) ? 25.0 : 1.0;

    EvalConfig all;
    const EvalResult full = eval_2d(ref, ref, scene, all);
    EvalConfig filtered;
    filtered.timestamp_filter_ms = 10.0;
    std::vector<FrameEvalBreakdown> breakdown;
    const EvalResult half = eval_2d(ref, ref, scene, filtered, &breakdown);
    CHECK(half.n_pred < full.n_pred);
    for (const FrameEvalBreakdown& fb : breakdown)
        CHECK(scene.frames[static_cast<size_t>(fb.frame_id)].pair_time_delta_ms <= 10.0);
}
