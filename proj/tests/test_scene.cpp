#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "roadobj/errors.hpp"
#include "roadobj/scene.hpp"
#include "roadobj/synth.hpp"

#include <sstream>

using namespace roadobj;

namespace {

Scene tiny_scene() {
    Scene scene;
    scene.frames.push_back(oracles::make_camera(0, {0, 0, 1.6}));
    scene.frames.push_back(oracles::make_camera(1, {2, 0, 1.6}));

    SparseMapPoint p;
    p.point_id = 0;
    p.position = {10, 0, 2};
    for (const CameraFrame& f : scene.frames) {
        const auto px = project(f.intrinsics, f.world_from_camera, p.position);
        p.observations.push_back({f.frame_id, *px});
    }
    scene.map_points.push_back(p);

    InstanceObservation obs;
    obs.obs_id = 0;
    obs.frame_id = 0;
    obs.object_class = ObjectClass::guideboard;
    obs.mask = {{100, 100}, {200, 100}, {200, 180}, {100, 180}};
    obs.det_box = polygon_aabb(obs.mask);
    scene.observations.push_back(obs);
    return scene;
}

std::string to_json_string(const Scene& scene) {
    std::ostringstream out;
    save_scene(scene, out);
    return out.str();
}

}  // namespace

TEST_CASE("validate_scene: empty frames") {
    Scene scene;
    CHECK_THROWS_WITH_AS(validate_scene(scene), "no frames", ValidationError);
}

TEST_CASE("validate_scene: dangling references name the record") {
    Scene scene = tiny_scene();
    scene.observations[0].frame_id = 99;
    try {
        validate_scene(scene);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("observation 0") != std::string::npos);
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("validate_scene: bad quaternion, degenerate mask, CW mask") {
    Scene scene = tiny_scene();
    scene.frames[0].world_from_camera.rotation.w() += 1e-3;
    CHECK_THROWS_AS(validate_scene(scene), ValidationError);

    scene = tiny_scene();
    scene.observations[0].mask = {{0, 0}, {1, 0}};
    CHECK_THROWS_AS(validate_scene(scene), ValidationError);

    scene = tiny_scene();
    std::reverse(scene.observations[0].mask.begin(), scene.observations[0].mask.end());
    CHECK_THROWS_AS(validate_scene(scene), ValidationError);

    scene = tiny_scene();
    scene.map_points[0].observations.pop_back();
    CHECK_THROWS_AS(validate_scene(scene), ValidationError);
}

TEST_CASE("scene load/save round-trip is byte-identical on simulator output") {
    SynthConfig cfg;
    cfg.n_signs = 2;
    cfg.n_lights = 1;
    cfg.n_circles = 1;
    cfg.n_cones = 0;
    cfg.n_frames = 12;
    cfg.seed = 99;
    const auto [scene, gt] = generate_scene(cfg);

    const std::string first = to_json_string(scene);
    std::istringstream in(first);
    const Scene loaded = load_scene(in);
    const std::string second = to_json_string(loaded);
    CHECK(first == second);
    CHECK(loaded.frames.size() == scene.frames.size());
    CHECK(loaded.map_points.size() == scene.map_points.size());
    CHECK(loaded.observations.size() == scene.observations.size());
    REQUIRE(loaded.ground_truth.has_value());
    CHECK(loaded.ground_truth->objects.size() == gt.objects.size());
}

TEST_CASE("load_scene: malformed JSON and unknown class tag") {
    std::istringstream bad("{ not json");
    CHECK_THROWS_AS(load_scene(bad), ParseError);

    Scene scene = tiny_scene();
    std::string text = to_json_string(scene);
    const auto pos = text.find("guideboard");
    text.replace(pos, std::string("guideboard").size(), "mystery_class");
    std::istringstream in(text);
    CHECK_THROWS_AS(load_scene(in), ParseError);
}

TEST_CASE("annotations: save/load identity, deterministic bytes, unknown tag") {
    std::vector<StaticAnnotation> anns;
    StaticAnnotation a;
    a.annotation_id = 1;
    a.track_id = 4;
    a.object_class = ObjectClass::guideboard;
    RectSignParams rect;
    rect.center = {1.0 / 3.0, -2.25, 7.125};
    rect.yaw = 0.7853981633974483;
    rect.width = 1.25;
    rect.height = 0.8;
    a.params = rect;
    a.mean_reproj_error = 0.125;
    a.n_observations_used = 9;
    anns.push_back(a);

    StaticAnnotation b = a;
    b.annotation_id = 0;
    CircleSignParams circle;
    circle.center = {3, 4, 5};
    circle.yaw = -1.1;
    circle.radius = 0.4;
    b.params = circle;
    b.object_class = ObjectClass::circular_sign;
    anns.push_back(b);

    std::ostringstream out1, out2;
    save_annotations(anns, out1);
    save_annotations(anns, out2);
    CHECK(out1.str() == out2.str());  // deterministic bytes

    std::istringstream in(out1.str());
    const auto loaded = load_annotations(in);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].annotation_id == 0);  // sorted by annotation_id
    CHECK(loaded[1].annotation_id == 1);
    const auto& lr = std::get<RectSignParams>(loaded[1].params);
    CHECK(lr.center == rect.center);  // lossless doubles
    CHECK(lr.yaw == rect.yaw);
    CHECK(lr.width == rect.width);

    std::string text = out1.str();
    const auto pos = text.find("circular_sign");
    text.replace(pos, std::string("circular_sign").size(), "blob");
    std::istringstream bad(text);
    CHECK_THROWS_AS(load_annotations(bad), ParseError);
}

TEST_CASE("clip_to_frame: identity, translation, inverse round-trip") {
    std::vector<StaticAnnotation> anns(1);
    RectSignParams rect;
    rect.center = {12, 3, 2};
    rect.yaw = 0.4;
    rect.width = 2;
    rect.height = 1;
    anns[0].params = rect;
    anns[0].object_class = ObjectClass::guideboard;

    const auto same = clip_to_frame(anns, 0, Pose::identity());
    CHECK((params_center(same[0].params) - rect.center).norm() < 1e-12);
    CHECK(params_yaw(same[0].params) == doctest::Approx(rect.yaw));

    Pose shift;
    shift.translation = {10, 0, 0};
    const auto moved = clip_to_frame(anns, 0, shift);
    CHECK(params_center(moved[0].params).x() == doctest::Approx(2.0));
    CHECK(std::get<RectSignParams>(moved[0].params).width == doctest::Approx(2.0));

    SplitMix64 rng(55);
    for (int i = 0; i < 30; ++i) {
        // world_from_sensor with yaw-only rotation plus arbitrary translation
        Pose pose;
        pose.rotation = Eigen::Quaterniond(
            Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), Vec3::UnitZ()));
        pose.translation = {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-2, 2)};
        const auto local = clip_to_frame(anns, 7, pose);
        const StaticAnnotation back = frame_to_clip(local[0], pose);
        CHECK((params_center(back.params) - rect.center).norm() < 1e-9);
        CHECK(std::abs(wrap_angle(params_yaw(back.params) - rect.yaw)) < 1e-9);
        CHECK(std::get<RectSignParams>(back.params).width == doctest::Approx(rect.width));
    }
}

TEST_CASE("clip_to_frame preserves shape extents exactly") {
    std::vector<StaticAnnotation> anns(2);
    CuboidParams cub;
    cub.center = {5, 5, 5};
    cub.yaw = 1.0;
    cub.width = 0.3;
    cub.height = 0.9;
    cub.depth = 0.2;
    anns[0].params = cub;
    CircleSignParams circ;
    circ.center = {8, 1, 2};
    circ.yaw = -0.5;
    circ.radius = 0.45;
    anns[1].params = circ;

    Pose pose;
    pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(1.2, Vec3::UnitZ()));
    pose.translation = {3, -4, 1};
    const auto local = clip_to_frame(anns, 0, pose);
    CHECK(std::get<CuboidParams>(local[0].params).width == cub.width);
    CHECK(std::get<CuboidParams>(local[0].params).height == cub.height);
    CHECK(std::get<CuboidParams>(local[0].params).depth == cub.depth);
    CHECK(std::get<CircleSignParams>(local[1].params).radius == circ.radius);
}
