#include "roadobj/errors.hpp"
#include "roadobj/pipeline.hpp"
#include "roadobj/render.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitEmptyResult = 3;

roadobj::PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return roadobj::load_pipeline_config(path);
}

int cmd_synth(const std::string& config_path, std::string scene_out, std::string gt_out,
              const std::optional<std::uint64_t>& seed) {
    roadobj::PipelineConfig cfg = load_config_or_default(config_path);
    if (seed) cfg.synth.seed = *seed;
    if (scene_out.empty()) scene_out = cfg.scene_path;
    if (gt_out.empty()) gt_out = cfg.gt_path;
    if (scene_out.empty() || gt_out.empty())
        throw roadobj::ConfigError("synth: output paths required (--scene-out/--gt-out or [io])");

    auto [scene, gt] = roadobj::generate_scene(cfg.synth);
    if (cfg.synth.pixel_noise_sigma > 0.0 || cfg.synth.outlier_fraction > 0.0 ||
        cfg.synth.dropout_fraction > 0.0 || cfg.synth.occluder_fraction > 0.0)
        scene = roadobj::corrupt(scene, gt, cfg.synth);

    roadobj::save_scene_file(scene, scene_out);
    roadobj::save_annotations_file(roadobj::ground_truth_annotations(gt), gt_out);
    std::cout << "synth: " << scene.frames.size() << " frames, " << scene.map_points.size()
              << " map points, " << scene.observations.size() << " observations, "
              << gt.objects.size() << " objects\n";
    return kExitOk;
}

int cmd_annotate(const std::string& config_path, std::string scene_path, std::string out_path,
                 int threads, const std::optional<double>& huber_delta) {
    roadobj::PipelineConfig cfg = load_config_or_default(config_path);
    if (scene_path.empty()) scene_path = cfg.scene_path;
    if (out_path.empty()) out_path = cfg.annotations_path;
    if (scene_path.empty() || out_path.empty())
        throw roadobj::ConfigError("annotate: --scene and --out required (or [io] paths)");
    if (huber_delta) cfg.solver.huber_delta = *huber_delta;

    const roadobj::Scene scene = roadobj::load_scene_file(scene_path);
    const roadobj::AnnotateResult result = roadobj::annotate_scene(scene, cfg, threads);
    const auto& d = result.diagnostics;
    if (result.annotations.empty()) {
        std::cerr << "annotate: no valid tracks (initial " << d.n_tracks_initial << ", invalid "
                  << d.n_tracks_invalid << ", gated observations " << d.n_observations_gated
                  << ")\n";
        return kExitEmptyResult;
    }
    roadobj::save_annotations_file(result.annotations, out_path, &result.reports);
    std::cout << "annotate: " << result.annotations.size() << " annotations from "
              << d.n_tracks_initial << " tracks (" << d.n_tracks_invalid << " invalid, "
              << d.n_observations_gated << " gated observations, " << d.association_rounds
              << " association rounds)\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, std::string pred_path, std::string ref_path,
             std::string scene_path, std::string report_path,
             const std::optional<double>& timestamp_filter_ms) {
    roadobj::PipelineConfig cfg = load_config_or_default(config_path);
    if (scene_path.empty()) scene_path = cfg.scene_path;
    if (pred_path.empty()) pred_path = cfg.annotations_path;
    if (ref_path.empty()) ref_path = cfg.gt_path;
    if (report_path.empty()) report_path = cfg.report_path;
    if (pred_path.empty() || ref_path.empty() || scene_path.empty())
        throw roadobj::ConfigError("eval: --pred, --ref and --scene required (or [io] paths)");
    if (timestamp_filter_ms) cfg.eval.timestamp_filter_ms = *timestamp_filter_ms;

    const roadobj::Scene scene = roadobj::load_scene_file(scene_path);
    const auto pred = roadobj::load_annotations_file(pred_path);
    const auto ref = roadobj::load_annotations_file(ref_path);

    std::vector<roadobj::FrameEvalBreakdown> breakdown;
    const roadobj::EvalResult r2d = roadobj::eval_2d(pred, ref, scene, cfg.eval, &breakdown);
    const roadobj::EvalResult r3d = roadobj::eval_3d(pred, ref, cfg.eval);

    auto result_json = [](const roadobj::EvalResult& r) {
        return ordered_json{{"precision", r.precision},   {"recall", r.recall},
                            {"mean_error", r.mean_error}, {"n_matched", r.n_matched},
                            {"n_pred", r.n_pred},         {"n_ref", r.n_ref}};
    };
    ordered_json report;
    report["format_version"] = roadobj::kFormatVersion;
    report["eval_2d"] = result_json(r2d);
    report["eval_3d"] = result_json(r3d);
    ordered_json frames = ordered_json::array();
    for (const auto& fb : breakdown)
        frames.push_back({{"frame_id", fb.frame_id},
                          {"n_matched", fb.n_matched},
                          {"n_pred", fb.n_pred},
                          {"n_ref", fb.n_ref},
                          {"mean_error",
                           fb.n_matched > 0 ? fb.error_sum / static_cast<double>(fb.n_matched)
                                            : 0.0}});
    report["per_frame"] = std::move(frames);

    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw roadobj::Error("cannot open report file " + report_path);
        out << report.dump(2) << "\n";
    }
    std::cout << "eval_2d: precision " << r2d.precision << " recall " << r2d.recall << " E_2D "
              << r2d.mean_error << " px (" << r2d.n_matched << "/" << r2d.n_pred << " pred, "
              << r2d.n_ref << " ref)\n";
    std::cout << "eval_3d: precision " << r3d.precision << " recall " << r3d.recall << " E_3D "
              << r3d.mean_error << " m (" << r3d.n_matched << "/" << r3d.n_pred << " pred, "
              << r3d.n_ref << " ref)\n";
    return kExitOk;
}

int cmd_overlay(const std::string& scene_path, const std::string& ann_path,
                const std::string& gt_path, std::int64_t frame_id, const std::string& out_path) {
    const roadobj::Scene scene = roadobj::load_scene_file(scene_path);
    const auto annotations = roadobj::load_annotations_file(ann_path);
    std::optional<std::vector<roadobj::StaticAnnotation>> gt;
    if (!gt_path.empty()) gt = roadobj::load_annotations_file(gt_path);

    const std::string svg = roadobj::render_overlay_svg(scene, frame_id, annotations,
                                                        gt ? &*gt : nullptr);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw roadobj::Error("cannot open output file " + out_path);
    out << svg;
    std::cout << "overlay: frame " << frame_id << " -> " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static road object reconstruction from multi-view 2D observations"};
    app.require_subcommand(1);

    std::string config_path, scene_path, gt_path, ann_path, report_path, out_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> timestamp_filter_ms, huber_delta;
    int threads = 1;
    std::int64_t frame_id = 0;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic scene + ground truth");
    synth->add_option("--config", config_path, "pipeline config file");
    synth->add_option("--scene-out", scene_path, "output scene JSON");
    synth->add_option("--gt-out", gt_path, "output ground-truth annotation JSON");
    synth->add_option("--seed", seed, "override [synth] seed");

    CLI::App* annotate = app.add_subcommand("annotate", "Reconstruct static objects from a scene");
    annotate->add_option("--config", config_path, "pipeline config file");
    annotate->add_option("--scene", scene_path, "input scene JSON");
    annotate->add_option("--out", ann_path, "output annotation JSON");
    annotate->add_option("--threads", threads, "refinement worker threads")
        ->check(CLI::PositiveNumber);
    annotate->add_option("--huber-delta", huber_delta, "override [solver] huber_delta");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate annotations against a reference");
    eval->add_option("--config", config_path, "pipeline config file");
    eval->add_option("--pred", ann_path, "predicted annotation JSON");
    eval->add_option("--ref", gt_path, "reference annotation JSON");
    eval->add_option("--scene", scene_path, "scene JSON (frames for reprojection)");
    eval->add_option("--report", report_path, "output metrics report JSON");
    eval->add_option("--timestamp-filter-ms", timestamp_filter_ms,
                     "drop frames paired worse than this many milliseconds");

    CLI::App* overlay = app.add_subcommand("overlay", "Render projected annotations as SVG");
    overlay->add_option("--scene", scene_path, "scene JSON")->required();
    overlay->add_option("--annotations", ann_path, "annotation JSON")->required();
    overlay->add_option("--gt", gt_path, "optional reference annotations (drawn in red)");
    overlay->add_option("--frame", frame_id, "frame id")->required();
    overlay->add_option("--out", out_path, "output SVG path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(config_path, scene_path, gt_path, seed);
        if (annotate->parsed())
            return cmd_annotate(config_path, scene_path, ann_path, threads, huber_delta);
        if (eval->parsed())
            return cmd_eval(config_path, ann_path, gt_path, scene_path, report_path,
                            timestamp_filter_ms);
        if (overlay->parsed())
            return cmd_overlay(scene_path, ann_path, gt_path, frame_id, out_path);
    } catch (const roadobj::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
