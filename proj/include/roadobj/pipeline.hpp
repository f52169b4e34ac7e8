#pragma once

#include "roadobj/association.hpp"
#include "roadobj/evaluate.hpp"
#include "roadobj/optimize.hpp"
#include "roadobj/proposal.hpp"
#include "roadobj/synth.hpp"

#include <map>
#include <string>
#include <vector>

namespace roadobj {

/// One config file drives the whole pipeline: [synth], [association],
/// [proposal], [solver], [eval] and [io] sections in a TOML-style
/// `key = value` format (strings quoted, # comments). CLI flags override
/// config keys.
struct PipelineConfig {
    SynthConfig synth;
    AssociationParams association;
    ProposalParams proposal;
    SolverOptions solver;
    EvalConfig eval;

    std::string scene_path;
    std::string gt_path;
    std::string annotations_path;
    std::string report_path;

    void validate() const;  // throws ConfigError, including identical io paths
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(std::istream& in);

struct AnnotateDiagnostics {
    std::int64_t n_tracks_initial = 0;
    std::int64_t n_tracks_invalid = 0;
    std::int64_t n_tracks_final = 0;
    std::int64_t n_observations_gated = 0;   // rejected by the occlusion gate
    std::int64_t n_observations_dropped = 0;  // behind-camera during refinement
    int association_rounds = 0;
    int merge_split_rounds = 0;
};

struct AnnotateResult {
    std::vector<StaticAnnotation> annotations;
    std::vector<FitReport> reports;
    AnnotateDiagnostics diagnostics;
    /// obs_ids that entered refinement per annotation (audit surface for the
    /// occlusion gate).
    std::vector<std::vector<std::int64_t>> used_obs_ids;
};

/// Full annotation pipeline: membership -> tracks -> proposals -> iterative
/// association -> merge/split -> robust refinement. Deterministic for fixed
/// inputs; n_threads only parallelizes per-track refinement and does not
/// change the output.
AnnotateResult annotate_scene(const Scene& scene, const PipelineConfig& cfg, int n_threads = 1);

/// Ground truth exported as plain annotations (for eval --ref and overlays).
std::vector<StaticAnnotation> ground_truth_annotations(const GroundTruth& gt);

}  // namespace roadobj
