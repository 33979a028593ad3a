#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nucsel/core.hpp"
#include "nucsel/features.hpp"
#include "nucsel/kmeans.hpp"
#include "nucsel/masksynth.hpp"
#include "nucsel/metrics.hpp"
#include "nucsel/selection.hpp"

namespace nucsel {

inline constexpr const char* kVersion = "0.1.0";

/// Error raised by a pipeline stage; what() is prefixed with "[stage] ".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunConfig {
    std::filesystem::path corpus;      // corpus manifest
    std::filesystem::path output_dir;
    int s = 256;
    int t = 15;
    int K1 = 9;
    int K2 = 4;
    std::uint64_t seed = 0;

    std::optional<std::filesystem::path> import_features;  // empty: built-in descriptor
    bool l2_normalize = false;
    KMeansOptions kmeans;
    Ablation ablation = Ablation::Full;

    // Mask synthesis runs when a bank mask is given.
    std::optional<std::filesystem::path> bank_mask;
    int synth_count = 50;
    SynthMaskConfig synth;
    TransformSet transforms;

    // Evaluation runs when both directories are given.
    std::optional<std::filesystem::path> gt_dir;
    std::optional<std::filesystem::path> pred_dir;
    MatchCriterion match = MatchCriterion::Jaccard;

    nlohmann::json source;  // the document as read
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Validation runs before anything else touches the filesystem.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Checks every invariant (s even, t >= 1, K1, K2 >= 1, synthesis sizes,
/// referenced paths exist). Throws StageError("config", ...).
void validate(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Stage artifacts shared with the CLI
// ---------------------------------------------------------------------------

nlohmann::json patches_to_json(const CropResult& crop, int s, int t);
std::vector<PatchRef> patches_from_json(const nlohmann::json& doc);

struct ImageMetrics {
    std::string name;
    double aji = 0;
    double dice = 0;
};

/// Pairs masks by file name (every *.png in gt_dir must exist in pred_dir).
std::vector<ImageMetrics> evaluate_dirs(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir,
                                        MatchCriterion criterion = MatchCriterion::Jaccard);

/// image,aji,dice rows followed by a "mean" row.
void write_metrics_csv(const std::vector<ImageMetrics>& rows, const std::filesystem::path& path);

/// name -> value for one column of a metrics CSV; the "mean" row is skipped.
std::map<std::string, double> read_metric_column(const std::filesystem::path& path, const std::string& column);

/// Writes mask_###.png (+ sidecar) per result and a manifest.json recording
/// seeds and instance counts. Returns the manifest.
nlohmann::json write_synthetic_masks(const std::vector<SynthResult>& masks, const SynthMaskConfig& cfg,
                                     const std::string& source, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

struct RunSummary {
    std::filesystem::path manifest;
    std::vector<std::string> executed;  // stages recomputed
    std::vector<std::string> skipped;   // stages whose inputs were unchanged
    std::vector<PatchRef> selected;
    std::vector<std::string> warnings;
};

/// crop -> features -> cluster -> select -> synth-masks -> eval. Each stage's
/// outputs live under cfg.output_dir and are recorded in manifest.json with
/// SHA-256 hashes. A stage is skipped when its input hash and outputs match
/// the previous manifest. Failures are recorded in the manifest and rethrown
/// as StageError.
RunSummary run(const RunConfig& cfg);

struct ReportSummary {
    std::vector<std::filesystem::path> files;
    bool has_metrics = false;
};

/// Renders CSV tables and SVG charts under <run_dir>/report. Throws listing
/// the missing stages when the run is incomplete.
ReportSummary report(const std::filesystem::path& run_dir);

}  // namespace nucsel
