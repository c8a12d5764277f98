// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "layered/error.hpp"
#include "layered/metrics.hpp"
#include "layered/synthgen.hpp"
#include "layered/udfnet.hpp"

namespace layered {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

enum class Stage : int { Labels = 1, Canonicalize, Penetration, Udf, Extract, Metrics };
inline constexpr int kStageCount = 6;

const char* stage_name(Stage stage);

struct StageRange {
    Stage first = Stage::Labels, last = Stage::Metrics;

    /// "A..B", "A" or "" (everything); A and B are stage names or numbers
    /// 1-6. Usage error when malformed or reversed.
    static StageRange parse(const std::string& text);
    bool contains(Stage s) const { return static_cast<int>(s) >= static_cast<int>(first) && static_cast<int>(s) <= static_cast<int>(last); }
};

struct MaskView {
    std::filesystem::path mask, camera;
};

struct LayerEntry {
    std::string name;
    std::filesystem::path mesh;  // posed layer mesh
    std::filesystem::path pose;
    /// "vertex": labels from `label_file`, else the mesh's own labels;
    /// "masks": voted from `views`.
    bool labels_from_masks = false;
    std::optional<std::filesystem::path> label_file;
    std::vector<MaskView> views;
    int garment_label = 1;
    std::optional<std::filesystem::path> reference;  // canonical-space ground truth
};

/// Every tunable value of a run. Defaults follow the published settings
/// where they exist (epsilon 2 mm, N 4, tau 3 mm, lr 1e-4, 60 views).
struct PipelineParameters {
    std::uint64_t seed = 1;
    double epsilon = 0.002;
    double visibility_tolerance = 0.005;
    int smoothing_iterations = 3;
    int pe_count = 4;
    std::vector<int> hidden{128, 256, 256, 128};
    double delta = 0.01;
    SampleCounts samples;
    double sigma = 0.01;
    TrainConfig train;
    int grid_resolution = 256;
    double tau = 0.003;
    double xi = 0.005;
    Vec3 view_dir{0.0, 0.0, -1.0};
    MetricConfig metrics;

    /// Desk-scale settings for the synthetic fixture: 1/20 of the sample
    /// counts and a shorter schedule.
    static PipelineParameters fixture_scale();
};

struct Manifest {
    std::filesystem::path body_mesh, body_weights;
    std::optional<std::filesystem::path> body_joints;
    std::optional<std::filesystem::path> canonical_pose;  // rest pose when absent
    std::vector<LayerEntry> layers;                       // inner to outer
    PipelineParameters params;
    std::filesystem::path output;
};

struct ManifestIssue {
    std::string location;  // e.g. "layers[1].pose"
    std::string message;
};

struct ManifestCheck {
    std::optional<Manifest> manifest;  // set when there are no issues
    std::vector<ManifestIssue> issues;
    bool ok() const { return issues.empty(); }
};

/// Parses the manifest, resolves paths against its directory, loads every
/// referenced file and checks cross references. Collects all issues.
ManifestCheck validate_manifest(const std::filesystem::path& path);
/// validate_manifest, raising InvalidInput listing every issue.
Manifest load_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's directory when possible.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// A stage failure; `kind()` keeps the underlying error's kind.
class StageError : public Error {
public:
    StageError(Stage stage, int layer, const Error& cause);
    Stage stage() const { return stage_; }
    int layer() const { return layer_; }  // 1-based, 0 when not layer specific

private:
    Stage stage_;
    int layer_;
};

struct StageRecord {
    std::string name;
    double seconds = 0.0;
    std::vector<std::string> outputs;  // relative to the output directory
};

struct RunRecord {
    std::string tool_version = kToolVersion;
    PipelineParameters params;
    std::vector<StageRecord> stages;
    std::vector<std::string> warnings;
    std::string failure;  // empty on success
};

struct RunOptions {
    StageRange stages;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output;
};

/// Runs the requested stages in order. Each stage reads its inputs from the
/// artifacts of the previous one in the output directory, so a resumed run
/// produces exactly what an uninterrupted one would. The run record is
/// written to run_record.json (merged with an existing one) even when a
/// stage fails; the failure is then rethrown as StageError.
RunRecord run_pipeline(const Manifest& manifest, const RunOptions& options = {});

std::string run_record_json(const RunRecord& record);

/// Artifact layout inside the output directory.
namespace artifacts {
std::filesystem::path labels(const std::string& layer);
std::filesystem::path canonical_body();
std::filesystem::path canonical(const std::string& layer);
std::filesystem::path layered(const std::string& layer);
std::filesystem::path checkpoint(const std::string& layer);
std::filesystem::path loss_history(const std::string& layer);
std::filesystem::path garment(const std::string& layer);
std::filesystem::path metrics();
std::filesystem::path run_record();
}  // namespace artifacts

struct SynthOptions {
    double pose_magnitude = 0.3;  // radians per joint
    bool masks = false;           // label layers by voting over rendered masks
    int mask_resolution = 256;
    PipelineParameters params = PipelineParameters::fixture_scale();
};

/// Writes body, posed layers, poses, references and manifest.json into
/// `dir` and returns the manifest.
Manifest write_synthetic_fixture(const FixtureSpec& spec, const SynthOptions& options, const std::filesystem::path& dir);

}  // namespace layered
