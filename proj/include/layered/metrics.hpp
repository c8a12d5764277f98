// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/raster.hpp"

namespace layered {

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // unit normal of the source face
};

/// Area-uniform samples; faces with zero area are never chosen. The stream
/// depends only on the seed and the face areas. Empty or all-degenerate
/// meshes are InvalidInput.
SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed);

/// Mean of the two directed mean point-to-surface distances, in millimeters.
/// Both sides are sampled with the same seed, so swapping the arguments
/// gives the identical value.
double chamfer_distance(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed);

/// Symmetric mean |cos| between each sample's normal and the normal of the
/// face holding its closest point on the other mesh. In [0, 1].
double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed);

struct IntersectionRatio {
    std::uint64_t visible_alone = 0;     // A: outer pixels rendered alone
    std::uint64_t visible_in_scene = 0;  // A-hat: outer pixels winning the z test in the full scene
    double percent = 0.0;                // 100 (A - A-hat) / A
};

/// Front (looking down -z) and back (looking down +z) orthographic views of
/// the meshes' joint bounds with a 5% margin, +y up, square images.
std::vector<Camera> ir_cameras(std::span<const TriMesh* const> scene, int resolution);

/// Rendered intersection ratio of `outer` against `inner` (the body and any
/// garments under it) over the given views. Exact depth ties go to the outer
/// garment. A = 0 raises UndefinedMetric.
IntersectionRatio intersection_ratio(const TriMesh& outer, std::span<const TriMesh* const> inner,
                                     std::span<const Camera> views);
/// Same with ir_cameras over outer plus inner.
IntersectionRatio intersection_ratio(const TriMesh& outer, std::span<const TriMesh* const> inner, int resolution = 1024);

struct MetricConfig {
    std::size_t samples = 100000;
    int resolution = 1024;
    std::uint64_t seed = 1;

    void validate() const;
};

struct LayerMetrics {
    std::string name;
    std::optional<double> chamfer_mm;
    std::optional<double> normal_consistency;
    std::optional<double> intersection_ratio_percent;
    std::uint64_t visible_alone = 0, visible_in_scene = 0;
};

/// Scene-level values are the means over the layers that have them.
struct MetricReport {
    std::vector<LayerMetrics> layers;
    std::optional<double> chamfer_mm;
    std::optional<double> normal_consistency;
    std::optional<double> intersection_ratio_percent;
    MetricConfig config;
};

struct LayerInput {
    std::string name;
    const TriMesh* mesh = nullptr;       // evaluated garment
    const TriMesh* reference = nullptr;  // optional ground truth for CD and NC
};

/// Layers ordered inner to outer. Layer k's IR renders it against the body
/// and layers 0..k-1. A layer with A = 0 is reported without an IR.
MetricReport evaluate_layers(const TriMesh& body, std::span<const LayerInput> layers, const MetricConfig& config);

std::string metric_report_json(const MetricReport& report);
void save_metric_report(const std::filesystem::path& path, const MetricReport& report);

}  // namespace layered
