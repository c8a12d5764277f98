// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/raster.hpp"

namespace layered {

/// Per-pixel garment flag, row-major with row 0 at the top.
struct LabelMask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // 0 or 1

    LabelMask() = default;
    LabelMask(int w, int h, bool value = false)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

    bool at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
};

struct LabeledView {
    Camera camera;
    LabelMask mask;
};

struct VoteConfig {
    int garment_label = 1;
    double visibility_tolerance = 0.005;  // meters of depth-buffer slack
};

/// Per-vertex labels from multi-view masks. A vertex is visible in a view
/// when it projects inside the image and its depth is within the tolerance
/// of the depth buffer at its pixel. It gets `garment_label` when more than
/// half of its visible views have the mask set there; otherwise 0 (also
/// when it is never visible). Throws InvalidInput for no views or a mask
/// whose size does not match its camera.
std::vector<int> vote_vertex_labels(const TriMesh& mesh, std::span<const LabeledView> views,
                                    const VoteConfig& config = {});

/// Keeps only the largest edge-connected component of every non-zero
/// label (the rest become 0), then applies `smoothing_iters` synchronous
/// rounds of closed one-ring majority voting; ties keep the current label.
std::vector<int> refine_labels(const TriMesh& mesh, std::span<const int> labels, int smoothing_iters = 3);

/// Masks set wherever the visible surface point (reconstructed from the
/// depth buffer at the pixel center) satisfies `region`.
std::vector<LabeledView> region_masks(const TriMesh& mesh, std::span<const Camera> cameras,
                                      const std::function<bool(const Vec3&)>& region);

/// One synchronous majority round; exposed for idempotence checks.
std::vector<int> majority_pass(const std::vector<std::vector<std::uint32_t>>& adjacency, std::span<const int> labels);

// Masks: PNG (any bit depth/color type, nonzero = garment) and binary or
// ASCII PGM. Writers emit 8-bit grayscale with 255 for garment.
LabelMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const LabelMask& mask);

/// 8-bit grayscale PNG writer used for debug rasters.
void save_gray_png(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels);

}  // namespace layered
