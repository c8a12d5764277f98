// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/skinning.hpp"

namespace layered {

/// One procedural garment. Coverage is a closed interval of the body's
/// height parameter u in [0, 1] (0 at the bottom pole).
struct GarmentSpec {
    double offset = 0.01;                // meters along the body normal
    double coverage_lo = 0.0, coverage_hi = 1.0;
    double penetration_fraction = 0.0;   // of S_k, pushed inside the layer below
    double penetration_depth = 0.012;    // meters below the layer below
};

/// Vertical capsule chain. Joint j sits on the axis at the middle of
/// segment j; all layers share the body's tessellation.
struct FixtureSpec {
    int joints = 3;
    double segment_length = 0.3;
    double radius = 0.12;
    int segments = 128;   // vertices per ring
    int rings = 156;      // rings between the poles
    double hug_offset = 0.004;
    double blend_band = 0.03;  // u-width of the offset ramp outside coverage
    std::vector<GarmentSpec> layers;
    std::uint64_t seed = 1;

    /// Throws InvalidInput for non-positive sizes, offsets not above the
    /// hug offset, or coverage outside [0, 1].
    void validate() const;

    /// Three nested layers (10/20/30 mm) with overlapping coverage.
    static FixtureSpec standard(double penetration_fraction = 0.0);
};

/// Closed, outward-oriented capsule chain with smooth weights between
/// adjacent joint centers; joint positions are stored.
SkinnedBody make_body(const FixtureSpec& spec);

/// Height parameter of a body vertex.
double body_height_parameter(const FixtureSpec& spec, const Vec3& p);

/// Layer k (0-based) in rest pose, labels 1 on coverage. When the spec asks
/// for penetrations, an exact count of S vertices, in one-ring patches, is
/// moved below layer k - 1 (or into the body for k = 0), away from the layer
/// below's own pushed vertices; their indices go to `pushed` if given.
TriMesh make_garment_layer(const FixtureSpec& spec, std::size_t k, std::vector<std::uint32_t>* pushed = nullptr);

/// Per-joint rotation about the joint center with angle <= magnitude and a
/// shared translation of at most 0.05 * magnitude meters.
Pose perturb_pose(const SkinnedBody& body, double magnitude, std::uint64_t seed);

}  // namespace layered
