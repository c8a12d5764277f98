// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/skinning.hpp"

namespace layered {

/// Inverse-skins a layer captured in `pose` back to the body's rest pose.
/// Weights come from the body posed the same way (nearest-vertex lookup in
/// posed space). Faces and labels are carried over untouched.
TriMesh canonicalize_layer(const TriMesh& mesh, const SkinnedBody& body, const Pose& pose);

struct Layer {
    TriMesh mesh;                             // canonical pose
    std::vector<std::uint32_t> garment_set;  // S_k, vertex indices
};

/// Layers ordered inner to outer; the body is M'_0.
struct LayerStack {
    TriMesh body;
    std::vector<Layer> layers;
    double epsilon = 0.002;

    /// Throws InvalidInput for an empty body, epsilon <= 0, or a garment
    /// index out of range.
    void validate() const;
};

/// Vertices whose label equals `label`, ascending.
std::vector<std::uint32_t> garment_set_from_labels(const TriMesh& mesh, int label = 1);

enum class DisplacementCase : std::uint8_t {
    Conform,    // not in S_k: placed on M'_{k-1}
    PushOut,    // in S_k and inside M'_{k-1}: placed epsilon beyond it
    Keep,       // in S_k and outside: untouched
};

struct LayerReport {
    std::size_t conformed = 0, pushed = 0, kept = 0;
    std::size_t conform_fallbacks = 0;  // line missed M'_{k-1}; used its closest point
    std::size_t push_fallbacks = 0;     // line missed M'_{k-1}; used body + epsilon
    std::size_t ambiguous_winding = 0;  // |w| and |w - 1| both above 0.1
};

struct PenetrationResult {
    std::vector<TriMesh> layers;  // M'_1..M'_K
    std::vector<LayerReport> reports;
    std::vector<std::string> warnings;
};

/// Sequential inner-to-outer pass. For every vertex v of layer k, b is its
/// closest body point and n the normal of that body face; t* is the largest
/// crossing of the line b + t n with M'_{k-1}. Vertices outside S_k move to
/// b + t* n, vertices of S_k inside M'_{k-1} move to b + (t* + epsilon) n,
/// all others stay bit-identical. Each layer reads a snapshot of the layer
/// below it, so vertices never see each other's moves.
PenetrationResult remove_penetrations(const LayerStack& stack);

}  // namespace layered
