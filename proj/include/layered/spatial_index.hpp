// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

struct ClosestHit {
    Vec3 point;
    std::uint32_t face = 0;
    double distance = 0.0;
};

struct RayHit {
    double t = 0.0;
    std::uint32_t face = 0;
};

/// Ray hits at or below this parameter are dropped (self-intersection at the origin).
inline constexpr double kRayEpsilon = 1e-7;

/// Bounding-volume hierarchy over the faces of one mesh. The index keeps
/// its own copy of positions and connectivity, so it stays valid after the
/// source mesh is edited or destroyed. Immutable after construction and
/// safe for concurrent queries.
class SpatialIndex {
public:
    /// Throws InvalidInput for a mesh with no faces.
    explicit SpatialIndex(const TriMesh& mesh);

    const TriMesh& mesh() const { return mesh_; }
    const Aabb& bounds() const { return nodes_.front().box; }
    std::size_t leaf_count() const;

    /// Global closest point; equidistant faces resolve to the lowest face id.
    ClosestHit closest_point(const Vec3& q) const;
    double unsigned_distance(const Vec3& q) const { return closest_point(q).distance; }

    /// All crossings with t > kRayEpsilon, ascending by (t, face).
    /// Throws InvalidInput when `dir` has zero length; `dir` is normalized.
    std::vector<RayHit> ray_intersections(const Vec3& origin, const Vec3& dir) const;

    /// Generalized winding number at q. Exact up to rounding: far subtrees
    /// are evaluated through the fan that caps their open boundary.
    double winding_number(const Vec3& q) const;

    /// Winding number > 0.5.
    bool contains(const Vec3& q) const { return winding_number(q) > 0.5; }

    // Leaf layout, exposed for invariant checks.
    struct Node {
        Aabb box;
        std::uint32_t left = 0;   // child index, or first face slot for leaves
        std::uint32_t right = 0;  // child index, or face count for leaves
        bool leaf = false;
        std::uint32_t first_cap = 0;  // range into cap_edges_
        std::uint32_t cap_count = 0;
        std::uint32_t face_total = 0;
    };
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& face_order() const { return order_; }

private:
    std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);
    void build_caps();
    double winding_recursive(std::uint32_t node, const Vec3& q) const;

    TriMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<std::array<std::uint32_t, 2>> cap_edges_;
};

}  // namespace layered
